#include "equimod/trainer/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace equimod::trainer {

void ScheduleConfig::validate() const {
  if (!(base_lr > 0)) throw std::invalid_argument("schedule: base lr must be positive");
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("schedule: warmup must be shorter than the total");
}

double cosine_lr(int64_t step, const ScheduleConfig& schedule) {
  schedule.validate();
  if (step < 0 || step > schedule.total_steps)
    throw std::invalid_argument("schedule: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(schedule.total_steps) + "]");
  if (step < schedule.warmup_steps)
    return schedule.base_lr * static_cast<double>(step) /
           static_cast<double>(schedule.warmup_steps);
  const double progress = static_cast<double>(step - schedule.warmup_steps) /
                          static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  return schedule.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double byol_target_tau(int64_t step, int64_t total_steps, double tau_base) {
  if (total_steps <= 0 || step < 0 || step > total_steps)
    throw std::invalid_argument("schedule: bad ema step");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return 1.0 - (1.0 - tau_base) * (std::cos(std::numbers::pi * progress) + 1.0) / 2.0;
}

}  // namespace equimod::trainer
