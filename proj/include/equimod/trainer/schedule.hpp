#pragma once

#include <cstdint>

namespace equimod::trainer {

struct ScheduleConfig {
  double base_lr = 1.0;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;

  void validate() const;
};

// Linear warmup from 0 to base over warmup_steps, then cosine decay to 0 at
// total_steps. Steps outside [0, total] are an error.
double cosine_lr(int64_t step, const ScheduleConfig& schedule);

// BYOL momentum coefficient: cosine increase from tau_base at step 0 toward
// 1 at total_steps.
double byol_target_tau(int64_t step, int64_t total_steps, double tau_base);

}  // namespace equimod::trainer
