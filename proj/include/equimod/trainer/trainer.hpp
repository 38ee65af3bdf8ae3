#pragma once

#include <vector>

#include "equimod/augcodec/apply.hpp"
#include "equimod/augcodec/codec.hpp"
#include "equimod/networks/model.hpp"
#include "equimod/objectives/losses.hpp"
#include "equimod/trainer/lars.hpp"
#include "equimod/trainer/schedule.hpp"

namespace equimod::trainer {

struct StepResult {
  double loss_inv = 0;
  double loss_equi = 0;
  double loss_total = 0;
};

struct TrainStepConfig {
  objectives::LossConfig loss;
  int accumulation_steps = 1;
};

// Runs single EquiMod training steps: samples a transformation pair per
// image, encodes the 2N views together with the N originals in one pass,
// applies both losses and one LARS update. With lambda = 0 the equivariance
// branch is skipped entirely, which makes the step exactly the baseline's.
class Trainer {
public:
  Trainer(networks::EquiModModel& model, const OptimizerConfig& opt,
          const augcodec::ViewPolicies& policies, const augcodec::LayoutDescriptor& layout,
          const TrainStepConfig& step_config);

  bool equimod_enabled() const { return step_config_.loss.lambda > 0; }

  // one optimizer step over the batch; ema_tau drives the BYOL target update
  StepResult training_step(const std::vector<core::Image>& originals, double lr, double ema_tau,
                           uint64_t step_seed);

  // forward-only evaluation of the step losses on a batch (same trace seeds)
  StepResult evaluate_batch(const std::vector<core::Image>& originals, uint64_t step_seed);

  Lars& optimizer() { return lars_; }
  const augcodec::ViewPolicies& policies() const { return policies_; }
  const augcodec::LayoutDescriptor& layout() const { return layout_; }

private:
  StepResult forward_backward(const std::vector<core::Image>& originals, uint64_t seed_base,
                              int64_t index_offset, bool do_backward, double grad_scale);

  networks::EquiModModel& model_;
  Lars lars_;
  augcodec::ViewPolicies policies_;
  augcodec::LayoutDescriptor layout_;
  TrainStepConfig step_config_;
};

}  // namespace equimod::trainer
