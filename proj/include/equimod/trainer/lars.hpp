#pragma once

#include <map>
#include <string>
#include <vector>

#include "equimod/networks/layers.hpp"

namespace equimod::trainer {

struct OptimizerConfig {
  double lr = 1.0;  // base rate; the schedule supplies the per-step value
  double momentum = 0.9;
  double weight_decay = 1e-6;
  double trust_coefficient = 0.001;

  bool operator==(const OptimizerConfig&) const = default;

  void validate() const;
};

// Layer-wise adaptive rate scaling with momentum. Parameters flagged as
// biases or normalization weights are updated with plain momentum SGD,
// without weight decay and without the trust-ratio scaling.
class Lars {
public:
  Lars() = default;
  Lars(std::vector<networks::ParamRef> params, OptimizerConfig config);

  void step(double lr);

  const OptimizerConfig& config() const { return config_; }
  std::map<std::string, core::Tensor> state() const;
  void load_state(const std::map<std::string, core::Tensor>& state);

private:
  std::vector<networks::ParamRef> params_;
  std::vector<core::Tensor> velocity_;
  OptimizerConfig config_;
};

// target <- tau * target + (1 - tau) * online, element-wise over paired
// parameter lists
void ema_update(std::vector<networks::ParamRef>& target,
                const std::vector<networks::ParamRef>& online, double tau);

}  // namespace equimod::trainer
