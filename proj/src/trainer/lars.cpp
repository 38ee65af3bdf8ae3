#include "equimod/trainer/lars.hpp"

#include <cmath>
#include <stdexcept>

namespace equimod::trainer {

void OptimizerConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("optimizer: lr must be positive");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("optimizer: bad momentum");
  if (weight_decay < 0) throw std::invalid_argument("optimizer: negative weight decay");
  if (!(trust_coefficient > 0))
    throw std::invalid_argument("optimizer: trust coefficient must be positive");
}

Lars::Lars(std::vector<networks::ParamRef> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.value->shape());
}

void Lars::step(double lr) {
  for (size_t i = 0; i < params_.size(); ++i) {
    core::Tensor& w = *params_[i].value;
    const core::Tensor& g = *params_[i].grad;
    core::Tensor& v = velocity_[i];

    if (params_[i].norm_or_bias) {
      // excluded from decay and adaptation: plain momentum SGD
      for (int64_t k = 0; k < w.numel(); ++k) {
        v[k] = static_cast<float>(config_.momentum * v[k] + lr * g[k]);
        w[k] -= v[k];
      }
      continue;
    }

    double w_norm2 = 0, g_norm2 = 0;
    for (int64_t k = 0; k < w.numel(); ++k) {
      w_norm2 += static_cast<double>(w[k]) * w[k];
      g_norm2 += static_cast<double>(g[k]) * g[k];
    }
    const double w_norm = std::sqrt(w_norm2);
    const double g_norm = std::sqrt(g_norm2);
    const double denom = g_norm + config_.weight_decay * w_norm;
    const double local =
        (w_norm > 0 && denom > 0) ? config_.trust_coefficient * w_norm / denom : 1.0;

    for (int64_t k = 0; k < w.numel(); ++k) {
      const double update = g[k] + config_.weight_decay * w[k];
      v[k] = static_cast<float>(config_.momentum * v[k] + lr * local * update);
      w[k] -= v[k];
    }
  }
}

std::map<std::string, core::Tensor> Lars::state() const {
  std::map<std::string, core::Tensor> s;
  for (size_t i = 0; i < params_.size(); ++i) s.emplace(params_[i].name, velocity_[i]);
  return s;
}

void Lars::load_state(const std::map<std::string, core::Tensor>& state) {
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto it = state.find(params_[i].name);
    if (it == state.end())
      throw std::runtime_error("optimizer state missing parameter " + params_[i].name);
    if (it->second.shape() != velocity_[i].shape())
      throw std::runtime_error("optimizer state shape mismatch for " + params_[i].name);
    velocity_[i] = it->second;
  }
}

void ema_update(std::vector<networks::ParamRef>& target,
                const std::vector<networks::ParamRef>& online, double tau) {
  if (target.size() != online.size())
    throw std::invalid_argument("ema_update: parameter lists differ in length");
  for (size_t i = 0; i < target.size(); ++i) {
    core::Tensor& t = *target[i].value;
    const core::Tensor& o = *online[i].value;
    if (t.shape() != o.shape()) throw std::invalid_argument("ema_update: shape mismatch");
    for (int64_t k = 0; k < t.numel(); ++k)
      t[k] = static_cast<float>(tau * t[k] + (1.0 - tau) * o[k]);
  }
}

}  // namespace equimod::trainer
