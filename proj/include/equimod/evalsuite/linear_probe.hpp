#pragma once

#include "equimod/core/dataset.hpp"
#include "equimod/networks/model.hpp"

namespace equimod::evalsuite {

struct ProbeProtocol {
  int epochs = 90;
  int batch_size = 256;
  double lr = 0.2;
  double momentum = 0.9;  // Nesterov
  // no weight decay; cosine decay schedule
};

struct ProbeResult {
  double top1 = 0;  // percent
  double top5 = 0;
};

// Trains a softmax classifier on cached frozen-encoder features with SGD +
// Nesterov momentum under the fixed protocol. Never touches encoder state:
// features are extracted in eval mode.
ProbeResult linear_probe(networks::EquiModModel& model, const core::DataSource& train,
                         const core::DataSource& test, const ProbeProtocol& protocol,
                         uint64_t seed);

// classifier on explicit feature matrices; the probe above reduces to this
ProbeResult linear_probe_features(const core::Tensor& train_x, const std::vector<int>& train_y,
                                  const core::Tensor& test_x, const std::vector<int>& test_y,
                                  int num_classes, const ProbeProtocol& protocol, uint64_t seed);

// frozen-encoder features for a whole dataset, eval-mode batches
core::Tensor extract_features(networks::EquiModModel& model, const core::DataSource& data,
                              int batch_size = 128);

}  // namespace equimod::evalsuite
