#pragma once

#include <string>
#include <vector>

#include "equimod/augcodec/apply.hpp"
#include "equimod/core/dataset.hpp"
#include "equimod/networks/model.hpp"

namespace equimod::evalsuite {

struct EquivarianceEntry {
  std::string augmentation;
  double absolute = 0;
  double relative = 0;
  int64_t samples = 0;
};

struct EquivarianceReport {
  std::string dataset;
  std::vector<EquivarianceEntry> entries;

  void write_csv(const std::string& path) const;
  // grouped bar chart of both metrics
  void write_svg(const std::string& path) const;
};

// Probes one augmentation: each sampled image gets only the named
// augmentation (forced on, parameters drawn from the policy), the predictor
// runs on the original's embedding and the trace code, and both metrics are
// averaged. Deterministic given the seed.
EquivarianceEntry per_augmentation_report(networks::EquiModModel& model,
                                          const core::DataSource& data,
                                          const augcodec::AugmentationPolicy& policy,
                                          const augcodec::LayoutDescriptor& layout,
                                          const std::string& augmentation, int64_t sample_count,
                                          uint64_t seed);

// every augmentation present in the policy's profile
std::vector<std::string> profile_augmentations(const augcodec::AugmentationPolicy& policy);

EquivarianceReport full_report(networks::EquiModModel& model, const core::DataSource& data,
                               const augcodec::AugmentationPolicy& policy,
                               const augcodec::LayoutDescriptor& layout, int64_t sample_count,
                               uint64_t seed);

}  // namespace equimod::evalsuite
