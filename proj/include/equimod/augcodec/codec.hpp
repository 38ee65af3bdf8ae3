#pragma once

#include <string>
#include <vector>

#include "equimod/augcodec/trace.hpp"

namespace equimod::augcodec {

// Fixed slot layout of the numeric trace vector for one (dataset, baseline)
// profile:
//   [per-augmentation flags, crop excluded] ++ [crop x, y, w, h]
//   ++ [brightness, contrast, saturation, hue] ++ [order indices x4]
//   ++ [sigma, when blur is in the profile]
// 18 slots for the ImageNet/BYOL profile, 15 for CIFAR10/SimCLR.
struct TraceLayout {
  std::string profile_id;
  Dataset dataset = Dataset::cifar10;
  Baseline baseline = Baseline::simclr;
  bool has_blur = false;
  bool has_solarize = false;
  std::vector<std::string> fields;

  int length() const { return static_cast<int>(fields.size()); }

  static TraceLayout for_profile(Dataset d, Baseline b);
};

std::vector<float> encode_trace(const AugmentationTrace& trace, const TraceLayout& layout);
AugmentationTrace decode_trace(const std::vector<float>& v, const TraceLayout& layout);

// Component-wise standardization statistics, fit once over a sample of raw
// vectors and then frozen.
struct NormStats {
  std::vector<float> mean;
  std::vector<float> std;

  bool operator==(const NormStats&) const = default;
};

// Population mean/std per component. Components with std below 1e-6 are
// clamped to 1 so constant slots pass through centered.
NormStats fit_normalizer(const std::vector<std::vector<float>>& vectors);

std::vector<float> normalize(const std::vector<float>& v, const NormStats& stats);

// Layout + stats travel beside checkpoints as a structured text document.
struct LayoutDescriptor {
  TraceLayout layout;
  NormStats stats;

  std::string to_json() const;
  static LayoutDescriptor from_json(const std::string& text);
  void save(const std::string& path) const;
  static LayoutDescriptor load(const std::string& path);
};

}  // namespace equimod::augcodec
