#pragma once

#include <string>

namespace equimod::augcodec {

enum class Dataset { cifar10, imagenet };
enum class Baseline { simclr, byol, barlow };

std::string to_string(Dataset d);
std::string to_string(Baseline b);
Dataset dataset_from_string(const std::string& s);
Baseline baseline_from_string(const std::string& s);

// Which stochastic augmentations exist for a (dataset, baseline) pair.
// Blur is used everywhere except CIFAR10 with non-BYOL baselines; solarize
// exists only for BYOL.
inline bool profile_has_blur(Dataset d, Baseline b) {
  return d == Dataset::imagenet || b == Baseline::byol;
}
inline bool profile_has_solarize(Dataset, Baseline b) { return b == Baseline::byol; }

// One view's augmentation distribution. Crop is always applied; the other
// transformations fire with their probability.
struct AugmentationPolicy {
  Dataset dataset = Dataset::cifar10;
  Baseline baseline = Baseline::simclr;

  int resolution = 32;   // network input side
  int source_size = 32;  // nominal source side used when no image is given

  double crop_scale_lo = 0.08, crop_scale_hi = 1.0;
  double crop_ratio_lo = 3.0 / 4.0, crop_ratio_hi = 4.0 / 3.0;

  double p_hflip = 0.5;
  double p_jitter = 0.8;
  double jitter_brightness = 0.4, jitter_contrast = 0.4, jitter_saturation = 0.4;
  double jitter_hue = 0.1;
  double p_grayscale = 0.2;

  bool include_blur = false;
  double p_blur = 0.0;
  double sigma_lo = 0.1, sigma_hi = 2.0;
  int blur_kernel = 3;

  bool include_solarize = false;
  double p_solarize = 0.0;

  void validate() const;  // throws std::invalid_argument on violation
};

// The two per-view distributions of one training setup. SimCLR and Barlow
// Twins draw both views from the same distribution; BYOL blurs/solarizes the
// two views with different probabilities.
struct ViewPolicies {
  AugmentationPolicy first;
  AugmentationPolicy second;
};

ViewPolicies make_policies(Dataset d, Baseline b);

}  // namespace equimod::augcodec
