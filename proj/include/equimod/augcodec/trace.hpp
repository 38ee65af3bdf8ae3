#pragma once

#include <array>

#include "equimod/augcodec/policy.hpp"

namespace equimod::augcodec {

struct CropRect {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const CropRect&) const = default;
};

// Application-order indices use the fixed mapping
// {0: brightness, 1: contrast, 2: saturation, 3: hue}.
struct ColorJitterParams {
  float brightness = 1.f;
  float contrast = 1.f;
  float saturation = 1.f;
  float hue = 0.f;
  std::array<int, 4> order = {0, 1, 2, 3};
  bool operator==(const ColorJitterParams&) const = default;
};

// Complete record of one sampled transformation; enough to re-apply it
// deterministically. Crop coordinates are in the source image's pixel frame.
struct AugmentationTrace {
  CropRect crop;
  bool hflip = false;
  bool jitter = false;
  ColorJitterParams jitter_params;
  bool grayscale = false;
  bool blur = false;
  float sigma = 0.f;
  bool solarize = false;

  bool operator==(const AugmentationTrace&) const = default;

  // Internal-consistency invariants: default jitter params when jitter is
  // off, zero sigma when blur is off, order a permutation of {0,1,2,3}.
  void validate() const;
};

}  // namespace equimod::augcodec
