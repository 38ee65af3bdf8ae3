#include "equimod/augcodec/policy.hpp"

#include <stdexcept>

namespace equimod::augcodec {

std::string to_string(Dataset d) { return d == Dataset::cifar10 ? "cifar10" : "imagenet"; }

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::simclr: return "simclr";
    case Baseline::byol: return "byol";
    case Baseline::barlow: return "barlow";
  }
  throw std::logic_error("unknown baseline");
}

Dataset dataset_from_string(const std::string& s) {
  if (s == "cifar10") return Dataset::cifar10;
  if (s == "imagenet") return Dataset::imagenet;
  throw std::invalid_argument("unknown dataset: " + s);
}

Baseline baseline_from_string(const std::string& s) {
  if (s == "simclr") return Baseline::simclr;
  if (s == "byol") return Baseline::byol;
  if (s == "barlow") return Baseline::barlow;
  throw std::invalid_argument("unknown baseline: " + s);
}

void AugmentationPolicy::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(p_hflip) || !prob_ok(p_jitter) || !prob_ok(p_grayscale) || !prob_ok(p_blur) ||
      !prob_ok(p_solarize))
    throw std::invalid_argument("policy: probability outside [0,1]");
  if (resolution <= 0 || source_size <= 0)
    throw std::invalid_argument("policy: non-positive resolution");
  if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0)
    throw std::invalid_argument("policy: bad crop scale range");
  if (!(crop_ratio_lo > 0.0) || crop_ratio_lo > crop_ratio_hi)
    throw std::invalid_argument("policy: bad crop ratio range");
  if (jitter_brightness < 0 || jitter_contrast < 0 || jitter_saturation < 0 || jitter_hue < 0 ||
      jitter_hue > 0.5)
    throw std::invalid_argument("policy: bad jitter strengths");
  if (include_blur) {
    if (!(sigma_lo > 0.0) || sigma_lo > sigma_hi)
      throw std::invalid_argument("policy: bad sigma range");
    if (blur_kernel < 1 || blur_kernel % 2 == 0)
      throw std::invalid_argument("policy: blur kernel must be odd and positive");
  }
  if (include_blur != profile_has_blur(dataset, baseline))
    throw std::invalid_argument("policy: blur presence disagrees with profile");
  if (include_solarize != profile_has_solarize(dataset, baseline))
    throw std::invalid_argument("policy: solarize presence disagrees with profile");
  if (!include_blur && p_blur != 0.0)
    throw std::invalid_argument("policy: blur probability set but blur not in profile");
  if (!include_solarize && p_solarize != 0.0)
    throw std::invalid_argument("policy: solarize probability set but solarize not in profile");
}

namespace {

int blur_kernel_for(int resolution) {
  // 10% of the input side, forced odd (23 at 224, 3 at 32)
  int k = resolution / 10;
  if (k % 2 == 0) ++k;
  return k < 3 ? 3 : k;
}

AugmentationPolicy base_policy(Dataset d, Baseline b) {
  AugmentationPolicy p;
  p.dataset = d;
  p.baseline = b;
  p.resolution = d == Dataset::imagenet ? 224 : 32;
  p.source_size = d == Dataset::imagenet ? 256 : 32;
  p.p_hflip = 0.5;
  p.p_jitter = 0.8;
  p.p_grayscale = 0.2;
  if (b == Baseline::simclr) {
    // color strength 1.0 on ImageNet, 0.5 on CIFAR10
    const double s = d == Dataset::imagenet ? 1.0 : 0.5;
    p.jitter_brightness = 0.8 * s;
    p.jitter_contrast = 0.8 * s;
    p.jitter_saturation = 0.8 * s;
    p.jitter_hue = 0.2 * s;
  } else {
    p.jitter_brightness = 0.4;
    p.jitter_contrast = 0.4;
    p.jitter_saturation = 0.2;
    p.jitter_hue = 0.1;
  }
  p.include_blur = profile_has_blur(d, b);
  p.include_solarize = profile_has_solarize(d, b);
  if (p.include_blur) {
    p.blur_kernel = blur_kernel_for(p.resolution);
    p.sigma_lo = 0.1;
    p.sigma_hi = 2.0;
  }
  return p;
}

}  // namespace

ViewPolicies make_policies(Dataset d, Baseline b) {
  AugmentationPolicy first = base_policy(d, b);
  AugmentationPolicy second = first;
  if (b == Baseline::simclr) {
    if (first.include_blur) {
      first.p_blur = 0.5;
      second.p_blur = 0.5;
    }
  } else {
    // BYOL-style asymmetric blur/solarize schedule (also used by Barlow
    // Twins where blur is in the profile)
    if (first.include_blur) {
      first.p_blur = 1.0;
      second.p_blur = 0.1;
    }
    if (first.include_solarize) {
      first.p_solarize = 0.0;
      second.p_solarize = 0.2;
    }
  }
  first.validate();
  second.validate();
  return {first, second};
}

}  // namespace equimod::augcodec
