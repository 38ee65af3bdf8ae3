#include "equimod/augcodec/apply.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace equimod::augcodec {

using core::Image;
using core::Rng;

namespace {

CropRect sample_crop(const AugmentationPolicy& p, Rng& rng, int src_h, int src_w) {
  const double area = static_cast<double>(src_h) * src_w;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(p.crop_scale_lo, p.crop_scale_hi);
    const double log_ratio =
        rng.uniform(std::log(p.crop_ratio_lo), std::log(p.crop_ratio_hi));
    const double ratio = std::exp(log_ratio);
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && w <= src_w && h > 0 && h <= src_h) {
      const int x = static_cast<int>(rng.uniform_int(0, src_w - w));
      const int y = static_cast<int>(rng.uniform_int(0, src_h - h));
      return {x, y, w, h};
    }
  }
  // fallback: largest centered crop with the ratio clamped into range
  const double in_ratio = static_cast<double>(src_w) / src_h;
  int w, h;
  if (in_ratio < p.crop_ratio_lo) {
    w = src_w;
    h = static_cast<int>(std::lround(w / p.crop_ratio_lo));
  } else if (in_ratio > p.crop_ratio_hi) {
    h = src_h;
    w = static_cast<int>(std::lround(h * p.crop_ratio_hi));
  } else {
    w = src_w;
    h = src_h;
  }
  return {(src_w - w) / 2, (src_h - h) / 2, w, h};
}

float luma(const float* rgb) { return 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2]; }

void adjust_brightness(Image& img, float factor) {
  for (float& v : img.px) v = std::clamp(v * factor, 0.f, 1.f);
}

void adjust_contrast(Image& img, float factor) {
  double acc = 0.0;
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (size_t i = 0; i < n; ++i) acc += luma(&img.px[i * 3]);
  const float mean = static_cast<float>(acc / static_cast<double>(n));
  for (float& v : img.px) v = std::clamp(factor * v + (1.f - factor) * mean, 0.f, 1.f);
}

void adjust_saturation(Image& img, float factor) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (size_t i = 0; i < n; ++i) {
    float* p = &img.px[i * 3];
    const float g = luma(p);
    for (int ch = 0; ch < 3; ++ch) p[ch] = std::clamp(factor * p[ch] + (1.f - factor) * g, 0.f, 1.f);
  }
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  v = mx;
  const float d = mx - mn;
  s = mx == 0.f ? 0.f : d / mx;
  if (d == 0.f) {
    h = 0.f;
    return;
  }
  if (mx == r)
    h = (g - b) / d + (g < b ? 6.f : 0.f);
  else if (mx == g)
    h = (b - r) / d + 2.f;
  else
    h = (r - g) / d + 4.f;
  h /= 6.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  if (s == 0.f) {
    r = g = b = v;
    return;
  }
  h = h * 6.f;
  const int i = static_cast<int>(h) % 6;
  const float f = h - std::floor(h);
  const float p = v * (1.f - s);
  const float q = v * (1.f - s * f);
  const float t = v * (1.f - s * (1.f - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

void adjust_hue(Image& img, float delta) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (size_t i = 0; i < n; ++i) {
    float* p = &img.px[i * 3];
    float h, s, v;
    rgb_to_hsv(p[0], p[1], p[2], h, s, v);
    h = h + delta;
    h -= std::floor(h);  // wrap into [0,1)
    hsv_to_rgb(h, s, v, p[0], p[1], p[2]);
  }
}

void to_grayscale(Image& img) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (size_t i = 0; i < n; ++i) {
    float* p = &img.px[i * 3];
    const float g = luma(p);
    p[0] = p[1] = p[2] = g;
  }
}

int reflect_index(int i, int n) {
  // reflect without repeating the border pixel, e.g. -1 -> 1
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

void gaussian_blur(Image& img, float sigma, int kernel) {
  const int radius = kernel / 2;
  std::vector<float> k(static_cast<size_t>(kernel));
  double sum = 0.0;
  for (int i = 0; i < kernel; ++i) {
    const double x = i - radius;
    k[static_cast<size_t>(i)] = static_cast<float>(std::exp(-x * x / (2.0 * sigma * sigma)));
    sum += k[static_cast<size_t>(i)];
  }
  for (float& v : k) v = static_cast<float>(v / sum);

  Image tmp(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        float acc = 0.f;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<size_t>(t + radius)] * img.at(y, reflect_index(x + t, img.w), ch);
        tmp.at(y, x, ch) = acc;
      }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        float acc = 0.f;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<size_t>(t + radius)] * tmp.at(reflect_index(y + t, img.h), x, ch);
        img.at(y, x, ch) = acc;
      }
}

void solarize(Image& img, float threshold) {
  for (float& v : img.px)
    if (v >= threshold) v = 1.f - v;
}

}  // namespace

AugmentationTrace sample_trace(const AugmentationPolicy& policy, Rng& rng) {
  return sample_trace(policy, rng, policy.source_size, policy.source_size);
}

AugmentationTrace sample_trace(const AugmentationPolicy& policy, Rng& rng, int src_h,
                               int src_w) {
  AugmentationTrace t;
  t.crop = sample_crop(policy, rng, src_h, src_w);
  t.hflip = rng.bernoulli(policy.p_hflip);
  t.jitter = rng.bernoulli(policy.p_jitter);
  if (t.jitter) {
    t.jitter_params.brightness = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - policy.jitter_brightness), 1.0 + policy.jitter_brightness));
    t.jitter_params.contrast = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - policy.jitter_contrast), 1.0 + policy.jitter_contrast));
    t.jitter_params.saturation = static_cast<float>(rng.uniform(
        std::max(0.0, 1.0 - policy.jitter_saturation), 1.0 + policy.jitter_saturation));
    t.jitter_params.hue = static_cast<float>(rng.uniform(-policy.jitter_hue, policy.jitter_hue));
    auto perm = rng.permutation(4);
    for (int i = 0; i < 4; ++i) t.jitter_params.order[static_cast<size_t>(i)] =
        static_cast<int>(perm[static_cast<size_t>(i)]);
  }
  t.grayscale = rng.bernoulli(policy.p_grayscale);
  if (policy.include_blur) {
    t.blur = rng.bernoulli(policy.p_blur);
    if (t.blur) t.sigma = static_cast<float>(rng.uniform(policy.sigma_lo, policy.sigma_hi));
  }
  if (policy.include_solarize) t.solarize = rng.bernoulli(policy.p_solarize);
  return t;
}

Image apply_trace(const Image& image, const AugmentationTrace& trace,
                  const AugmentationPolicy& policy) {
  if (trace.crop.x < 0 || trace.crop.y < 0 || trace.crop.w <= 0 || trace.crop.h <= 0 ||
      trace.crop.x + trace.crop.w > image.w || trace.crop.y + trace.crop.h > image.h)
    throw std::invalid_argument("apply_trace: crop rectangle outside image bounds");

  Image out = crop(image, trace.crop.x, trace.crop.y, trace.crop.w, trace.crop.h);
  out = resize_bilinear(out, policy.resolution, policy.resolution);
  if (trace.hflip) out = hflip(out);
  if (trace.jitter) {
    for (int op : trace.jitter_params.order) {
      switch (op) {
        case 0: adjust_brightness(out, trace.jitter_params.brightness); break;
        case 1: adjust_contrast(out, trace.jitter_params.contrast); break;
        case 2: adjust_saturation(out, trace.jitter_params.saturation); break;
        case 3: adjust_hue(out, trace.jitter_params.hue); break;
        default: throw std::invalid_argument("apply_trace: bad order index");
      }
    }
  }
  if (trace.grayscale) to_grayscale(out);
  if (trace.blur) gaussian_blur(out, trace.sigma, policy.blur_kernel);
  if (trace.solarize) solarize(out, 0.5f);
  return out;
}

AugmentationTrace identity_trace(int src_h, int src_w) {
  AugmentationTrace t;
  t.crop = {0, 0, src_w, src_h};
  return t;
}

AugmentationTrace sample_single_augmentation_trace(const std::string& augmentation,
                                                   const AugmentationPolicy& policy,
                                                   Rng& rng, int src_h, int src_w) {
  AugmentationTrace t = identity_trace(src_h, src_w);
  if (augmentation == "crop") {
    t.crop = sample_crop(policy, rng, src_h, src_w);
  } else if (augmentation == "hflip") {
    t.hflip = true;
  } else if (augmentation == "jitter") {
    t.jitter = true;
    t.jitter_params.brightness = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - policy.jitter_brightness), 1.0 + policy.jitter_brightness));
    t.jitter_params.contrast = static_cast<float>(
        rng.uniform(std::max(0.0, 1.0 - policy.jitter_contrast), 1.0 + policy.jitter_contrast));
    t.jitter_params.saturation = static_cast<float>(rng.uniform(
        std::max(0.0, 1.0 - policy.jitter_saturation), 1.0 + policy.jitter_saturation));
    t.jitter_params.hue = static_cast<float>(rng.uniform(-policy.jitter_hue, policy.jitter_hue));
    auto perm = rng.permutation(4);
    for (int i = 0; i < 4; ++i) t.jitter_params.order[static_cast<size_t>(i)] =
        static_cast<int>(perm[static_cast<size_t>(i)]);
  } else if (augmentation == "grayscale") {
    t.grayscale = true;
  } else if (augmentation == "blur") {
    if (!policy.include_blur)
      throw std::invalid_argument("augmentation 'blur' absent from profile");
    t.blur = true;
    t.sigma = static_cast<float>(rng.uniform(policy.sigma_lo, policy.sigma_hi));
  } else if (augmentation == "solarize") {
    if (!policy.include_solarize)
      throw std::invalid_argument("augmentation 'solarize' absent from profile");
    t.solarize = true;
  } else {
    throw std::invalid_argument("unknown augmentation: " + augmentation);
  }
  return t;
}

}  // namespace equimod::augcodec
