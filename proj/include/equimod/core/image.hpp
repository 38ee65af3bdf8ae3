#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace equimod::core {

// Interleaved HWC float image, values in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> px;

  Image() = default;
  Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), px(static_cast<size_t>(h_) * w_ * c_, 0.f) {}

  float& at(int y, int x, int ch) { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
  const float& at(int y, int x, int ch) const {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
};

Image crop(const Image& img, int x, int y, int w, int h);
Image resize_bilinear(const Image& img, int out_h, int out_w);
Image hflip(const Image& img);
// Shorter side scaled to `size`, then a centered size x size crop.
Image resize_shorter_center_crop(const Image& img, int size);

}  // namespace equimod::core
