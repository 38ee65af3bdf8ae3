#include "equimod/core/image.hpp"

#include <algorithm>
#include <cmath>

namespace equimod::core {

Image crop(const Image& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.w || y + h > img.h)
    throw std::invalid_argument("crop: rectangle outside image bounds");
  Image out(h, w, img.c);
  for (int r = 0; r < h; ++r) {
    const float* src = &img.px[(static_cast<size_t>(y + r) * img.w + x) * img.c];
    std::copy(src, src + static_cast<size_t>(w) * img.c, &out.px[static_cast<size_t>(r) * w * img.c]);
  }
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: non-positive size");
  if (out_h == img.h && out_w == img.w) return img;
  Image out(out_h, out_w, img.c);
  // align_corners=false convention: sample at pixel centers
  const float sy = static_cast<float>(img.h) / out_h;
  const float sx = static_cast<float>(img.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.f, static_cast<float>(img.h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.h - 1);
    const float wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.f, static_cast<float>(img.w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.w - 1);
      const float wx = fx - x0;
      for (int ch = 0; ch < img.c; ++ch) {
        const float top = img.at(y0, x0, ch) * (1 - wx) + img.at(y0, x1, ch) * wx;
        const float bot = img.at(y1, x0, ch) * (1 - wx) + img.at(y1, x1, ch) * wx;
        out.at(y, x, ch) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(y, img.w - 1 - x, ch);
  return out;
}

Image resize_shorter_center_crop(const Image& img, int size) {
  const int shorter = std::min(img.h, img.w);
  const int rh = static_cast<int>(std::lround(static_cast<double>(img.h) * size / shorter));
  const int rw = static_cast<int>(std::lround(static_cast<double>(img.w) * size / shorter));
  Image r = resize_bilinear(img, std::max(size, rh), std::max(size, rw));
  const int x = (r.w - size) / 2;
  const int y = (r.h - size) / 2;
  return crop(r, x, y, size, size);
}

}  // namespace equimod::core
