#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "equimod/core/image.hpp"

namespace equimod::core {

// Read-only labeled image source. Implementations must be safe for
// concurrent get() calls.
class DataSource {
public:
  virtual ~DataSource() = default;
  virtual int64_t size() const = 0;
  virtual Image get(int64_t index) const = 0;
  virtual int label(int64_t index) const = 0;
  virtual int num_classes() const = 0;
};

// Fixed-size images held in memory as bytes.
class MemoryDataset : public DataSource {
public:
  MemoryDataset() = default;
  MemoryDataset(int h, int w, int c) : h_(h), w_(w), c_(c) {}

  int64_t size() const override { return static_cast<int64_t>(labels_.size()); }
  int label(int64_t index) const override { return labels_.at(static_cast<size_t>(index)); }
  int num_classes() const override { return num_classes_; }

  Image get(int64_t index) const override {
    const size_t stride = static_cast<size_t>(h_) * w_ * c_;
    if (index < 0 || index >= size()) throw std::out_of_range("dataset index");
    Image img(h_, w_, c_);
    const uint8_t* src = pixels_.data() + static_cast<size_t>(index) * stride;
    for (size_t i = 0; i < stride; ++i) img.px[i] = static_cast<float>(src[i]) / 255.f;
    return img;
  }

  void reserve(int64_t n) {
    pixels_.reserve(static_cast<size_t>(n) * h_ * w_ * c_);
    labels_.reserve(static_cast<size_t>(n));
  }
  void push(const std::vector<uint8_t>& pixels, int label) {
    if (pixels.size() != static_cast<size_t>(h_) * w_ * c_)
      throw std::invalid_argument("dataset: pixel buffer size mismatch");
    pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
    labels_.push_back(label);
  }
  void set_num_classes(int n) { num_classes_ = n; }

  int height() const { return h_; }
  int width() const { return w_; }

private:
  int h_ = 0, w_ = 0, c_ = 3;
  int num_classes_ = 0;
  std::vector<uint8_t> pixels_;
  std::vector<int> labels_;
};

}  // namespace equimod::core
