#pragma once

#include <memory>
#include <string>

#include "equimod/core/dataset.hpp"
#include "equimod/exp/config.hpp"

namespace equimod::exp {

struct SplitDataset {
  core::MemoryDataset train;
  core::MemoryDataset test;
};

// Standard binary batches: 5 train files and 1 test file of 10000 records,
// each 1 label byte + 3072 pixel bytes in R,G,B plane order.
SplitDataset load_cifar10(const std::string& root);

// Deterministic CIFAR-shaped synthetic set: 10 classes of vertically striped
// color patterns (class = stripe frequency + hue) with per-image phase,
// brightness and noise. Classes that share a frequency differ only in hue,
// so augmentation-related color information carries label signal.
core::MemoryDataset make_synth10(int64_t count, uint64_t seed);

// Random 10-class images at ImageNet-like 256x256, for exercising the
// 224-resolution pipeline without the real dataset.
core::MemoryDataset make_mini_imagenet(int64_t count, uint64_t seed);

// Class-directory tree (one subdirectory per class, sorted order defines the
// label ids). Images decode lazily; JPEG and binary PPM are supported.
class DirectoryDataset : public core::DataSource {
public:
  static DirectoryDataset open(const std::string& split_dir);

  int64_t size() const override { return static_cast<int64_t>(paths_.size()); }
  core::Image get(int64_t index) const override;
  int label(int64_t index) const override { return labels_.at(static_cast<size_t>(index)); }
  int num_classes() const override { return num_classes_; }

private:
  std::vector<std::string> paths_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

struct DataPair {
  std::unique_ptr<core::DataSource> train;
  std::unique_ptr<core::DataSource> test;
};

// Resolves config.dataset against the configured root (or EQUIMOD_DATA_ROOT).
DataPair open_dataset(const ExperimentConfig& config);

}  // namespace equimod::exp
