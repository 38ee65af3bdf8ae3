#pragma once

#include "equimod/networks/layers.hpp"

namespace equimod::networks {

// conv-bn-relu-conv-bn + identity, optional projection shortcut
struct BasicBlock {
  Conv2d conv1, conv2;
  BatchNorm2d bn1, bn2;
  Relu4d relu1, relu2;
  bool has_down = false;
  Conv2d down_conv;
  BatchNorm2d down_bn;

  BasicBlock() = default;
  BasicBlock(int in_c, int out_c, int stride);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(core::Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, ParamCollector& pc);
};

// 1x1 reduce, 3x3 (carries the stride), 1x1 expand
struct Bottleneck {
  static constexpr int expansion = 4;
  Conv2d conv1, conv2, conv3;
  BatchNorm2d bn1, bn2, bn3;
  Relu4d relu1, relu2, relu3;
  bool has_down = false;
  Conv2d down_conv;
  BatchNorm2d down_bn;

  Bottleneck() = default;
  Bottleneck(int in_c, int planes, int stride);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(core::Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, ParamCollector& pc);
};

enum class EncoderArch { resnet18_cifar, resnet50 };

EncoderArch encoder_arch_from_string(const std::string& s);
std::string to_string(EncoderArch a);

// Residual encoder without a classification layer. The CIFAR variant keeps a
// 3x3 stem with stride 1 and no pooling; resnet50 uses the 7x7/2 stem with a
// 3x3/2 max pool. Representations come from global average pooling.
class ResNet {
public:
  ResNet() = default;
  ResNet(EncoderArch arch, double width_mult = 1.0);

  EncoderArch arch() const { return arch_; }
  int rep_width() const { return rep_width_; }

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(core::Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, ParamCollector& pc);

private:
  EncoderArch arch_ = EncoderArch::resnet18_cifar;
  int rep_width_ = 0;
  Conv2d stem_conv_;
  BatchNorm2d stem_bn_;
  Relu4d stem_relu_;
  bool has_pool_ = false;
  MaxPool2d stem_pool_;
  std::vector<BasicBlock> basic_;
  std::vector<Bottleneck> bottleneck_;
  GlobalAvgPool gap_;
};

}  // namespace equimod::networks
