#include "equimod/networks/resnet.hpp"

#include <cmath>

namespace equimod::networks {

namespace {

void add_into(Tensor& acc, const Tensor& other) {
  for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += other[i];
}

}  // namespace

BasicBlock::BasicBlock(int in_c, int out_c, int stride)
    : conv1(in_c, out_c, 3, stride, 1),
      conv2(out_c, out_c, 3, 1, 1),
      bn1(out_c),
      bn2(out_c),
      has_down(stride != 1 || in_c != out_c) {
  if (has_down) {
    down_conv = Conv2d(in_c, out_c, 1, stride, 0);
    down_bn = BatchNorm2d(out_c);
  }
}

Tensor BasicBlock::forward(const Tensor& x, bool train) {
  Tensor y = relu1.forward(bn1.forward(conv1.forward(x), train));
  y = bn2.forward(conv2.forward(y), train);
  const Tensor skip = has_down ? down_bn.forward(down_conv.forward(x), train) : x;
  add_into(y, skip);
  return relu2.forward(y);
}

Tensor BasicBlock::backward(const Tensor& gy) {
  const Tensor gsum = relu2.backward(gy);
  Tensor gx = conv1.backward(bn1.backward(relu1.backward(conv2.backward(bn2.backward(gsum)))));
  if (has_down)
    add_into(gx, down_conv.backward(down_bn.backward(gsum)));
  else
    add_into(gx, gsum);
  return gx;
}

void BasicBlock::init(core::Rng& rng) {
  conv1.init(rng);
  conv2.init(rng);
  if (has_down) down_conv.init(rng);
}

void BasicBlock::zero_grad() {
  conv1.zero_grad();
  conv2.zero_grad();
  bn1.zero_grad();
  bn2.zero_grad();
  if (has_down) {
    down_conv.zero_grad();
    down_bn.zero_grad();
  }
}

void BasicBlock::collect(const std::string& prefix, ParamCollector& pc) {
  conv1.collect(prefix + ".conv1", pc);
  bn1.collect(prefix + ".bn1", pc);
  conv2.collect(prefix + ".conv2", pc);
  bn2.collect(prefix + ".bn2", pc);
  if (has_down) {
    down_conv.collect(prefix + ".down_conv", pc);
    down_bn.collect(prefix + ".down_bn", pc);
  }
}

Bottleneck::Bottleneck(int in_c, int planes, int stride)
    : conv1(in_c, planes, 1, 1, 0),
      conv2(planes, planes, 3, stride, 1),
      conv3(planes, planes * expansion, 1, 1, 0),
      bn1(planes),
      bn2(planes),
      bn3(planes * expansion),
      has_down(stride != 1 || in_c != planes * expansion) {
  if (has_down) {
    down_conv = Conv2d(in_c, planes * expansion, 1, stride, 0);
    down_bn = BatchNorm2d(planes * expansion);
  }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
  Tensor y = relu1.forward(bn1.forward(conv1.forward(x), train));
  y = relu2.forward(bn2.forward(conv2.forward(y), train));
  y = bn3.forward(conv3.forward(y), train);
  const Tensor skip = has_down ? down_bn.forward(down_conv.forward(x), train) : x;
  add_into(y, skip);
  return relu3.forward(y);
}

Tensor Bottleneck::backward(const Tensor& gy) {
  const Tensor gsum = relu3.backward(gy);
  Tensor g = conv3.backward(bn3.backward(gsum));
  g = conv2.backward(bn2.backward(relu2.backward(g)));
  Tensor gx = conv1.backward(bn1.backward(relu1.backward(g)));
  if (has_down)
    add_into(gx, down_conv.backward(down_bn.backward(gsum)));
  else
    add_into(gx, gsum);
  return gx;
}

void Bottleneck::init(core::Rng& rng) {
  conv1.init(rng);
  conv2.init(rng);
  conv3.init(rng);
  if (has_down) down_conv.init(rng);
}

void Bottleneck::zero_grad() {
  conv1.zero_grad();
  conv2.zero_grad();
  conv3.zero_grad();
  bn1.zero_grad();
  bn2.zero_grad();
  bn3.zero_grad();
  if (has_down) {
    down_conv.zero_grad();
    down_bn.zero_grad();
  }
}

void Bottleneck::collect(const std::string& prefix, ParamCollector& pc) {
  conv1.collect(prefix + ".conv1", pc);
  bn1.collect(prefix + ".bn1", pc);
  conv2.collect(prefix + ".conv2", pc);
  bn2.collect(prefix + ".bn2", pc);
  conv3.collect(prefix + ".conv3", pc);
  bn3.collect(prefix + ".bn3", pc);
  if (has_down) {
    down_conv.collect(prefix + ".down_conv", pc);
    down_bn.collect(prefix + ".down_bn", pc);
  }
}

EncoderArch encoder_arch_from_string(const std::string& s) {
  if (s == "resnet18-cifar") return EncoderArch::resnet18_cifar;
  if (s == "resnet50") return EncoderArch::resnet50;
  throw std::invalid_argument("unknown encoder architecture: " + s);
}

std::string to_string(EncoderArch a) {
  return a == EncoderArch::resnet18_cifar ? "resnet18-cifar" : "resnet50";
}

ResNet::ResNet(EncoderArch arch, double width_mult) : arch_(arch) {
  if (width_mult <= 0) throw std::invalid_argument("resnet: width multiplier must be positive");
  const int base = std::max(4, static_cast<int>(std::lround(64 * width_mult)));
  const int widths[4] = {base, base * 2, base * 4, base * 8};
  const int strides[4] = {1, 2, 2, 2};

  if (arch == EncoderArch::resnet18_cifar) {
    stem_conv_ = Conv2d(3, base, 3, 1, 1);
    stem_bn_ = BatchNorm2d(base);
    has_pool_ = false;
    int in_c = base;
    for (int stage = 0; stage < 4; ++stage)
      for (int block = 0; block < 2; ++block) {
        basic_.emplace_back(in_c, widths[stage], block == 0 ? strides[stage] : 1);
        in_c = widths[stage];
      }
    rep_width_ = in_c;
  } else {
    stem_conv_ = Conv2d(3, base, 7, 2, 3);
    stem_bn_ = BatchNorm2d(base);
    has_pool_ = true;
    stem_pool_ = MaxPool2d{3, 2, 1, {}, {}};
    const int blocks[4] = {3, 4, 6, 3};
    int in_c = base;
    for (int stage = 0; stage < 4; ++stage)
      for (int block = 0; block < blocks[stage]; ++block) {
        bottleneck_.emplace_back(in_c, widths[stage], block == 0 ? strides[stage] : 1);
        in_c = widths[stage] * Bottleneck::expansion;
      }
    rep_width_ = in_c;
  }
}

Tensor ResNet::forward(const Tensor& x, bool train) {
  if (x.rank() != 4 || x.dim(3) != 3) throw std::invalid_argument("resnet: NHWC rgb input required");
  Tensor h = stem_relu_.forward(stem_bn_.forward(stem_conv_.forward(x), train));
  if (has_pool_) h = stem_pool_.forward(h);
  for (auto& b : basic_) h = b.forward(h, train);
  for (auto& b : bottleneck_) h = b.forward(h, train);
  return gap_.forward(h);
}

Tensor ResNet::backward(const Tensor& gy) {
  Tensor g = gap_.backward(gy);
  for (size_t i = bottleneck_.size(); i-- > 0;) g = bottleneck_[i].backward(g);
  for (size_t i = basic_.size(); i-- > 0;) g = basic_[i].backward(g);
  if (has_pool_) g = stem_pool_.backward(g);
  return stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(g)));
}

void ResNet::init(core::Rng& rng) {
  stem_conv_.init(rng);
  for (auto& b : basic_) b.init(rng);
  for (auto& b : bottleneck_) b.init(rng);
}

void ResNet::zero_grad() {
  stem_conv_.zero_grad();
  stem_bn_.zero_grad();
  for (auto& b : basic_) b.zero_grad();
  for (auto& b : bottleneck_) b.zero_grad();
}

void ResNet::collect(const std::string& prefix, ParamCollector& pc) {
  stem_conv_.collect(prefix + ".stem_conv", pc);
  stem_bn_.collect(prefix + ".stem_bn", pc);
  for (size_t i = 0; i < basic_.size(); ++i)
    basic_[i].collect(prefix + ".block" + std::to_string(i), pc);
  for (size_t i = 0; i < bottleneck_.size(); ++i)
    bottleneck_[i].collect(prefix + ".block" + std::to_string(i), pc);
}

}  // namespace equimod::networks
