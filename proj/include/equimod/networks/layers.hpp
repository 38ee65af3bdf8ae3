#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "equimod/core/rng.hpp"
#include "equimod/core/tensor.hpp"

namespace equimod::networks {

using core::Tensor;
using core::TensorT;

// Named handle onto a trainable tensor. Biases and normalization parameters
// are flagged so the optimizer can exclude them from weight decay and
// layer-wise adaptation.
template <typename T>
struct ParamRefT {
  std::string name;
  TensorT<T>* value = nullptr;
  TensorT<T>* grad = nullptr;
  bool norm_or_bias = false;
};

// Non-trainable state that still belongs in checkpoints (running statistics).
template <typename T>
struct BufferRefT {
  std::string name;
  TensorT<T>* value = nullptr;
};

template <typename T>
struct ParamCollectorT {
  std::vector<ParamRefT<T>> params;
  std::vector<BufferRefT<T>> buffers;

  void add(const std::string& name, TensorT<T>& value, TensorT<T>& grad, bool norm_or_bias) {
    params.push_back({name, &value, &grad, norm_or_bias});
  }
  void add_buffer(const std::string& name, TensorT<T>& value) {
    buffers.push_back({name, &value});
  }
};

using ParamRef = ParamRefT<float>;
using BufferRef = BufferRefT<float>;
using ParamCollector = ParamCollectorT<float>;

// ---------------------------------------------------------------------------
// 1-d layers, templated so the heads can be instantiated in double for the
// finite-difference checks.
// ---------------------------------------------------------------------------

template <typename T>
struct DenseT {
  int in = 0, out = 0;
  bool has_bias = true;
  TensorT<T> w, b, gw, gb;
  TensorT<T> x_cache;

  DenseT() = default;
  DenseT(int in_, int out_, bool bias = true) : in(in_), out(out_), has_bias(bias) {
    w = TensorT<T>({out, in});
    gw = TensorT<T>({out, in});
    if (has_bias) {
      b = TensorT<T>({out});
      gb = TensorT<T>({out});
    }
  }

  void init(core::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : w.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
    if (has_bias)
      for (auto& v : b.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
  }

  TensorT<T> forward(const TensorT<T>& x) {
    if (x.rank() != 2 || x.dim(1) != in)
      throw std::invalid_argument("dense: input width " +
                                  std::to_string(x.rank() == 2 ? x.dim(1) : -1) +
                                  " does not match layer width " + std::to_string(in));
    x_cache = x;
    TensorT<T> y = core::matmul(x, false, w, true);
    if (has_bias)
      for (int64_t r = 0; r < y.dim(0); ++r)
        for (int64_t c = 0; c < out; ++c) y.at(r, c) += b[c];
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int64_t n = gy.dim(0);
    // gw += gy^T x ; gb += column sums ; gx = gy w
    core::gemm(true, false, out, in, n, T(1), gy.data(), out, x_cache.data(), in, T(1), gw.data(),
               in);
    if (has_bias)
      for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < out; ++c) gb[c] += gy.at(r, c);
    return core::matmul(gy, false, w, false);
  }

  void zero_grad() {
    gw.zero();
    if (has_bias) gb.zero();
  }

  void collect(const std::string& prefix, ParamCollectorT<T>& pc) {
    pc.add(prefix + ".w", w, gw, false);
    if (has_bias) pc.add(prefix + ".b", b, gb, true);
  }
};

template <typename T>
struct BatchNorm1dT {
  int width = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  TensorT<T> gamma, beta, ggamma, gbeta;
  TensorT<T> running_mean, running_var;
  // caches
  TensorT<T> xhat_cache;
  std::vector<double> inv_std_cache;
  bool train_cache = true;

  BatchNorm1dT() = default;
  explicit BatchNorm1dT(int width_) : width(width_) {
    gamma = TensorT<T>({width});
    beta = TensorT<T>({width});
    ggamma = TensorT<T>({width});
    gbeta = TensorT<T>({width});
    running_mean = TensorT<T>({width});
    running_var = TensorT<T>({width});
    for (auto& v : gamma.vec()) v = T(1);
    for (auto& v : running_var.vec()) v = T(1);
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    if (x.rank() != 2 || x.dim(1) != width)
      throw std::invalid_argument("batchnorm1d: width mismatch");
    const int64_t n = x.dim(0);
    if (train && n < 2)
      throw std::invalid_argument("batchnorm1d: training mode requires batch >= 2");
    train_cache = train;
    TensorT<T> y({n, width});
    xhat_cache = TensorT<T>({n, width});
    inv_std_cache.assign(static_cast<size_t>(width), 0.0);
    for (int64_t c = 0; c < width; ++c) {
      double mean, var;
      if (train) {
        double m = 0;
        for (int64_t r = 0; r < n; ++r) m += x.at(r, c);
        m /= static_cast<double>(n);
        double v = 0;
        for (int64_t r = 0; r < n; ++r) {
          const double d = x.at(r, c) - m;
          v += d * d;
        }
        v /= static_cast<double>(n);
        mean = m;
        var = v;
        const double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
        running_mean[c] = static_cast<T>((1 - momentum) * running_mean[c] + momentum * mean);
        running_var[c] = static_cast<T>((1 - momentum) * running_var[c] + momentum * unbiased);
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      const double inv_std = 1.0 / std::sqrt(var + eps);
      inv_std_cache[static_cast<size_t>(c)] = inv_std;
      for (int64_t r = 0; r < n; ++r) {
        const double xh = (x.at(r, c) - mean) * inv_std;
        xhat_cache.at(r, c) = static_cast<T>(xh);
        y.at(r, c) = static_cast<T>(gamma[c] * xh + beta[c]);
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int64_t n = gy.dim(0);
    TensorT<T> gx({n, width});
    for (int64_t c = 0; c < width; ++c) {
      double sum_g = 0, sum_gx = 0;
      for (int64_t r = 0; r < n; ++r) {
        sum_g += gy.at(r, c);
        sum_gx += gy.at(r, c) * xhat_cache.at(r, c);
      }
      ggamma[c] += static_cast<T>(sum_gx);
      gbeta[c] += static_cast<T>(sum_g);
      const double inv_std = inv_std_cache[static_cast<size_t>(c)];
      if (train_cache) {
        const double mean_g = sum_g / static_cast<double>(n);
        const double mean_gx = sum_gx / static_cast<double>(n);
        for (int64_t r = 0; r < n; ++r)
          gx.at(r, c) = static_cast<T>(gamma[c] * inv_std *
                                       (gy.at(r, c) - mean_g - xhat_cache.at(r, c) * mean_gx));
      } else {
        for (int64_t r = 0; r < n; ++r)
          gx.at(r, c) = static_cast<T>(gamma[c] * inv_std * gy.at(r, c));
      }
    }
    return gx;
  }

  void zero_grad() {
    ggamma.zero();
    gbeta.zero();
  }

  void collect(const std::string& prefix, ParamCollectorT<T>& pc) {
    pc.add(prefix + ".gamma", gamma, ggamma, true);
    pc.add(prefix + ".beta", beta, gbeta, true);
    pc.add_buffer(prefix + ".running_mean", running_mean);
    pc.add_buffer(prefix + ".running_var", running_var);
  }
};

template <typename T>
struct ReluT {
  TensorT<T> y_cache;

  TensorT<T> forward(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (auto& v : y.vec())
      if (v < T(0)) v = T(0);
    y_cache = y;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx = gy;
    for (int64_t i = 0; i < gx.numel(); ++i)
      if (y_cache[i] <= T(0)) gx[i] = T(0);
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Small fully-connected stack: dense [+ batch norm] [+ relu] per layer.
// ---------------------------------------------------------------------------

struct MlpLayerSpec {
  int out = 0;
  bool bn = false;
  bool relu = false;
  bool bias = true;
};

struct MlpSpec {
  int in = 0;
  std::vector<MlpLayerSpec> layers;

  int out() const { return layers.empty() ? in : layers.back().out; }

  // (L-1) hidden blocks of dense+bn+relu and a final dense+bn without
  // nonlinearity; the head shape shared by the projection heads and the
  // equivariance predictor.
  static MlpSpec projection_head(int in, int layer_count, int hidden, int out);
  // plain perceptron: dense layers with relu between, no normalization
  static MlpSpec perceptron(int in, int layer_count, int hidden, int out);
};

template <typename T>
class MlpT {
public:
  MlpT() = default;
  explicit MlpT(const MlpSpec& spec) : spec_(spec) {
    int in = spec.in;
    for (const auto& l : spec.layers) {
      dense_.emplace_back(in, l.out, l.bias);
      bn_.emplace_back(l.bn ? std::optional<BatchNorm1dT<T>>(BatchNorm1dT<T>(l.out))
                            : std::nullopt);
      relu_.emplace_back(l.relu ? std::optional<ReluT<T>>(ReluT<T>{}) : std::nullopt);
      in = l.out;
    }
  }

  const MlpSpec& spec() const { return spec_; }
  int in_width() const { return spec_.in; }
  int out_width() const { return spec_.out(); }
  bool empty() const { return dense_.empty(); }

  void init(core::Rng& rng) {
    for (auto& d : dense_) d.init(rng);
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    TensorT<T> h = x;
    for (size_t i = 0; i < dense_.size(); ++i) {
      h = dense_[i].forward(h);
      if (bn_[i]) h = bn_[i]->forward(h, train);
      if (relu_[i]) h = relu_[i]->forward(h);
    }
    return h;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> g = gy;
    for (size_t i = dense_.size(); i-- > 0;) {
      if (relu_[i]) g = relu_[i]->backward(g);
      if (bn_[i]) g = bn_[i]->backward(g);
      g = dense_[i].backward(g);
    }
    return g;
  }

  void zero_grad() {
    for (auto& d : dense_) d.zero_grad();
    for (auto& b : bn_)
      if (b) b->zero_grad();
  }

  void collect(const std::string& prefix, ParamCollectorT<T>& pc) {
    for (size_t i = 0; i < dense_.size(); ++i) {
      dense_[i].collect(prefix + ".fc" + std::to_string(i), pc);
      if (bn_[i]) bn_[i]->collect(prefix + ".bn" + std::to_string(i), pc);
    }
  }

  // which rectifier units were active in the last forward; lets gradient
  // checks recognize kink crossings where the derivative does not exist
  std::vector<uint8_t> relu_pattern() const {
    std::vector<uint8_t> bits;
    for (const auto& r : relu_)
      if (r)
        for (const T& v : r->y_cache.vec()) bits.push_back(v > T(0) ? 1 : 0);
    return bits;
  }

private:
  MlpSpec spec_;
  std::vector<DenseT<T>> dense_;
  std::vector<std::optional<BatchNorm1dT<T>>> bn_;
  std::vector<std::optional<ReluT<T>>> relu_;
};

using Dense = DenseT<float>;
using BatchNorm1d = BatchNorm1dT<float>;
using Mlp = MlpT<float>;

// ---------------------------------------------------------------------------
// 2-d stack (float only). Tensors are NHWC.
// ---------------------------------------------------------------------------

struct Conv2d {
  int in_c = 0, out_c = 0, kernel = 1, stride = 1, pad = 0;
  Tensor w;  // (out_c, kernel*kernel*in_c), no bias
  Tensor gw;
  Tensor x_cache;

  Conv2d() = default;
  Conv2d(int in_c_, int out_c_, int kernel_, int stride_, int pad_);
  void init(core::Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  void zero_grad() { gw.zero(); }
  void collect(const std::string& prefix, ParamCollector& pc) { pc.add(prefix + ".w", w, gw, false); }
  int out_size(int in_size) const { return (in_size + 2 * pad - kernel) / stride + 1; }
};

struct BatchNorm2d {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  Tensor gamma, beta, ggamma, gbeta, running_mean, running_var;
  Tensor x_cache;
  std::vector<double> mean_cache, inv_std_cache;
  bool train_cache = true;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels_);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void zero_grad() {
    ggamma.zero();
    gbeta.zero();
  }
  void collect(const std::string& prefix, ParamCollector& pc) {
    pc.add(prefix + ".gamma", gamma, ggamma, true);
    pc.add(prefix + ".beta", beta, gbeta, true);
    pc.add_buffer(prefix + ".running_mean", running_mean);
    pc.add_buffer(prefix + ".running_var", running_var);
  }
};

struct Relu4d {
  Tensor y_cache;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
};

struct MaxPool2d {
  int kernel = 3, stride = 2, pad = 1;
  std::vector<int64_t> argmax_cache;
  std::vector<int64_t> in_shape_cache;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
};

// (N, H, W, C) -> (N, C)
struct GlobalAvgPool {
  int h_cache = 0, w_cache = 0;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
};

}  // namespace equimod::networks
