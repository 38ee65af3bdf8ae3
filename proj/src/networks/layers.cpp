#include "equimod/networks/layers.hpp"

#include <algorithm>
#include <cstring>

namespace equimod::networks {

MlpSpec MlpSpec::projection_head(int in, int layer_count, int hidden, int out) {
  if (layer_count < 0) throw std::invalid_argument("mlp: negative layer count");
  MlpSpec s;
  s.in = in;
  for (int i = 0; i < layer_count - 1; ++i) s.layers.push_back({hidden, true, true, true});
  if (layer_count >= 1) s.layers.push_back({out, true, false, true});
  return s;
}

MlpSpec MlpSpec::perceptron(int in, int layer_count, int hidden, int out) {
  if (layer_count < 0) throw std::invalid_argument("mlp: negative layer count");
  MlpSpec s;
  s.in = in;
  for (int i = 0; i < layer_count - 1; ++i) s.layers.push_back({hidden, false, true, true});
  if (layer_count >= 1) s.layers.push_back({out, false, false, true});
  return s;
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_c_, int out_c_, int kernel_, int stride_, int pad_)
    : in_c(in_c_), out_c(out_c_), kernel(kernel_), stride(stride_), pad(pad_) {
  w = Tensor({out_c, static_cast<int64_t>(kernel) * kernel * in_c});
  gw = Tensor({out_c, static_cast<int64_t>(kernel) * kernel * in_c});
}

void Conv2d::init(core::Rng& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(kernel) * kernel * in_c));
  for (auto& v : w.vec()) v = static_cast<float>(rng.normal(0.0, std));
}

namespace {

// Patch rows for samples [n0, n1): row index ((n-n0)*oh*ow + y*ow + x),
// column layout (ky, kx, c) matching the conv weight layout.
void im2col_nhwc(const Tensor& x, int n0, int n1, int kernel, int stride, int pad, int oh, int ow,
                 float* col) {
  const int h = static_cast<int>(x.dim(1));
  const int wdt = static_cast<int>(x.dim(2));
  const int c = static_cast<int>(x.dim(3));
  const int64_t row_len = static_cast<int64_t>(kernel) * kernel * c;
  for (int n = n0; n < n1; ++n) {
    const float* xn = x.data() + static_cast<int64_t>(n) * h * wdt * c;
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo) {
        float* row = col + ((static_cast<int64_t>(n - n0) * oh + y) * ow + xo) * row_len;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y * stride - pad + ky;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = xo * stride - pad + kx;
            float* dst = row + (static_cast<int64_t>(ky) * kernel + kx) * c;
            if (iy < 0 || iy >= h || ix < 0 || ix >= wdt)
              std::memset(dst, 0, static_cast<size_t>(c) * sizeof(float));
            else
              std::memcpy(dst, xn + (static_cast<int64_t>(iy) * wdt + ix) * c,
                          static_cast<size_t>(c) * sizeof(float));
          }
        }
      }
  }
}

void col2im_nhwc(const float* col, int n0, int n1, int kernel, int stride, int pad, int oh,
                 int ow, Tensor& gx) {
  const int h = static_cast<int>(gx.dim(1));
  const int wdt = static_cast<int>(gx.dim(2));
  const int c = static_cast<int>(gx.dim(3));
  const int64_t row_len = static_cast<int64_t>(kernel) * kernel * c;
  for (int n = n0; n < n1; ++n) {
    float* gn = gx.data() + static_cast<int64_t>(n) * h * wdt * c;
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo) {
        const float* row = col + ((static_cast<int64_t>(n - n0) * oh + y) * ow + xo) * row_len;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = xo * stride - pad + kx;
            if (ix < 0 || ix >= wdt) continue;
            const float* src = row + (static_cast<int64_t>(ky) * kernel + kx) * c;
            float* dst = gn + (static_cast<int64_t>(iy) * wdt + ix) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
  }
}

int chunk_samples(int64_t oh, int64_t ow, int64_t row_len, int64_t n) {
  // keep the patch buffer around 8 MB
  const int64_t per_sample = oh * ow * row_len * static_cast<int64_t>(sizeof(float));
  const int64_t chunk = std::max<int64_t>(1, (8 << 20) / std::max<int64_t>(per_sample, 1));
  return static_cast<int>(std::min(chunk, n));
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 4 || x.dim(3) != in_c) throw std::invalid_argument("conv: bad input shape");
  x_cache = x;
  const int n = static_cast<int>(x.dim(0));
  const int oh = out_size(static_cast<int>(x.dim(1)));
  const int ow = out_size(static_cast<int>(x.dim(2)));
  const int64_t row_len = w.dim(1);
  Tensor y({n, oh, ow, out_c});

  const int chunk = chunk_samples(oh, ow, row_len, n);
  std::vector<float> col(static_cast<size_t>(chunk) * oh * ow * row_len);
  for (int n0 = 0; n0 < n; n0 += chunk) {
    const int n1 = std::min(n, n0 + chunk);
    im2col_nhwc(x, n0, n1, kernel, stride, pad, oh, ow, col.data());
    const int64_t rows = static_cast<int64_t>(n1 - n0) * oh * ow;
    core::gemm(false, true, rows, out_c, row_len, 1.f, col.data(), row_len, w.data(), row_len,
               0.f, y.data() + static_cast<int64_t>(n0) * oh * ow * out_c, out_c);
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const Tensor& x = x_cache;
  const int n = static_cast<int>(x.dim(0));
  const int oh = static_cast<int>(gy.dim(1));
  const int ow = static_cast<int>(gy.dim(2));
  const int64_t row_len = w.dim(1);
  Tensor gx({n, x.dim(1), x.dim(2), in_c});

  const int chunk = chunk_samples(oh, ow, row_len, n);
  std::vector<float> col(static_cast<size_t>(chunk) * oh * ow * row_len);
  std::vector<float> gcol(static_cast<size_t>(chunk) * oh * ow * row_len);
  for (int n0 = 0; n0 < n; n0 += chunk) {
    const int n1 = std::min(n, n0 + chunk);
    const int64_t rows = static_cast<int64_t>(n1 - n0) * oh * ow;
    const float* gy_ptr = gy.data() + static_cast<int64_t>(n0) * oh * ow * out_c;
    im2col_nhwc(x, n0, n1, kernel, stride, pad, oh, ow, col.data());
    // gw += gy^T col
    core::gemm(true, false, out_c, row_len, rows, 1.f, gy_ptr, out_c, col.data(), row_len, 1.f,
               gw.data(), row_len);
    // gcol = gy w
    core::gemm(false, false, rows, row_len, out_c, 1.f, gy_ptr, out_c, w.data(), row_len, 0.f,
               gcol.data(), row_len);
    col2im_nhwc(gcol.data(), n0, n1, kernel, stride, pad, oh, ow, gx);
  }
  return gx;
}

// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels_) : channels(channels_) {
  gamma = Tensor({channels});
  beta = Tensor({channels});
  ggamma = Tensor({channels});
  gbeta = Tensor({channels});
  running_mean = Tensor({channels});
  running_var = Tensor({channels});
  for (auto& v : gamma.vec()) v = 1.f;
  for (auto& v : running_var.vec()) v = 1.f;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.rank() != 4 || x.dim(3) != channels)
    throw std::invalid_argument("batchnorm2d: channel mismatch");
  const int64_t count = x.dim(0) * x.dim(1) * x.dim(2);
  if (train && count < 2)
    throw std::invalid_argument("batchnorm2d: training mode requires batch >= 2");
  train_cache = train;
  x_cache = x;
  mean_cache.assign(static_cast<size_t>(channels), 0.0);
  inv_std_cache.assign(static_cast<size_t>(channels), 0.0);

  std::vector<double> mean(static_cast<size_t>(channels), 0.0);
  std::vector<double> var(static_cast<size_t>(channels), 0.0);
  if (train) {
    for (int64_t i = 0; i < x.numel(); i += channels)
      for (int64_t c = 0; c < channels; ++c) mean[static_cast<size_t>(c)] += x[i + c];
    for (auto& m : mean) m /= static_cast<double>(count);
    for (int64_t i = 0; i < x.numel(); i += channels)
      for (int64_t c = 0; c < channels; ++c) {
        const double d = x[i + c] - mean[static_cast<size_t>(c)];
        var[static_cast<size_t>(c)] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(count);
    for (int64_t c = 0; c < channels; ++c) {
      const double unbiased = count > 1
                                  ? var[static_cast<size_t>(c)] * static_cast<double>(count) /
                                        static_cast<double>(count - 1)
                                  : var[static_cast<size_t>(c)];
      running_mean[c] =
          static_cast<float>((1 - momentum) * running_mean[c] + momentum * mean[static_cast<size_t>(c)]);
      running_var[c] = static_cast<float>((1 - momentum) * running_var[c] + momentum * unbiased);
    }
  } else {
    for (int64_t c = 0; c < channels; ++c) {
      mean[static_cast<size_t>(c)] = running_mean[c];
      var[static_cast<size_t>(c)] = running_var[c];
    }
  }

  Tensor y(x.shape());
  for (int64_t c = 0; c < channels; ++c) {
    mean_cache[static_cast<size_t>(c)] = mean[static_cast<size_t>(c)];
    inv_std_cache[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
  }
  for (int64_t i = 0; i < x.numel(); i += channels)
    for (int64_t c = 0; c < channels; ++c) {
      const double xh =
          (x[i + c] - mean_cache[static_cast<size_t>(c)]) * inv_std_cache[static_cast<size_t>(c)];
      y[i + c] = static_cast<float>(gamma[c] * xh + beta[c]);
    }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
  const Tensor& x = x_cache;
  const int64_t count = x.dim(0) * x.dim(1) * x.dim(2);
  std::vector<double> sum_g(static_cast<size_t>(channels), 0.0);
  std::vector<double> sum_gx(static_cast<size_t>(channels), 0.0);
  for (int64_t i = 0; i < x.numel(); i += channels)
    for (int64_t c = 0; c < channels; ++c) {
      const double xh =
          (x[i + c] - mean_cache[static_cast<size_t>(c)]) * inv_std_cache[static_cast<size_t>(c)];
      sum_g[static_cast<size_t>(c)] += gy[i + c];
      sum_gx[static_cast<size_t>(c)] += gy[i + c] * xh;
    }
  for (int64_t c = 0; c < channels; ++c) {
    ggamma[c] += static_cast<float>(sum_gx[static_cast<size_t>(c)]);
    gbeta[c] += static_cast<float>(sum_g[static_cast<size_t>(c)]);
  }

  Tensor gx(x.shape());
  for (int64_t i = 0; i < x.numel(); i += channels)
    for (int64_t c = 0; c < channels; ++c) {
      const size_t cc = static_cast<size_t>(c);
      const double xh = (x[i + c] - mean_cache[cc]) * inv_std_cache[cc];
      if (train_cache) {
        gx[i + c] = static_cast<float>(
            gamma[c] * inv_std_cache[cc] *
            (gy[i + c] - sum_g[cc] / static_cast<double>(count) -
             xh * sum_gx[cc] / static_cast<double>(count)));
      } else {
        gx[i + c] = static_cast<float>(gamma[c] * inv_std_cache[cc] * gy[i + c]);
      }
    }
  return gx;
}

// ---------------------------------------------------------------------------

Tensor Relu4d::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.vec())
    if (v < 0.f) v = 0.f;
  y_cache = y;
  return y;
}

Tensor Relu4d::backward(const Tensor& gy) {
  Tensor gx = gy;
  for (int64_t i = 0; i < gx.numel(); ++i)
    if (y_cache[i] <= 0.f) gx[i] = 0.f;
  return gx;
}

Tensor MaxPool2d::forward(const Tensor& x) {
  const int n = static_cast<int>(x.dim(0));
  const int h = static_cast<int>(x.dim(1));
  const int wdt = static_cast<int>(x.dim(2));
  const int c = static_cast<int>(x.dim(3));
  const int oh = (h + 2 * pad - kernel) / stride + 1;
  const int ow = (wdt + 2 * pad - kernel) / stride + 1;
  Tensor y({n, oh, ow, c});
  argmax_cache.assign(static_cast<size_t>(y.numel()), -1);
  in_shape_cache = {n, h, wdt, c};
  for (int i = 0; i < n; ++i)
    for (int yo = 0; yo < oh; ++yo)
      for (int xo = 0; xo < ow; ++xo)
        for (int ch = 0; ch < c; ++ch) {
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_idx = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = yo * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = xo * stride - pad + kx;
              if (ix < 0 || ix >= wdt) continue;
              const int64_t idx = ((static_cast<int64_t>(i) * h + iy) * wdt + ix) * c + ch;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          const int64_t out_idx = ((static_cast<int64_t>(i) * oh + yo) * ow + xo) * c + ch;
          y[out_idx] = best;
          argmax_cache[static_cast<size_t>(out_idx)] = best_idx;
        }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
  Tensor gx(in_shape_cache);
  for (int64_t i = 0; i < gy.numel(); ++i) gx[argmax_cache[static_cast<size_t>(i)]] += gy[i];
  return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  h_cache = static_cast<int>(h);
  w_cache = static_cast<int>(w);
  Tensor y({n, c});
  const double scale = 1.0 / static_cast<double>(h * w);
  for (int64_t i = 0; i < n; ++i) {
    const float* xi = x.data() + i * h * w * c;
    for (int64_t p = 0; p < h * w; ++p)
      for (int64_t ch = 0; ch < c; ++ch) y.at(i, ch) += xi[p * c + ch];
    for (int64_t ch = 0; ch < c; ++ch) y.at(i, ch) = static_cast<float>(y.at(i, ch) * scale);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
  const int64_t n = gy.dim(0), c = gy.dim(1);
  Tensor gx({n, h_cache, w_cache, c});
  const float scale = 1.f / static_cast<float>(h_cache * w_cache);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t p = 0; p < static_cast<int64_t>(h_cache) * w_cache; ++p)
      for (int64_t ch = 0; ch < c; ++ch)
        gx[(i * h_cache * w_cache + p) * c + ch] = gy.at(i, ch) * scale;
  return gx;
}

}  // namespace equimod::networks
