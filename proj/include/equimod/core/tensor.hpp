#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace equimod::core {

// Dense row-major tensor. Float for the network stack, double where the
// objectives and oracles want the extra precision.
template <typename T>
class TensorT {
public:
  TensorT() = default;
  explicit TensorT(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }
  TensorT(std::vector<int64_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != numel_of(shape_))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-d convenience accessors
  T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  const T& at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  TensorT<T> reshaped(std::vector<int64_t> shape) const {
    if (numel_of(shape) != numel())
      throw std::invalid_argument("tensor: reshape changes element count");
    TensorT<T> out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  // Slice [r0, r1) along the leading dimension, copied.
  TensorT<T> rows(int64_t r0, int64_t r1) const {
    if (rank() < 1) throw std::invalid_argument("tensor: rows() needs rank >= 1");
    if (r0 < 0 || r1 > shape_[0] || r0 > r1) throw std::out_of_range("tensor: row range");
    std::vector<int64_t> shape = shape_;
    shape[0] = r1 - r0;
    int64_t stride = 1;
    for (size_t i = 1; i < shape_.size(); ++i) stride *= shape_[i];
    TensorT<T> out(shape);
    std::copy(data_.begin() + r0 * stride, data_.begin() + r1 * stride, out.data());
    return out;
  }

private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

// C = alpha * op(A) * op(B) + beta * C, row-major. Backed by BLAS.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

// out = op(A) * op(B) for 2-d tensors; allocates the result.
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, bool trans_a, const TensorT<T>& b, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) throw std::invalid_argument("matmul: rank 2 required");
  const int64_t m = trans_a ? a.dim(1) : a.dim(0);
  const int64_t k = trans_a ? a.dim(0) : a.dim(1);
  const int64_t kb = trans_b ? b.dim(1) : b.dim(0);
  const int64_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) throw std::invalid_argument("matmul: inner dimensions differ");
  TensorT<T> c({m, n});
  gemm(trans_a, trans_b, m, n, k, T(1), a.data(), a.dim(1), b.data(), b.dim(1), T(0), c.data(),
       n);
  return c;
}

template <typename T>
void check_shape(const TensorT<T>& t, const std::vector<int64_t>& want, const std::string& who) {
  if (t.shape() != want) {
    std::string msg = who + ": shape mismatch, got (";
    for (auto d : t.shape()) msg += std::to_string(d) + ",";
    msg += ") want (";
    for (auto d : want) msg += std::to_string(d) + ",";
    msg += ")";
    throw std::invalid_argument(msg);
  }
}

}  // namespace equimod::core
