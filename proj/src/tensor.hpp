#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace loga {

// Dense n-dimensional float tensor, row-major contiguous. No views, no
// broadcasting; every op allocates its output.
template <class T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  Tensor() = default;

  explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
    long n = 1;
    for (long e : shape_) {
      require(e > 0, ErrCode::dim, "tensor extent must be positive, got ", e);
      n *= e;
    }
    data_.assign(static_cast<size_t>(n), T(0));
  }

  Tensor(std::vector<long> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    long n = 1;
    for (long e : shape_) n *= e;
    require(static_cast<size_t>(n) == data_.size(), ErrCode::dim,
            "data length ", data_.size(), " does not match shape ", shape_str());
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<long> shape, T v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  static Tensor identity(long n) {
    Tensor t({n, n});
    for (long i = 0; i < n; ++i) t.at(i, i) = T(1);
    return t;
  }

  long rank() const { return static_cast<long>(shape_.size()); }
  long extent(long axis) const { return shape_[static_cast<size_t>(axis)]; }
  const std::vector<long>& shape() const { return shape_; }
  long size() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  T operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  T& at(long i, long j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  T at(long i, long j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

  T& at(long i, long j, long k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  T at(long i, long j, long k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  T& at(long i, long j, long k, long l) {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  T at(long i, long j, long k, long l) const {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.reshape_raw(shape_);
    for (long i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  // in-place metadata change used by cast(); size must already match
  void reshape_raw(const std::vector<long>& shape) {
    long n = 1;
    for (long e : shape) n *= e;
    data_.resize(static_cast<size_t>(n));
    shape_ = shape;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<long> shape_;
  std::vector<T> data_;
};

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.same_shape(b), ErrCode::dim, op, ": shape mismatch ", a.shape_str(), " vs ",
          b.shape_str());
}

}  // namespace loga
