// Dense row-major tensor, the only storage type used across the project.
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace magic {

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
  }

  Tensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != numel_of(shape_)) {
      throw std::invalid_argument("tensor data size does not match shape");
    }
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  int dim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int size(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // (c, y, x) accessor for 3-d tensors
  T& at(int c, int y, int x) {
    assert(dim() == 3);
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(int c, int y, int x) const {
    assert(dim() == 3);
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  // (y, x) accessor for 2-d tensors
  T& at(int y, int x) {
    assert(dim() == 2);
    return data_[static_cast<std::size_t>(y) * shape_[1] + x];
  }
  const T& at(int y, int x) const {
    assert(dim() == 2);
    return data_[static_cast<std::size_t>(y) * shape_[1] + x];
  }

  void fill(T v) {
    for (auto& e : data_) e = v;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& e : data_) {
      if (!std::isfinite(static_cast<double>(e))) return false;
    }
    return true;
  }

  static std::int64_t numel_of(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int s : shape) {
      if (s < 0) throw std::invalid_argument("negative tensor dimension");
      n *= s;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
bool tensors_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("shape mismatch in max_abs_diff");
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace magic
