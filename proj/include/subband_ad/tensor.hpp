// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "subband_ad/error.hpp"

namespace subband_ad {

/// Dense row-major tensor of rank 1..4. Axes carry the semantics the caller
/// assigns; throughout this library feature maps are C x H x W and batches
/// N x C x H x W. Storage is float by default; verification code
/// instantiates the double variant.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;

  explicit BasicTensor(std::vector<std::int64_t> shape, T fill = T(0))
      : shape_(std::move(shape)) {
    check_shape();
    data_.assign(static_cast<std::size_t>(element_count(shape_)), fill);
  }

  BasicTensor(std::vector<std::int64_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (element_count(shape_) != static_cast<std::int64_t>(data_.size())) {
      std::ostringstream os;
      os << "tensor data length " << data_.size()
         << " does not match shape product " << element_count(shape_);
      throw value_error(os.str());
    }
  }

  static std::int64_t element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t e : shape) n *= e;
    return n;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t extent(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Row-major accessors for the common ranks.
  T& at(std::int64_t i, std::int64_t j) { return data_[idx2(i, j)]; }
  const T& at(std::int64_t i, std::int64_t j) const { return data_[idx2(i, j)]; }
  T& at(std::int64_t c, std::int64_t i, std::int64_t j) { return data_[idx3(c, i, j)]; }
  const T& at(std::int64_t c, std::int64_t i, std::int64_t j) const { return data_[idx3(c, i, j)]; }
  T& at(std::int64_t n, std::int64_t c, std::int64_t i, std::int64_t j) {
    return data_[idx4(n, c, i, j)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t i, std::int64_t j) const {
    return data_[idx4(n, c, i, j)];
  }

  bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

  bool operator==(const BasicTensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
  }

 private:
  void check_shape() const {
    if (shape_.empty() || shape_.size() > 4)
      throw value_error("tensor rank must be 1..4, got " + std::to_string(shape_.size()));
    for (std::int64_t e : shape_)
      if (e < 1) throw value_error("tensor extents must be >= 1, shape " + shape_str());
  }

  std::size_t idx2(std::int64_t i, std::int64_t j) const {
    return static_cast<std::size_t>(i * shape_[1] + j);
  }
  std::size_t idx3(std::int64_t c, std::int64_t i, std::int64_t j) const {
    return static_cast<std::size_t>((c * shape_[1] + i) * shape_[2] + j);
  }
  std::size_t idx4(std::int64_t n, std::int64_t c, std::int64_t i, std::int64_t j) const {
    return static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j);
  }

  std::vector<std::int64_t> shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw value_error(std::string(what) + ": shape mismatch " + a.shape_str() +
                      " vs " + b.shape_str());
}

}  // namespace subband_ad
