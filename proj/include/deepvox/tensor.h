// Copyright 2026 The DeepVOX Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DEEPVOX_TENSOR_H_
#define DEEPVOX_TENSOR_H_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepvox/common.h"

namespace deepvox::nd {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major tensor with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    Check(data_.size() == NumElements(shape_), ErrorCode::kInternal,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + ShapeString(shape_));
  }

  static Tensor Scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    Check(data_.size() == 1, ErrorCode::kInternal,
          "item() on tensor of shape " + ShapeString(shape_));
    return data_[0];
  }

  Tensor Reshaped(Shape shape) const {
    Check(NumElements(shape) == data_.size(), ErrorCode::kInternal,
          "cannot reshape " + ShapeString(shape_) + " to " +
              ShapeString(shape));
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> Cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool AllFinite() const {
    // x - x is NaN exactly for NaN and +-Inf; the sum vectorizes.
    T acc = T(0);
    for (T v : data_) acc += v - v;
    return acc == T(0);
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Dilated, strided 1-D convolution geometry. Convolution here is
// cross-correlation: out[o,t] = sum_c sum_k w[o,c,k] x[c, t*stride + k*dilation].
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t dilation = 1;
  std::size_t stride = 1;
  bool bias = true;

  std::size_t Extent() const { return (kernel_size - 1) * dilation + 1; }
  std::size_t OutputLength(std::size_t length) const {
    return (length - Extent()) / stride + 1;
  }
  // Throws kUsage unless all sizes are positive and the kernel fits.
  void Validate(std::size_t input_length) const;
};

}  // namespace deepvox::nd

#endif  // DEEPVOX_TENSOR_H_
