// Copyright 2026 The phocnet-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PHOCNET_TENSOR_HPP_
#define PHOCNET_TENSOR_HPP_

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phocnet {

struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Rank-3 array (channels x height x width), row-major within each channel.
///
/// Flat vectors for the fully connected part of a network are stored with
/// shape (n, 1, 1) so that every layer consumes and produces the same type.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0})
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {
    if (channels == 0 || height == 0 || width == 0)
      throw std::invalid_argument("tensor dimensions must be positive");
  }

  explicit Tensor(Shape3 s, T fill = T{0}) : Tensor(s.channels, s.height, s.width, fill) {}

  static Tensor flat(std::size_t length, T fill = T{0}) { return Tensor(length, 1, 1, fill); }

  static Tensor flat(std::span<const T> values) {
    Tensor t(values.size(), 1, 1);
    std::copy(values.begin(), values.end(), t.data_.begin());
    return t;
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return height_ * width_; }
  bool empty() const { return data_.empty(); }
  Shape3 shape() const { return {channels_, height_, width_}; }
  bool is_flat() const { return height_ == 1 && width_ == 1; }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
           std::to_string(width_);
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t c, std::size_t y, std::size_t x) {
    assert(c < channels_ && y < height_ && x < width_);
    return data_[(c * height_ + y) * width_ + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    assert(c < channels_ && y < height_ && x < width_);
    return data_[(c * height_ + y) * width_ + x];
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(channels_, height_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

template <typename T>
using FeatureMap = Tensor<T>;

/// Parameter or gradient blob with an arbitrary-rank shape.
template <typename T>
struct Blob {
  std::vector<std::size_t> shape;
  std::vector<T> values;

  Blob() = default;
  explicit Blob(std::vector<std::size_t> s, T fill = T{0}) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    values.assign(n, fill);
  }

  std::size_t size() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  template <typename U>
  Blob<U> cast() const {
    Blob<U> out;
    out.shape = shape;
    out.values.assign(values.begin(), values.end());
    return out;
  }

  friend bool operator==(const Blob&, const Blob&) = default;
};

}  // namespace phocnet

#endif  // PHOCNET_TENSOR_HPP_
