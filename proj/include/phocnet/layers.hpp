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

#ifndef PHOCNET_LAYERS_HPP_
#define PHOCNET_LAYERS_HPP_

// Forward and backward kernels for the layers of the word-spotting network.
//
// Every kernel is a template over the scalar type: training runs in float,
// gradient checks instantiate the same code in double. Backward functions
// accumulate (+=) parameter gradients into caller-owned blobs so a batch can
// be summed without temporaries; layer_backward() is the allocating variant.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "phocnet/rng.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

enum class LayerKind : std::uint32_t {
  kConv3x3 = 1,
  kRelu = 2,
  kMaxPool2 = 3,
  kSpp = 4,
  kFullyConnected = 5,
  kDropout = 6,
  kSigmoid = 7,
  kSoftmax = 8,
};

const char* layer_kind_name(LayerKind kind);

enum class Mode { kTrain, kInfer };

template <typename T>
struct ConvCache {
  Shape3 input;
  std::size_t out_channels = 0;
  std::vector<T> cols;  // (in_channels * 9) x (height * width)
};

struct ReluCache {
  Shape3 shape;
  std::vector<std::uint8_t> active;
};

struct MaxPoolCache {
  Shape3 input;
  Shape3 output;
  std::vector<std::uint32_t> argmax;
};

struct SppCache {
  Shape3 input;
  std::vector<std::size_t> levels;
  std::vector<std::uint32_t> argmax;
};

template <typename T>
struct FcCache {
  std::vector<T> input;
  std::size_t out = 0;
};

template <typename T>
struct DropoutCache {
  Shape3 shape;
  std::vector<T> scale;  // empty in inference mode
};

template <typename T>
struct SigmoidCache {
  Shape3 shape;
  std::vector<T> output;
};

template <typename T>
struct SoftmaxCache {
  std::vector<T> output;
};

// Variant order follows LayerKind numbering.
template <typename T>
using LayerCache = std::variant<ConvCache<T>, ReluCache, MaxPoolCache, SppCache, FcCache<T>,
                                DropoutCache<T>, SigmoidCache<T>, SoftmaxCache<T>>;

template <typename T, typename Cache>
struct LayerOutput {
  Tensor<T> output;
  Cache cache;
};

template <typename T>
struct LayerGradients {
  Tensor<T> input;
  std::vector<Blob<T>> params;
};

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using VectorMap = Eigen::Map<Vector<T>>;
template <typename T>
using ConstVectorMap = Eigen::Map<const Vector<T>>;

inline void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

inline void check_grad_shape(const Shape3& got, const Shape3& expected, const char* layer) {
  if (!(got == expected))
    throw std::logic_error(std::string(layer) + " backward: gradient shape does not match cache");
}

template <typename T>
void accumulate_into(Blob<T>& grad, const std::vector<std::size_t>& shape) {
  if (grad.values.empty()) grad = Blob<T>(shape);
  if (grad.shape != shape) throw std::logic_error("gradient blob shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, one pixel of zero padding.

template <typename T>
LayerOutput<T, ConvCache<T>> conv3x3_forward(const Tensor<T>& input, const Blob<T>& filters,
                                             const Blob<T>& biases) {
  detail::require(filters.shape.size() == 4 && filters.dim(2) == 3 && filters.dim(3) == 3,
                  "conv3x3: filters must have shape (out, in, 3, 3)");
  const std::size_t out_ch = filters.dim(0);
  const std::size_t in_ch = filters.dim(1);
  detail::require(input.channels() == in_ch,
                  "conv3x3: input has " + std::to_string(input.channels()) +
                      " channels, filters expect " + std::to_string(in_ch));
  detail::require(biases.size() == out_ch, "conv3x3: bias count does not match filter count");

  const std::size_t h = input.height();
  const std::size_t w = input.width();
  const std::size_t hw = h * w;
  const std::size_t k = in_ch * 9;

  ConvCache<T> cache{input.shape(), out_ch, std::vector<T>(k * hw, T{0})};
  for (std::size_t c = 0; c < in_ch; ++c) {
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        T* row = cache.cols.data() + ((c * 9) + dy * 3 + dx) * hw;
        const std::size_t x_begin = dx == 0 ? 1 : 0;
        const std::size_t x_end = dx == 2 ? w - 1 : w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h) || x_end <= x_begin) continue;
          const T* src = &input.at(c, static_cast<std::size_t>(sy), x_begin + dx - 1);
          std::memcpy(row + y * w + x_begin, src, (x_end - x_begin) * sizeof(T));
        }
      }
    }
  }

  Tensor<T> out(out_ch, h, w);
  detail::MatrixMap<T> out_m(out.data(), out_ch, hw);
  detail::ConstMatrixMap<T> w_m(filters.values.data(), out_ch, k);
  detail::ConstMatrixMap<T> cols_m(cache.cols.data(), k, hw);
  out_m.noalias() = w_m * cols_m;
  out_m.colwise() += detail::ConstVectorMap<T>(biases.values.data(), out_ch);
  return {std::move(out), std::move(cache)};
}

/// Accumulates filter/bias gradients; returns the input gradient (empty when
/// `input_grad` is false, e.g. for the first layer of a network).
template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& grad_out, const ConvCache<T>& cache,
                           const Blob<T>& filters, Blob<T>& grad_filters, Blob<T>& grad_biases,
                           bool input_grad = true) {
  const Shape3 in = cache.input;
  const std::size_t hw = in.height * in.width;
  const std::size_t k = in.channels * 9;
  const std::size_t out_ch = cache.out_channels;
  detail::check_grad_shape(grad_out.shape(), {out_ch, in.height, in.width}, "conv3x3");
  detail::accumulate_into(grad_filters, filters.shape);
  detail::accumulate_into(grad_biases, {out_ch});

  detail::ConstMatrixMap<T> g(grad_out.data(), out_ch, hw);
  detail::ConstMatrixMap<T> cols_m(cache.cols.data(), k, hw);
  detail::MatrixMap<T> gw(grad_filters.values.data(), out_ch, k);
  gw.noalias() += g * cols_m.transpose();
  // Plain loop: Eigen's vectorised reductions depend on pointer alignment.
  for (std::size_t o = 0; o < out_ch; ++o) {
    T sum{0};
    for (std::size_t i = 0; i < hw; ++i) sum += grad_out[o * hw + i];
    grad_biases.values[o] += sum;
  }

  if (!input_grad) return {};
  detail::ConstMatrixMap<T> w_m(filters.values.data(), out_ch, k);
  detail::RowMatrix<T> dcols = w_m.transpose() * g;

  Tensor<T> grad_in(in);
  const std::size_t h = in.height;
  const std::size_t w = in.width;
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        const T* row = dcols.data() + ((c * 9) + dy * 3 + dx) * hw;
        const std::size_t x_begin = dx == 0 ? 1 : 0;
        const std::size_t x_end = dx == 2 ? w - 1 : w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = &grad_in.at(c, static_cast<std::size_t>(sy), 0);
          for (std::size_t x = x_begin; x < x_end; ++x) dst[x + dx - 1] += row[y * w + x];
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
LayerOutput<T, ReluCache> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  ReluCache cache{input.shape(), std::vector<std::uint8_t>(input.size())};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool on = input[i] > T{0};
    cache.active[i] = on;
    out[i] = on ? input[i] : T{0};
  }
  return {std::move(out), std::move(cache)};
}

/// Gradient is zero at x == 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const ReluCache& cache) {
  detail::check_grad_shape(grad_out.shape(), cache.shape, "relu");
  Tensor<T> grad_in(cache.shape);
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = cache.active[i] ? grad_out[i] : T{0};
  return grad_in;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. A trailing odd row/column is dropped.

template <typename T>
LayerOutput<T, MaxPoolCache> maxpool2_forward(const Tensor<T>& input) {
  detail::require(input.height() >= 2 && input.width() >= 2,
                  "maxpool2: input " + input.shape_string() + " is smaller than 2x2");
  const std::size_t oh = input.height() / 2;
  const std::size_t ow = input.width() / 2;
  Tensor<T> out(input.channels(), oh, ow);
  MaxPoolCache cache{input.shape(), out.shape(), std::vector<std::uint32_t>(out.size())};
  const std::size_t w = input.width();
  std::size_t o = 0;
  for (std::size_t c = 0; c < input.channels(); ++c) {
    const std::size_t base = c * input.plane();
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = base + 2 * y * w + 2 * x;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t idx : cand)
          if (input[idx] > input[best]) best = idx;
        out[o] = input[best];
        cache.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return {std::move(out), std::move(cache)};
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const MaxPoolCache& cache) {
  detail::check_grad_shape(grad_out.shape(), cache.output, "maxpool2");
  Tensor<T> grad_in(cache.input);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[cache.argmax[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Spatial pyramid max pooling.
//
// Level L splits rows into bins [floor(r*h/L), ceil((r+1)*h/L)) and columns
// likewise. Output order is (level, bin row-major, channel); the length is
// channels * sum(L^2) regardless of the input's spatial size.

inline std::size_t spp_output_length(std::size_t channels, std::span<const std::size_t> levels) {
  std::size_t bins = 0;
  for (std::size_t l : levels) bins += l * l;
  return channels * bins;
}

template <typename T>
LayerOutput<T, SppCache> spp_forward(const Tensor<T>& input, std::span<const std::size_t> levels) {
  detail::require(!levels.empty(), "spp: no pyramid levels");
  const std::size_t max_level = *std::max_element(levels.begin(), levels.end());
  detail::require(max_level > 0, "spp: pyramid levels must be positive");
  const std::size_t h = input.height();
  const std::size_t w = input.width();
  detail::require(h >= max_level && w >= max_level,
                  "spp: feature map " + input.shape_string() + " is smaller than pyramid level " +
                      std::to_string(max_level));
  const std::size_t ch = input.channels();
  Tensor<T> out = Tensor<T>::flat(spp_output_length(ch, levels));
  SppCache cache{input.shape(), {levels.begin(), levels.end()},
                 std::vector<std::uint32_t>(out.size())};
  std::size_t o = 0;
  for (std::size_t level : levels) {
    for (std::size_t by = 0; by < level; ++by) {
      const std::size_t y0 = by * h / level;
      const std::size_t y1 = ((by + 1) * h + level - 1) / level;
      for (std::size_t bx = 0; bx < level; ++bx) {
        const std::size_t x0 = bx * w / level;
        const std::size_t x1 = ((bx + 1) * w + level - 1) / level;
        for (std::size_t c = 0; c < ch; ++c, ++o) {
          std::size_t best = (c * h + y0) * w + x0;
          for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) {
              const std::size_t idx = (c * h + y) * w + x;
              if (input[idx] > input[best]) best = idx;
            }
          out[o] = input[best];
          cache.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return {std::move(out), std::move(cache)};
}

template <typename T>
Tensor<T> spp_backward(const Tensor<T>& grad_out, const SppCache& cache) {
  detail::check_grad_shape(grad_out.shape(), {cache.argmax.size(), 1, 1}, "spp");
  Tensor<T> grad_in(cache.input);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[cache.argmax[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Fully connected: out = W x + b, W stored (out, in) row-major.

template <typename T>
LayerOutput<T, FcCache<T>> fc_forward(const Tensor<T>& input, const Blob<T>& weights,
                                      const Blob<T>& biases) {
  detail::require(weights.shape.size() == 2, "fc: weights must be a matrix");
  const std::size_t out_n = weights.dim(0);
  const std::size_t in_n = weights.dim(1);
  detail::require(input.size() == in_n, "fc: input length " + std::to_string(input.size()) +
                                            " does not match weight width " + std::to_string(in_n));
  detail::require(biases.size() == out_n, "fc: bias length does not match output width");
  Tensor<T> out = Tensor<T>::flat(out_n);
  detail::VectorMap<T> y(out.data(), out_n);
  detail::ConstMatrixMap<T> w_m(weights.values.data(), out_n, in_n);
  detail::ConstVectorMap<T> x(input.data(), in_n);
  y.noalias() = w_m * x;
  y += detail::ConstVectorMap<T>(biases.values.data(), out_n);
  return {std::move(out), FcCache<T>{{input.values().begin(), input.values().end()}, out_n}};
}

template <typename T>
Tensor<T> fc_input_gradient(const Tensor<T>& grad_out, const FcCache<T>& cache,
                            const Blob<T>& weights);

template <typename T>
Tensor<T> fc_backward(const Tensor<T>& grad_out, const FcCache<T>& cache, const Blob<T>& weights,
                      Blob<T>& grad_weights, Blob<T>& grad_biases, bool input_grad = true) {
  const std::size_t out_n = cache.out;
  const std::size_t in_n = cache.input.size();
  detail::check_grad_shape(grad_out.shape(), {out_n, 1, 1}, "fc");
  detail::accumulate_into(grad_weights, weights.shape);
  detail::accumulate_into(grad_biases, {out_n});
  detail::ConstVectorMap<T> g(grad_out.data(), out_n);
  detail::ConstVectorMap<T> x(cache.input.data(), in_n);
  detail::MatrixMap<T>(grad_weights.values.data(), out_n, in_n).noalias() += g * x.transpose();
  detail::VectorMap<T>(grad_biases.values.data(), out_n) += g;
  if (!input_grad) return {};
  return fc_input_gradient(grad_out, cache, weights);
}

/// Wᵀ · grad_out, without touching parameter gradients.
template <typename T>
Tensor<T> fc_input_gradient(const Tensor<T>& grad_out, const FcCache<T>& cache,
                            const Blob<T>& weights) {
  const std::size_t out_n = cache.out;
  const std::size_t in_n = cache.input.size();
  detail::check_grad_shape(grad_out.shape(), {out_n, 1, 1}, "fc");
  detail::ConstVectorMap<T> g(grad_out.data(), out_n);
  Tensor<T> grad_in = Tensor<T>::flat(in_n);
  detail::VectorMap<T>(grad_in.data(), in_n).noalias() =
      detail::ConstMatrixMap<T>(weights.values.data(), out_n, in_n).transpose() * g;
  return grad_in;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-p) at training time, so
// inference is the identity.

template <typename T>
LayerOutput<T, DropoutCache<T>> dropout_forward(const Tensor<T>& input, double p, Mode mode,
                                                Rng* rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("dropout: probability " + std::to_string(p) + " outside [0, 1)");
  DropoutCache<T> cache{input.shape(), {}};
  if (mode == Mode::kInfer) return {input, std::move(cache)};
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode requires an rng");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  cache.scale.resize(input.size());
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    cache.scale[i] = rng->uniform() < p ? T{0} : keep_scale;
    out[i] = input[i] * cache.scale[i];
  }
  return {std::move(out), std::move(cache)};
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const DropoutCache<T>& cache) {
  detail::check_grad_shape(grad_out.shape(), cache.shape, "dropout");
  if (cache.scale.empty()) return grad_out;
  Tensor<T> grad_in(cache.shape);
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = grad_out[i] * cache.scale[i];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Sigmoid and softmax heads.

/// Numerically stable logistic function, kept strictly inside (0, 1).
template <typename T>
T sigmoid(T x) {
  T y;
  if (x >= T{0}) {
    y = T{1} / (T{1} + std::exp(-x));
  } else {
    const T e = std::exp(x);
    y = e / (T{1} + e);
  }
  constexpr T lo = std::numeric_limits<T>::denorm_min();
  const T hi = std::nextafter(T{1}, T{0});
  return std::clamp(y, lo, hi);
}

template <typename T>
LayerOutput<T, SigmoidCache<T>> sigmoid_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = sigmoid(input[i]);
  SigmoidCache<T> cache{input.shape(), {out.values().begin(), out.values().end()}};
  return {std::move(out), std::move(cache)};
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const SigmoidCache<T>& cache) {
  detail::check_grad_shape(grad_out.shape(), cache.shape, "sigmoid");
  Tensor<T> grad_in(cache.shape);
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    const T y = cache.output[i];
    grad_in[i] = grad_out[i] * y * (T{1} - y);
  }
  return grad_in;
}

template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& input) {
  detail::require(!input.empty(), "softmax: empty input");
  const T m = *std::max_element(input.values().begin(), input.values().end());
  Tensor<T> out(input.shape());
  T sum{0};
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = std::exp(input[i] - m);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
  return out;
}

/// Jacobian-vector product of softmax given its output.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_out, const SoftmaxCache<T>& cache) {
  detail::check_grad_shape(grad_out.shape(), {cache.output.size(), 1, 1}, "softmax");
  T dot{0};
  for (std::size_t i = 0; i < grad_out.size(); ++i) dot += grad_out[i] * cache.output[i];
  Tensor<T> grad_in = Tensor<T>::flat(grad_out.size());
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = cache.output[i] * (grad_out[i] - dot);
  return grad_in;
}

// ---------------------------------------------------------------------------
// Kind-dispatched backward.

/// `params` holds the layer's parameter blobs (weights then biases) for conv
/// and fc layers, and is empty otherwise. Throws std::logic_error when the
/// cache was produced by a different kind of layer.
template <typename T>
LayerGradients<T> layer_backward(LayerKind kind, const Tensor<T>& grad_out,
                                 const LayerCache<T>& cache, std::span<const Blob<T>> params = {}) {
  const std::size_t expected = static_cast<std::size_t>(kind) - 1;
  if (cache.index() != expected)
    throw std::logic_error(std::string("layer_backward: cache does not belong to a ") +
                           layer_kind_name(kind) + " layer");
  LayerGradients<T> out;
  switch (kind) {
    case LayerKind::kConv3x3:
    case LayerKind::kFullyConnected: {
      if (params.size() != 2) throw std::invalid_argument("layer_backward: expected weights and biases");
      out.params.resize(2);
      out.input = kind == LayerKind::kConv3x3
                      ? conv3x3_backward(grad_out, std::get<ConvCache<T>>(cache), params[0],
                                         out.params[0], out.params[1])
                      : fc_backward(grad_out, std::get<FcCache<T>>(cache), params[0], out.params[0],
                                    out.params[1]);
      break;
    }
    case LayerKind::kRelu: out.input = relu_backward(grad_out, std::get<ReluCache>(cache)); break;
    case LayerKind::kMaxPool2:
      out.input = maxpool2_backward(grad_out, std::get<MaxPoolCache>(cache));
      break;
    case LayerKind::kSpp: out.input = spp_backward(grad_out, std::get<SppCache>(cache)); break;
    case LayerKind::kDropout:
      out.input = dropout_backward(grad_out, std::get<DropoutCache<T>>(cache));
      break;
    case LayerKind::kSigmoid:
      out.input = sigmoid_backward(grad_out, std::get<SigmoidCache<T>>(cache));
      break;
    case LayerKind::kSoftmax:
      out.input = softmax_backward(grad_out, std::get<SoftmaxCache<T>>(cache));
      break;
  }
  return out;
}

inline const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2: return "maxpool2";
    case LayerKind::kSpp: return "spp";
    case LayerKind::kFullyConnected: return "fc";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

}  // namespace phocnet

#endif  // PHOCNET_LAYERS_HPP_
