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

#ifndef PHOCNET_MODEL_HPP_
#define PHOCNET_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phocnet/layers.hpp"
#include "phocnet/phoc.hpp"
#include "phocnet/rng.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

struct ConvSpec {
  std::size_t out_channels = 0;
};
struct MaxPoolSpec {};
struct SppSpec {
  std::vector<std::size_t> levels;
};
struct FcSpec {
  std::size_t out = 0;
};
struct DropoutSpec {
  double p = 0.5;
};

using LayerSpec = std::variant<ConvSpec, MaxPoolSpec, SppSpec, FcSpec, DropoutSpec>;

enum class Head { kSigmoid, kSoftmax };

/// Hidden layers of a network. Every conv is followed by a ReLU, as is every
/// listed FC layer; the output FC (width = label dimension) and the head are
/// appended by build_network().
struct ArchitectureSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  Head head = Head::kSigmoid;
};

/// "phocnet-full" or "phocnet-mini".
ArchitectureSpec architecture_preset(std::string_view name, Head head = Head::kSigmoid);

/// Throws std::invalid_argument unless the spec has exactly one SPP layer,
/// only conv/pool layers before it, only FC/dropout layers after it, and
/// positive widths.
void validate_architecture(const ArchitectureSpec& spec);

std::string architecture_to_json(const ArchitectureSpec& spec);
ArchitectureSpec architecture_from_json(std::string_view json);

/// Thrown by forward() in strict mode.
class InputTooSmallError : public std::invalid_argument {
 public:
  InputTooSmallError(Shape3 got, std::size_t minimum)
      : std::invalid_argument("input image " + std::to_string(got.height) + "x" +
                              std::to_string(got.width) + " is below the minimum " +
                              std::to_string(minimum) + "x" + std::to_string(minimum)),
        minimum_(minimum) {}
  std::size_t minimum() const { return minimum_; }

 private:
  std::size_t minimum_;
};

struct ModelMetadata {
  std::optional<PhocConfig> phoc;
  std::vector<std::string> classes;  // softmax head: class index -> transcription
  std::uint64_t iteration = 0;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// One executable step of an assembled network.
struct Op {
  LayerKind kind = LayerKind::kRelu;
  std::size_t param_offset = 0;  // first blob index for conv/fc
  std::vector<std::size_t> levels;
  double dropout = 0.0;

  static Op of(LayerKind kind) {
    Op op;
    op.kind = kind;
    return op;
  }
  friend bool operator==(const Op&, const Op&) = default;
};

template <typename T>
struct ForwardCache {
  Mode mode = Mode::kInfer;
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct ForwardResult {
  Tensor<T> output;  // head applied
  Tensor<T> logits;  // pre-head
  ForwardCache<T> cache;
};

/// Zero-pads an image symmetrically to at least `minimum` in both spatial
/// dimensions (the extra row/column goes to the bottom/right).
template <typename T>
Tensor<T> pad_to_minimum(const Tensor<T>& image, std::size_t minimum) {
  const std::size_t h = std::max(image.height(), minimum);
  const std::size_t w = std::max(image.width(), minimum);
  if (h == image.height() && w == image.width()) return image;
  Tensor<T> out(image.channels(), h, w);
  const std::size_t top = (h - image.height()) / 2;
  const std::size_t left = (w - image.width()) / 2;
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t y = 0; y < image.height(); ++y)
      for (std::size_t x = 0; x < image.width(); ++x) out.at(c, y + top, x + left) = image.at(c, y, x);
  return out;
}

template <typename T>
class Network;

/// Gradient blobs for one batch. Fully connected weight gradients are staged
/// per sample and applied as a single matrix product in finalize().
template <typename T>
class GradientAccumulator {
 public:
  explicit GradientAccumulator(const Network<T>& net) {
    for (const auto& p : net.params()) blobs_.emplace_back(p.shape);
    staged_.resize(blobs_.size());
  }

  std::vector<Blob<T>>& blobs() { return blobs_; }

  void zero() {
    for (auto& b : blobs_) std::fill(b.values.begin(), b.values.end(), T{0});
    for (auto& s : staged_) s = {};
  }

  void stage_fc(std::size_t weight_blob, std::span<const T> grad_out, std::span<const T> input) {
    Staged& s = staged_.at(weight_blob);
    s.grad_out.insert(s.grad_out.end(), grad_out.begin(), grad_out.end());
    s.input.insert(s.input.end(), input.begin(), input.end());
    ++s.rows;
  }

  /// Applies staged products; the bias gradient is the column sum of the
  /// staged output gradients.
  void finalize() {
    for (std::size_t b = 0; b < staged_.size(); ++b) {
      Staged& s = staged_[b];
      if (s.rows == 0) continue;
      Blob<T>& gw = blobs_[b];
      const std::size_t out = gw.dim(0);
      const std::size_t in = gw.dim(1);
      detail::ConstMatrixMap<T> dy(s.grad_out.data(), s.rows, out);
      detail::ConstMatrixMap<T> x(s.input.data(), s.rows, in);
      detail::MatrixMap<T>(gw.values.data(), out, in).noalias() += dy.transpose() * x;
      T* gb = blobs_[b + 1].values.data();
      for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += s.grad_out[r * out + o];
      s = {};
    }
  }

 private:
  struct Staged {
    std::vector<T> grad_out;
    std::vector<T> input;
    std::size_t rows = 0;
  };
  std::vector<Blob<T>> blobs_;
  std::vector<Staged> staged_;
};

template <typename T>
class Network {
 public:
  Network() = default;

  /// Allocates zero-filled parameter and velocity blobs.
  static Network build(const ArchitectureSpec& spec, std::size_t label_dim,
                       std::size_t input_channels = 1) {
    validate_architecture(spec);
    if (label_dim == 0) throw std::invalid_argument("label dimension must be positive");
    Network net;
    net.spec_ = spec;
    net.label_dim_ = label_dim;
    net.input_channels_ = input_channels;

    std::size_t channels = input_channels;
    std::size_t flat = 0;
    std::size_t pools = 0;
    auto add_params = [&](std::vector<std::size_t> wshape, std::size_t bias) {
      Op op;
      op.param_offset = net.params_.size();
      net.params_.emplace_back(std::move(wshape));
      net.params_.emplace_back(std::vector<std::size_t>{bias});
      return op;
    };
    for (const LayerSpec& layer : spec.layers) {
      if (auto* conv = std::get_if<ConvSpec>(&layer)) {
        Op op = add_params({conv->out_channels, channels, 3, 3}, conv->out_channels);
        op.kind = LayerKind::kConv3x3;
        net.ops_.push_back(op);
        net.ops_.push_back(Op::of(LayerKind::kRelu));
        channels = conv->out_channels;
      } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
        net.ops_.push_back(Op::of(LayerKind::kMaxPool2));
        ++pools;
      } else if (auto* spp = std::get_if<SppSpec>(&layer)) {
        Op op = Op::of(LayerKind::kSpp);
        op.levels = spp->levels;
        net.ops_.push_back(op);
        flat = spp_output_length(channels, spp->levels);
        net.min_input_ = *std::max_element(spp->levels.begin(), spp->levels.end()) << pools;
      } else if (auto* fc = std::get_if<FcSpec>(&layer)) {
        Op op = add_params({fc->out, flat}, fc->out);
        op.kind = LayerKind::kFullyConnected;
        net.ops_.push_back(op);
        net.ops_.push_back(Op::of(LayerKind::kRelu));
        flat = fc->out;
      } else if (auto* drop = std::get_if<DropoutSpec>(&layer)) {
        Op op = Op::of(LayerKind::kDropout);
        op.dropout = drop->p;
        net.ops_.push_back(op);
      }
    }
    Op out = add_params({label_dim, flat}, label_dim);
    out.kind = LayerKind::kFullyConnected;
    net.ops_.push_back(out);
    net.ops_.push_back(Op::of(spec.head == Head::kSigmoid ? LayerKind::kSigmoid : LayerKind::kSoftmax));
    for (const auto& p : net.params_) net.velocity_.emplace_back(p.shape);
    return net;
  }

  const ArchitectureSpec& spec() const { return spec_; }
  std::size_t label_dim() const { return label_dim_; }
  std::size_t input_channels() const { return input_channels_; }
  /// Smallest height/width that survives the pooling chain and the SPP.
  std::size_t min_input_size() const { return min_input_; }
  const std::vector<Op>& ops() const { return ops_; }
  Head head() const { return spec_.head; }

  std::vector<Blob<T>>& params() { return params_; }
  const std::vector<Blob<T>>& params() const { return params_; }
  std::vector<Blob<T>>& velocity() { return velocity_; }
  const std::vector<Blob<T>>& velocity() const { return velocity_; }
  ModelMetadata& metadata() { return metadata_; }
  const ModelMetadata& metadata() const { return metadata_; }

  /// Weight blobs have even indices, biases odd ones.
  static bool is_bias(std::size_t blob_index) { return blob_index % 2 == 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  /// Weights ~ U[-sqrt(6/n), sqrt(6/n)] with n the fan-in (variance 2/n);
  /// biases and optimizer state zero.
  void init_params(Rng& rng) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Blob<T>& blob = params_[i];
      if (is_bias(i)) {
        std::fill(blob.values.begin(), blob.values.end(), T{0});
        continue;
      }
      const double fan_in = static_cast<double>(blob.size() / blob.dim(0));
      const double limit = std::sqrt(6.0 / fan_in);
      for (T& v : blob.values) v = static_cast<T>(rng.uniform(-limit, limit));
    }
    for (auto& v : velocity_) std::fill(v.values.begin(), v.values.end(), T{0});
  }

  /// Images below min_input_size() are zero-padded, or rejected with
  /// InputTooSmallError when `strict`. Training mode needs `rng` whenever the
  /// network has dropout.
  ForwardResult<T> forward(const Tensor<T>& image, Mode mode, Rng* rng = nullptr,
                           bool strict = false) const {
    if (image.channels() != input_channels_)
      throw std::invalid_argument("network expects " + std::to_string(input_channels_) +
                                  "-channel input, got " + image.shape_string());
    ForwardResult<T> result;
    result.cache.mode = mode;
    result.cache.layers.reserve(ops_.size());
    Tensor<T> x;
    if (image.height() < min_input_ || image.width() < min_input_) {
      if (strict) throw InputTooSmallError(image.shape(), min_input_);
      x = pad_to_minimum(image, min_input_);
    } else {
      x = image;
    }
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      const Op& op = ops_[i];
      if (i + 1 == ops_.size()) result.logits = x;
      switch (op.kind) {
        case LayerKind::kConv3x3: {
          auto r = conv3x3_forward(x, params_[op.param_offset], params_[op.param_offset + 1]);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kRelu: {
          auto r = relu_forward(x);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kMaxPool2: {
          auto r = maxpool2_forward(x);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kSpp: {
          auto r = spp_forward(x, op.levels);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kFullyConnected: {
          auto r = fc_forward(x, params_[op.param_offset], params_[op.param_offset + 1]);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kDropout: {
          auto r = dropout_forward(x, op.dropout, mode, rng);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kSigmoid: {
          auto r = sigmoid_forward(x);
          x = std::move(r.output);
          result.cache.layers.emplace_back(std::move(r.cache));
          break;
        }
        case LayerKind::kSoftmax: {
          x = softmax_forward(x);
          result.cache.layers.emplace_back(
              SoftmaxCache<T>{{x.values().begin(), x.values().end()}});
          break;
        }
      }
    }
    result.output = std::move(x);
    return result;
  }

  /// Gradient blobs (shaped like params()) for the gradient of the loss with
  /// respect to the pre-head output.
  std::vector<Blob<T>> backward(const ForwardCache<T>& cache, const Tensor<T>& grad_logits) const {
    GradientAccumulator<T> acc(*this);
    backward_accumulate(cache, grad_logits, acc);
    acc.finalize();
    return std::move(acc.blobs());
  }

  /// As backward(), adding into `acc`; call acc.finalize() after the last
  /// sample of a batch.
  void backward_accumulate(const ForwardCache<T>& cache, const Tensor<T>& grad_logits,
                           GradientAccumulator<T>& acc) const {
    if (cache.mode != Mode::kTrain)
      throw std::logic_error("backward requires the cache of a training-mode forward pass");
    if (cache.layers.size() != ops_.size())
      throw std::logic_error("backward: cache was produced by a different network");
    if (acc.blobs().size() != params_.size())
      throw std::logic_error("backward: gradient blob count mismatch");
    if (grad_logits.size() != label_dim_)
      throw std::invalid_argument("backward: loss gradient has length " +
                                  std::to_string(grad_logits.size()) + ", expected " +
                                  std::to_string(label_dim_));
    auto& grads = acc.blobs();
    Tensor<T> g = Tensor<T>::flat(grad_logits.values());
    for (std::size_t i = ops_.size() - 1; i-- > 0;) {
      const Op& op = ops_[i];
      const LayerCache<T>& c = cache.layers[i];
      if (c.index() != static_cast<std::size_t>(op.kind) - 1)
        throw std::logic_error("backward: cache does not match layer " + std::to_string(i));
      const bool need_input = i > 0;
      switch (op.kind) {
        case LayerKind::kConv3x3:
          g = conv3x3_backward(g, std::get<ConvCache<T>>(c), params_[op.param_offset],
                               grads[op.param_offset], grads[op.param_offset + 1], need_input);
          break;
        case LayerKind::kFullyConnected: {
          const auto& fc = std::get<FcCache<T>>(c);
          acc.stage_fc(op.param_offset, g.values(), fc.input);
          g = need_input ? fc_input_gradient(g, fc, params_[op.param_offset]) : Tensor<T>{};
          break;
        }
        case LayerKind::kRelu: g = relu_backward(g, std::get<ReluCache>(c)); break;
        case LayerKind::kMaxPool2: g = maxpool2_backward(g, std::get<MaxPoolCache>(c)); break;
        case LayerKind::kSpp: g = spp_backward(g, std::get<SppCache>(c)); break;
        case LayerKind::kDropout: g = dropout_backward(g, std::get<DropoutCache<T>>(c)); break;
        case LayerKind::kSigmoid: g = sigmoid_backward(g, std::get<SigmoidCache<T>>(c)); break;
        case LayerKind::kSoftmax: g = softmax_backward(g, std::get<SoftmaxCache<T>>(c)); break;
      }
    }
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out;
    out.spec_ = spec_;
    out.label_dim_ = label_dim_;
    out.input_channels_ = input_channels_;
    out.min_input_ = min_input_;
    out.ops_ = ops_;
    out.metadata_ = metadata_;
    for (const auto& p : params_) out.params_.push_back(p.template cast<U>());
    for (const auto& v : velocity_) out.velocity_.push_back(v.template cast<U>());
    return out;
  }

  /// Replaces every dropout probability (used to disable dropout for
  /// gradient checks).
  void set_dropout(double p) {
    for (auto& layer : spec_.layers)
      if (auto* d = std::get_if<DropoutSpec>(&layer)) d->p = p;
    for (auto& op : ops_)
      if (op.kind == LayerKind::kDropout) op.dropout = p;
  }

 private:
  template <typename U>
  friend class Network;

  ArchitectureSpec spec_;
  std::size_t label_dim_ = 0;
  std::size_t input_channels_ = 1;
  std::size_t min_input_ = 1;
  std::vector<Op> ops_;
  std::vector<Blob<T>> params_;
  std::vector<Blob<T>> velocity_;
  ModelMetadata metadata_;
};

using NetworkModel = Network<float>;

inline NetworkModel build_network(const ArchitectureSpec& spec, std::size_t label_dim) {
  return NetworkModel::build(spec, label_dim);
}

// ---------------------------------------------------------------------------
// Model files.

class ModelFileError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch, kBadMetadata };

  ModelFileError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kModelMagic[8] = {'P', 'H', 'O', 'C', 'N', 'E', 'T', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const NetworkModel& model);
NetworkModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const NetworkModel& model, const std::filesystem::path& path);
/// Throws ModelFileError; never returns a partially read model.
NetworkModel load_model(const std::filesystem::path& path);

/// Bit-exact comparison of parameters, optimizer state, and metadata.
bool models_identical(const NetworkModel& a, const NetworkModel& b);

}  // namespace phocnet

#endif  // PHOCNET_MODEL_HPP_
