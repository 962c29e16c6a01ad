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

#ifndef PHOCNET_TRAIN_HPP_
#define PHOCNET_TRAIN_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phocnet/layers.hpp"
#include "phocnet/model.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

// ---------------------------------------------------------------------------
// Losses. Both follow the binary cross entropy
//   l(y, yhat) = -(1/n) * sum_i [y_i log yhat_i + (1 - y_i) log(1 - yhat_i)]
// and return the gradient with respect to the pre-head output o.

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Diagnostic form on probabilities; yhat is clamped to [1e-12, 1 - 1e-12]
/// before the logs. Gradient w.r.t. o (through the sigmoid) is (yhat - y)/n.
template <typename T>
LossResult<T> bce_loss(std::span<const float> y, const Tensor<T>& y_hat) {
  if (y.size() != y_hat.size())
    throw std::invalid_argument("bce_loss: label length " + std::to_string(y.size()) +
                                " != prediction length " + std::to_string(y_hat.size()));
  const double n = static_cast<double>(y.size());
  LossResult<T> r{0.0, Tensor<T>::flat(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(static_cast<double>(y_hat[i]), 1e-12, 1.0 - 1e-12);
    r.loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
    r.grad[i] = static_cast<T>((static_cast<double>(y_hat[i]) - y[i]) / n);
  }
  r.loss /= n;
  return r;
}

/// Fused sigmoid + BCE on logits (no clamping needed).
template <typename T>
LossResult<T> bce_loss_with_logits(std::span<const float> y, const Tensor<T>& logits) {
  if (y.size() != logits.size())
    throw std::invalid_argument("bce_loss: label length " + std::to_string(y.size()) +
                                " != output length " + std::to_string(logits.size()));
  const double n = static_cast<double>(y.size());
  LossResult<T> r{0.0, Tensor<T>::flat(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double o = static_cast<double>(logits[i]);
    // -[y log s(o) + (1-y) log(1-s(o))] = max(o,0) - o*y + log(1 + e^-|o|)
    r.loss += std::max(o, 0.0) - o * y[i] + std::log1p(std::exp(-std::abs(o)));
    r.grad[i] = static_cast<T>((sigmoid(o) - y[i]) / n);
  }
  r.loss /= n;
  return r;
}

/// Softmax followed by the binary cross entropy above against a one-hot
/// label, evaluated in a numerically stable fused form.
template <typename T>
LossResult<T> softmax_xent_loss(std::size_t class_index, const Tensor<T>& logits) {
  const std::size_t n = logits.size();
  if (class_index >= n)
    throw std::out_of_range("softmax_xent_loss: class " + std::to_string(class_index) +
                            " outside " + std::to_string(n) + " outputs");
  const double dn = static_cast<double>(n);
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, static_cast<double>(logits[i]));
  std::vector<double> e(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += e[i] = std::exp(static_cast<double>(logits[i]) - m);
  std::vector<double> p(n), log_q(n), q(n);
  // At most one class has p > 1/2; its complement is summed directly.
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = e[i] / z;
    if (p[i] <= 0.5) {
      q[i] = 1.0 - p[i];
    } else {
      double rest = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) rest += e[j];
      q[i] = rest / z;
    }
    log_q[i] = std::log(q[i]);
  }
  double loss = -(static_cast<double>(logits[class_index]) - m - std::log(z));
  std::vector<double> r(n, 0.0);
  double big = 0.0;
  std::size_t big_at = n;
  double r_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == class_index) continue;
    loss -= log_q[i];
    r[i] = p[i] / q[i];
    r_sum += r[i];
    if (r[i] > big) {
      big = r[i];
      big_at = i;
    }
  }
  LossResult<T> out{loss / dn, Tensor<T>::flat(n)};
  // d/do_c = -(1/n) (1 - p_c (1 - R)),  d/do_j = (1/n) p_j (2 - R_{-j}),
  // with R = sum_{i != c} p_i / (1 - p_i) and R_{-j} = R - r_j.
  double r_without_big = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (i != class_index && i != big_at) r_without_big += r[i];
  for (std::size_t j = 0; j < n; ++j) {
    double g;
    if (j == class_index) {
      g = -(1.0 - p[j] * (1.0 - r_sum)) / dn;
    } else {
      const double r_minus = j == big_at ? r_without_big : r_sum - r[j];
      g = p[j] * (2.0 - r_minus) / dn;
    }
    out.grad[j] = static_cast<T>(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule.

/// v <- momentum * v - lr * (grad + weight_decay * param); param <- param + v.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr,
              double momentum, double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw std::invalid_argument("sgd_step: parameter, gradient and velocity sizes differ");
  const T m = static_cast<T>(momentum);
  const T rate = static_cast<T>(lr);
  const T wd = static_cast<T>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] - rate * (grads[i] + wd * params[i]);
    params[i] += velocity[i];
  }
}

enum class TrainMode { kPhoc, kSoftmax };

/// How the per-sample loss gradient is scaled: kMean uses the 1/n of the
/// loss definition, kSum drops it (per-sample sum over outputs, the usual
/// sigmoid cross-entropy layer convention). Logged losses always use 1/n.
enum class LossNormalization { kMean, kSum };

struct TrainConfig {
  std::size_t batch_size = 10;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  double base_lr = 1e-4;
  std::size_t total_iterations = 80000;
  std::size_t lr_drop_iteration = 70000;
  double lr_drop_factor = 10.0;
  std::uint64_t seed = 42;
  TrainMode mode = TrainMode::kPhoc;
  LossNormalization loss_normalization = LossNormalization::kSum;
  std::size_t log_every = 100;
  std::size_t threads = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Longer schedule for the softmax baseline: 500000 iterations, drop at
/// 250000.
TrainConfig softmax_preset(TrainConfig base = {});

/// key=value lines; '#' starts a comment. Unknown keys are an error.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string format_train_config(const TrainConfig& config);

/// base_lr before lr_drop_iteration, base_lr / lr_drop_factor from it on.
double lr_at(std::size_t iteration, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Training loop.

struct TrainingExample {
  Tensor<float> image;
  std::vector<float> target;    // PHOC label (phoc mode)
  std::size_t class_index = 0;  // softmax mode
};

struct TrainLogRecord {
  std::size_t iteration = 0;  // zero-based index of the last iteration in the window
  double loss = 0.0;          // mean batch loss over the window since the previous record
  double lr = 0.0;
  double elapsed_seconds = 0.0;
};

struct EvalSnapshot {
  std::size_t iteration = 0;
  double value = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
  std::vector<EvalSnapshot> snapshots;

  /// iteration, loss, lr, elapsed_seconds
  void write_tsv(std::ostream& out) const;
  void write_tsv(const std::filesystem::path& path) const;
};

struct TrainCallbacks {
  std::function<void(const TrainLogRecord&)> on_log;
  /// Called every `eval_every` iterations (0 disables); the result is stored
  /// as a snapshot.
  std::function<double(const NetworkModel&, std::size_t iteration)> evaluate;
  std::size_t eval_every = 0;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  explicit TrainingDivergedError(std::size_t iteration)
      : std::runtime_error("loss became non-finite at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Runs from model.metadata().iteration up to config.total_iterations. The
/// final parameters are a pure function of (data, initial model, config) for
/// a fixed thread count.
TrainLog train(std::span<const TrainingExample> data, NetworkModel& model, const TrainConfig& config,
               const TrainCallbacks& callbacks = {});

/// Mean per-sample loss over `data` with inference-mode forward passes.
double evaluate_loss(std::span<const TrainingExample> data, const NetworkModel& model,
                     TrainMode mode);

}  // namespace phocnet

#endif  // PHOCNET_TRAIN_HPP_
