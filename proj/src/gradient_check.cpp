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

#include "phocnet/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "phocnet/rng.hpp"
#include "phocnet/train.hpp"

namespace phocnet {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradientCheckResult check_gradient(const std::function<double()>& loss, std::span<double> x,
                                   std::span<const double> analytic, double epsilon) {
  if (x.size() != analytic.size())
    throw std::invalid_argument("check_gradient: analytic gradient has the wrong length");
  GradientCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double plus = loss();
    x[i] = saved - epsilon;
    const double minus = loss();
    x[i] = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double err = relative_error(analytic[i], numeric);
    if (err > result.max_relative_error || result.checked == 0) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
    ++result.checked;
  }
  return result;
}

GradientCheckResult worst_of(const GradientCheckResult& a, const GradientCheckResult& b) {
  GradientCheckResult r = a.max_relative_error >= b.max_relative_error ? a : b;
  r.checked = a.checked + b.checked;
  return r;
}

namespace {

void fill_uniform(std::span<double> v, Rng& rng, double lo, double hi) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

// Distinct values with spacing 0.05 in random order.
void fill_distinct(std::span<double> v, Rng& rng) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(order[i]) - 1.0;
}

void fill_away_from_zero(std::span<double> v, Rng& rng, double margin) {
  for (double& x : v) {
    const double mag = rng.uniform(margin, 1.0);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
}

double project(const Tensor<double>& out, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
  return s;
}

}  // namespace

GradientCheckResult gradient_check(LayerKind kind, Shape3 shape, double epsilon,
                                   std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> input(shape);
  std::vector<Blob<double>> params;
  const std::vector<std::size_t> spp_levels = {1, 2};

  switch (kind) {
    case LayerKind::kConv3x3: {
      const std::size_t out_ch = 2;
      params.emplace_back(std::vector<std::size_t>{out_ch, shape.channels, 3, 3});
      params.emplace_back(std::vector<std::size_t>{out_ch});
      fill_uniform(input.values(), rng, -1, 1);
      break;
    }
    case LayerKind::kFullyConnected: {
      const std::size_t out_n = 3;
      params.emplace_back(std::vector<std::size_t>{out_n, shape.size()});
      params.emplace_back(std::vector<std::size_t>{out_n});
      fill_uniform(input.values(), rng, -1, 1);
      break;
    }
    case LayerKind::kRelu: fill_away_from_zero(input.values(), rng, 10.0 * epsilon); break;
    case LayerKind::kMaxPool2:
    case LayerKind::kSpp: fill_distinct(input.values(), rng); break;
    default: fill_uniform(input.values(), rng, -3, 3); break;
  }
  for (auto& p : params) fill_uniform(p.values, rng, -1, 1);

  Tensor<double> flat_input = kind == LayerKind::kFullyConnected
                                  ? Tensor<double>::flat(input.values())
                                  : input;
  auto run = [&](const Tensor<double>& in) -> std::pair<Tensor<double>, LayerCache<double>> {
    switch (kind) {
      case LayerKind::kConv3x3: {
        auto r = conv3x3_forward(in, params[0], params[1]);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kRelu: {
        auto r = relu_forward(in);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kMaxPool2: {
        auto r = maxpool2_forward(in);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kSpp: {
        auto r = spp_forward(in, spp_levels);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kFullyConnected: {
        auto r = fc_forward(in, params[0], params[1]);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kDropout: {
        // Fixed stream so every evaluation draws the same mask.
        Rng mask_rng(seed ^ 0xd50b);
        auto r = dropout_forward(in, 0.5, Mode::kTrain, &mask_rng);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kSigmoid: {
        auto r = sigmoid_forward(in);
        return {std::move(r.output), std::move(r.cache)};
      }
      case LayerKind::kSoftmax: {
        Tensor<double> y = softmax_forward(in);
        SoftmaxCache<double> c{{y.values().begin(), y.values().end()}};
        return {std::move(y), std::move(c)};
      }
    }
    throw std::logic_error("gradient_check: unknown layer kind");
  };

  auto [out, cache] = run(flat_input);
  std::vector<double> projection(out.size());
  fill_uniform(projection, rng, -1, 1);
  Tensor<double> grad_out = Tensor<double>(out.shape());
  std::copy(projection.begin(), projection.end(), grad_out.data());
  LayerGradients<double> grads = layer_backward<double>(kind, grad_out, cache, params);

  auto loss = [&]() { return project(run(flat_input).first, projection); };
  GradientCheckResult result =
      check_gradient(loss, flat_input.values(), grads.input.values(), epsilon);
  for (std::size_t p = 0; p < params.size(); ++p)
    result = worst_of(result, check_gradient(loss, params[p].values, grads.params[p].values, epsilon));
  return result;
}

GradientCheckResult network_gradient_check(Network<double> net, const Tensor<double>& image,
                                           std::span<const float> target, double epsilon,
                                           std::size_t samples_per_blob, std::uint64_t seed) {
  for (const Op& op : net.ops()) {
    if (op.kind == LayerKind::kDropout && op.dropout != 0.0)
      throw std::invalid_argument("network_gradient_check: dropout must be disabled");
  }
  const double n = static_cast<double>(target.size());
  Rng unused(0);
  const auto loss = [&] {
    return n * bce_loss_with_logits(target, net.forward(image, Mode::kTrain, &unused).logits).loss;
  };
  const auto fwd = net.forward(image, Mode::kTrain, &unused);
  LossResult<double> l = bce_loss_with_logits(target, fwd.logits);
  for (std::size_t i = 0; i < l.grad.size(); ++i) l.grad[i] *= n;
  const auto grads = net.backward(fwd.cache, l.grad);

  Rng rng(seed);
  GradientCheckResult result;
  for (std::size_t b = 0; b < net.params().size(); ++b) {
    std::vector<double>& values = net.params()[b].values;
    std::vector<std::size_t> picks(values.size());
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    if (!net.is_bias(b) && picks.size() > samples_per_blob) {
      rng.shuffle(picks);
      picks.resize(samples_per_blob);
    }
    for (std::size_t i : picks) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = loss();
      values[i] = saved - epsilon;
      const double minus = loss();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = grads[b].values[i];
      const double err = relative_error(analytic, numeric);
      if (err > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = err;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace phocnet
