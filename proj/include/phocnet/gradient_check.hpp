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

#ifndef PHOCNET_GRADIENT_CHECK_HPP_
#define PHOCNET_GRADIENT_CHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "phocnet/layers.hpp"
#include "phocnet/model.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `loss` with respect to
/// every element of `x`. `x` is perturbed in place and restored; `loss` must
/// read from it.
GradientCheckResult check_gradient(const std::function<double()>& loss, std::span<double> x,
                                   std::span<const double> analytic, double epsilon);

/// Merges results, keeping the worst.
GradientCheckResult worst_of(const GradientCheckResult& a, const GradientCheckResult& b);

/// Checks one layer kernel on random data of the given input shape. The loss
/// is a fixed random projection of the layer output; every input element and
/// every parameter is checked. Inputs are generated away from kinks: ReLU
/// inputs satisfy |x| >= 10 * epsilon and pooling inputs are distinct with
/// gaps well above epsilon.
GradientCheckResult gradient_check(LayerKind kind, Shape3 input, double epsilon,
                                   std::uint64_t seed = 1);

/// End-to-end check of a whole network in training mode (dropout must be
/// off). The loss is the summed sigmoid cross entropy of the logits against
/// `target`. Every bias and up to `samples_per_blob` randomly chosen
/// elements of every weight blob are checked.
GradientCheckResult network_gradient_check(Network<double> net, const Tensor<double>& image,
                                           std::span<const float> target, double epsilon,
                                           std::size_t samples_per_blob, std::uint64_t seed = 1);

}  // namespace phocnet

#endif  // PHOCNET_GRADIENT_CHECK_HPP_
