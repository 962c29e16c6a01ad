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

#ifndef PHOCNET_AUGMENT_HPP_
#define PHOCNET_AUGMENT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phocnet/rng.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

struct WordSample;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 2x3 affine map: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct AffineTransform {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy) { return {{1, 0, dx, 0, 1, dy}}; }

  Point apply(Point p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }
  /// Throws std::invalid_argument when |det| <= 1e-9.
  AffineTransform inverse() const;
  /// Conjugates a map on relative coordinates into pixel coordinates.
  AffineTransform to_pixels(std::size_t width, std::size_t height) const;
};

/// The unique affine map sending src[i] to dst[i]. Throws
/// std::invalid_argument if either triple is (numerically) collinear.
AffineTransform affine_from_points(const std::array<Point, 3>& src, const std::array<Point, 3>& dst);

/// Relative anchor points whose coordinates are randomly rescaled.
inline constexpr std::array<Point, 3> kAffineAnchors = {{{0.5, 0.3}, {0.3, 0.6}, {0.6, 0.6}}};

struct AffineSampling {
  double factor_min = 0.8;
  double factor_max = 1.1;
};

/// Multiplies each of the six anchor coordinates by an independent factor
/// drawn from U[factor_min, factor_max] and returns the map from the anchors
/// to the perturbed points. Degenerate draws are resampled (10 attempts).
AffineTransform sample_affine(Rng& rng, const AffineSampling& sampling = {});

/// Inverse-mapped bilinear warp keeping the canvas size; source reads outside
/// the image return background (0). `relative` acts on coordinates scaled to
/// [0, 1] by the image width and height.
Tensor<float> warp_image(const Tensor<float>& image, const AffineTransform& relative);
Tensor<float> warp_image_pixels(const Tensor<float>& image, const AffineTransform& pixels);

struct BalanceOptions {
  std::size_t target_total = 500000;
  AffineSampling sampling;
  std::uint64_t seed = 42;
};

/// Class-balanced augmentation. Samples are grouped by transcription; each
/// class keeps all of its originals and is topped up with warped copies of
/// randomly chosen originals until the totals are as level as possible
/// (water filling, the remainder going to the lexicographically first
/// classes). Output is ordered by class, originals first. Output sample k
/// draws from its own seeded stream, so the result does not depend on
/// evaluation order.
std::vector<WordSample> balance_augment(std::span<const WordSample> samples,
                                        const BalanceOptions& options);

}  // namespace phocnet

#endif  // PHOCNET_AUGMENT_HPP_
