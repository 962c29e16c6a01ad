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

#include "phocnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "phocnet/data.hpp"

namespace phocnet {
namespace {

constexpr double kDegenerateArea = 1e-9;
constexpr double kSnap = 1e-9;

double det3(const std::array<Point, 3>& p) {
  // det [[x0 y0 1] [x1 y1 1] [x2 y2 1]]
  return p[0].x * (p[1].y - p[2].y) - p[0].y * (p[1].x - p[2].x) + (p[1].x * p[2].y - p[2].x * p[1].y);
}

// Solves [x_i y_i 1] * (a b c)^T = r_i by Cramer's rule.
std::array<double, 3> solve_row(const std::array<Point, 3>& p, const std::array<double, 3>& r, double det) {
  const double a = (r[0] * (p[1].y - p[2].y) - p[0].y * (r[1] - r[2]) + (r[1] * p[2].y - r[2] * p[1].y)) / det;
  const double b = (p[0].x * (r[1] - r[2]) - r[0] * (p[1].x - p[2].x) + (p[1].x * r[2] - p[2].x * r[1])) / det;
  const double c = (p[0].x * (p[1].y * r[2] - p[2].y * r[1]) - p[0].y * (p[1].x * r[2] - p[2].x * r[1]) +
                    r[0] * (p[1].x * p[2].y - p[2].x * p[1].y)) /
                   det;
  return {a, b, c};
}

bool collinear(const std::array<Point, 3>& p) { return std::abs(det3(p)) <= kDegenerateArea; }

}  // namespace

AffineTransform AffineTransform::inverse() const {
  const double det = determinant();
  if (!(std::abs(det) > kDegenerateArea)) {
    throw std::invalid_argument("affine transform is not invertible (det = " + std::to_string(det) + ")");
  }
  const double ia = m[4] / det, ib = -m[1] / det, id = -m[3] / det, ie = m[0] / det;
  return {{ia, ib, -(ia * m[2] + ib * m[5]), id, ie, -(id * m[2] + ie * m[5])}};
}

AffineTransform AffineTransform::to_pixels(std::size_t width, std::size_t height) const {
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  return {{m[0], m[1] * w / h, m[2] * w, m[3] * h / w, m[4], m[5] * h}};
}

AffineTransform affine_from_points(const std::array<Point, 3>& src, const std::array<Point, 3>& dst) {
  if (collinear(src)) throw std::invalid_argument("affine_from_points: source points are collinear");
  if (collinear(dst)) throw std::invalid_argument("affine_from_points: destination points are collinear");
  const double det = det3(src);
  const auto top = solve_row(src, {dst[0].x, dst[1].x, dst[2].x}, det);
  const auto bottom = solve_row(src, {dst[0].y, dst[1].y, dst[2].y}, det);
  return {{top[0], top[1], top[2], bottom[0], bottom[1], bottom[2]}};
}

AffineTransform sample_affine(Rng& rng, const AffineSampling& sampling) {
  if (!(sampling.factor_min <= sampling.factor_max) || !(sampling.factor_min > 0.0)) {
    throw std::invalid_argument("sample_affine: factor limits must satisfy 0 < min <= max");
  }
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::array<Point, 3> dst = kAffineAnchors;
    for (auto& p : dst) {
      p.x *= rng.uniform(sampling.factor_min, sampling.factor_max);
      p.y *= rng.uniform(sampling.factor_min, sampling.factor_max);
    }
    if (!collinear(dst)) return affine_from_points(kAffineAnchors, dst);
  }
  throw std::runtime_error("sample_affine: 10 consecutive degenerate draws");
}

Tensor<float> warp_image_pixels(const Tensor<float>& image, const AffineTransform& pixels) {
  const AffineTransform inv = pixels.inverse();
  const std::size_t h = image.height(), w = image.width();
  Tensor<float> out(image.shape());
  const auto read = [&](std::size_t c, long y, long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    return image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      Point s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      if (!std::isfinite(s.x) || !std::isfinite(s.y)) continue;
      // Sub-nanopixel offsets are rounding residue (e.g. an identity built
      // from three points); snapping keeps integer maps exact.
      if (std::abs(s.x - std::round(s.x)) < kSnap) s.x = std::round(s.x);
      if (std::abs(s.y - std::round(s.y)) < kSnap) s.y = std::round(s.y);
      const double fx0 = std::floor(s.x), fy0 = std::floor(s.y);
      if (fx0 < -2.0 || fy0 < -2.0 || fx0 > static_cast<double>(w) || fy0 > static_cast<double>(h)) continue;
      const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
      const double ax = s.x - fx0, ay = s.y - fy0;
      for (std::size_t c = 0; c < image.channels(); ++c) {
        const double v = (1 - ay) * ((1 - ax) * read(c, y0, x0) + ax * read(c, y0, x0 + 1)) +
                         ay * ((1 - ax) * read(c, y0 + 1, x0) + ax * read(c, y0 + 1, x0 + 1));
        out.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Tensor<float> warp_image(const Tensor<float>& image, const AffineTransform& relative) {
  if (image.empty()) throw std::invalid_argument("warp_image: empty image");
  return warp_image_pixels(image, relative.to_pixels(image.width(), image.height()));
}

std::vector<WordSample> balance_augment(std::span<const WordSample> samples, const BalanceOptions& options) {
  if (samples.empty()) throw std::invalid_argument("balance_augment: no samples");
  if (options.target_total < samples.size()) {
    throw std::invalid_argument("balance_augment: target_total " + std::to_string(options.target_total) +
                                " is below the original count " + std::to_string(samples.size()));
  }
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < samples.size(); ++i) classes[samples[i].transcription].push_back(i);

  // Highest level L with sum(max(count, L)) <= target.
  const auto filled = [&](std::size_t level) {
    std::size_t total = 0;
    for (const auto& [_, idx] : classes) total += std::max(idx.size(), level);
    return total;
  };
  std::size_t lo = 0, hi = options.target_total;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (filled(mid) <= options.target_total) lo = mid; else hi = mid - 1;
  }
  std::size_t remainder = options.target_total - filled(lo);

  std::vector<WordSample> out;
  out.reserve(options.target_total);
  for (const auto& [label, idx] : classes) {
    std::size_t quota = std::max(idx.size(), lo);
    if (remainder > 0 && idx.size() <= lo) {
      ++quota;
      --remainder;
    }
    for (std::size_t i : idx) out.push_back(samples[i]);
    for (std::size_t n = idx.size(); n < quota; ++n) {
      const std::size_t k = out.size();
      Rng rng(derive_seed(options.seed, {k}));
      const WordSample& src = samples[idx[rng.below(idx.size())]];
      if (src.image.empty()) throw std::invalid_argument("balance_augment: image of " + src.id + " is not loaded");
      WordSample warped = src;
      warped.id = src.id + "_aug" + std::to_string(k);
      warped.image = warp_image(src.image, sample_affine(rng, options.sampling));
      warped.image_path.clear();
      out.push_back(std::move(warped));
    }
  }
  return out;
}

}  // namespace phocnet
