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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "phocnet/augment.hpp"
#include "phocnet/data.hpp"

using namespace phocnet;

namespace {

void check_matrix(const AffineTransform& t, const std::array<double, 6>& want, double tol) {
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(t.m[i] - want[i]) <= tol);
}

Tensor<float> random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(1, h, w);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

// Bilinear sampling at the preimage of each output pixel, computed from the
// 2x2 inverse written out by hand.
Tensor<float> warp_oracle(const Tensor<float>& img, const std::array<double, 6>& m) {
  const double det = m[0] * m[4] - m[1] * m[3];
  const long h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
  auto px = [&](long y, long x) -> double {
    return y < 0 || x < 0 || y >= h || x >= w ? 0.0 : img.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  Tensor<float> out(img.shape());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - m[2], dy = static_cast<double>(y) - m[5];
      const double sx = (m[4] * dx - m[1] * dy) / det, sy = (-m[3] * dx + m[0] * dy) / det;
      const long x0 = static_cast<long>(std::floor(sx)), y0 = static_cast<long>(std::floor(sy));
      const double ax = sx - static_cast<double>(x0), ay = sy - static_cast<double>(y0);
      const double v = (1 - ay) * (1 - ax) * px(y0, x0) + (1 - ay) * ax * px(y0, x0 + 1) +
                       ay * (1 - ax) * px(y0 + 1, x0) + ay * ax * px(y0 + 1, x0 + 1);
      out.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

WordSample sample(const std::string& id, const std::string& word, std::uint64_t seed) {
  WordSample s;
  s.id = id;
  s.transcription = word;
  s.image = random_image(6, 10, seed);
  s.image_path = "/data/" + id + ".png";
  return s;
}

std::map<std::string, std::size_t> histogram(const std::vector<WordSample>& v) {
  std::map<std::string, std::size_t> h;
  for (const auto& s : v) ++h[s.transcription];
  return h;
}

}  // namespace

TEST_CASE("affine_from_points") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::array<Point, 3> src, dst;
    for (auto& p : src) p = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (auto& p : dst) p = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double area_src = (src[1].x - src[0].x) * (src[2].y - src[0].y) - (src[2].x - src[0].x) * (src[1].y - src[0].y);
    const double area_dst = (dst[1].x - dst[0].x) * (dst[2].y - dst[0].y) - (dst[2].x - dst[0].x) * (dst[1].y - dst[0].y);
    if (std::abs(area_src) < 1e-3 || std::abs(area_dst) < 1e-3) continue;
    const AffineTransform t = affine_from_points(src, dst);
    for (int i = 0; i < 3; ++i) {
      const Point q = t.apply(src[i]);
      CHECK(std::abs(q.x - dst[i].x) <= 1e-10);
      CHECK(std::abs(q.y - dst[i].y) <= 1e-10);
    }
    // Determinant equals the ratio of signed areas.
    CHECK(t.determinant() == doctest::Approx(area_dst / area_src).epsilon(1e-9));
  }
  check_matrix(affine_from_points(kAffineAnchors, kAffineAnchors), {1, 0, 0, 0, 1, 0}, 1e-12);
  const std::array<Point, 3> line = {{{0, 0}, {1, 1}, {2, 2}}};
  CHECK_THROWS_AS(affine_from_points(line, kAffineAnchors), std::invalid_argument);
  CHECK_THROWS_AS(affine_from_points(kAffineAnchors, line), std::invalid_argument);
}

TEST_CASE("inverse and pixel conjugation") {
  const AffineTransform t{{1.2, 0.3, -4, -0.1, 0.9, 2.5}};
  const AffineTransform inv = t.inverse();
  for (Point p : {Point{0, 0}, Point{3, -7}, Point{0.25, 11}}) {
    const Point q = inv.apply(t.apply(p));
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
  }
  CHECK_THROWS_AS((AffineTransform{{1, 2, 0, 2, 4, 0}}.inverse()), std::invalid_argument);

  // Pixel map = S * T * S^-1 with S = diag(w, h).
  const double w = 40, h = 12;
  const AffineTransform px = t.to_pixels(40, 12);
  for (Point p : {Point{0, 0}, Point{39, 11}, Point{17.5, 3}}) {
    const Point rel = t.apply({p.x / w, p.y / h});
    const Point q = px.apply(p);
    CHECK(q.x == doctest::Approx(rel.x * w).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(rel.y * h).epsilon(1e-12));
  }
}

TEST_CASE("sample_affine") {
  Rng rng(2);
  SUBCASE("unit factors give the identity") {
    for (int i = 0; i < 20; ++i) check_matrix(sample_affine(rng, {1.0, 1.0}), {1, 0, 0, 0, 1, 0}, 1e-12);
  }
  SUBCASE("constant 0.8 is a scaling about the origin") {
    check_matrix(sample_affine(rng, {0.8, 0.8}), {0.8, 0, 0, 0, 0.8, 0}, 1e-12);
  }
  SUBCASE("anchors land on independently scaled coordinates") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng a(seed), replay(seed);
      const AffineTransform t = sample_affine(a);
      for (const Point& p : kAffineAnchors) {
        const double fx = replay.uniform(0.8, 1.1), fy = replay.uniform(0.8, 1.1);
        const Point q = t.apply(p);
        CHECK(std::abs(q.x - p.x * fx) <= 1e-10);
        CHECK(std::abs(q.y - p.y * fy) <= 1e-10);
      }
    }
  }
  SUBCASE("factors stay in range") {
    for (int i = 0; i < 200; ++i) {
      const AffineTransform t = sample_affine(rng);
      for (const Point& p : kAffineAnchors) {
        const Point q = t.apply(p);
        CHECK(q.x / p.x >= 0.8 - 1e-12);
        CHECK(q.x / p.x <= 1.1 + 1e-12);
        CHECK(q.y / p.y >= 0.8 - 1e-12);
        CHECK(q.y / p.y <= 1.1 + 1e-12);
      }
    }
  }
  SUBCASE("bad limits") {
    CHECK_THROWS_AS(sample_affine(rng, {1.1, 0.8}), std::invalid_argument);
    CHECK_THROWS_AS(sample_affine(rng, {0.0, 1.0}), std::invalid_argument);
  }
}

TEST_CASE("warp_image") {
  const Tensor<float> img = random_image(9, 23, 3);
  CHECK(warp_image(img, AffineTransform::identity()) == img);
  Rng rng(4);
  CHECK(warp_image(img, affine_from_points(kAffineAnchors, kAffineAnchors)) == img);
  CHECK(warp_image(Tensor<float>(1, 9, 23), sample_affine(rng)) == Tensor<float>(1, 9, 23));

  SUBCASE("integer translation") {
    Tensor<float> dot(1, 5, 5);
    dot.at(0, 2, 2) = 1.0f;
    const Tensor<float> moved = warp_image_pixels(dot, AffineTransform::translation(1, 0));
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 5; ++x) CHECK(moved.at(0, y, x) == (y == 2 && x == 3 ? 1.0f : 0.0f));
    // A relative shift of one column on a 5-wide canvas is the same map.
    CHECK(warp_image(dot, AffineTransform::translation(0.2, 0)) == moved);
  }
  SUBCASE("half-pixel translation splits the mass") {
    Tensor<float> dot(1, 3, 4);
    dot.at(0, 1, 1) = 1.0f;
    const Tensor<float> moved = warp_image_pixels(dot, AffineTransform::translation(0.5, 0));
    CHECK(moved.at(0, 1, 1) == 0.5f);
    CHECK(moved.at(0, 1, 2) == 0.5f);
    float sum = 0;
    for (float v : moved.values()) sum += v;
    CHECK(sum == 1.0f);
  }
  SUBCASE("scaling by 0.8") {
    // out(x, y) = in(x / 0.8, y / 0.8); with a ramp in x the value is x / 0.8
    // interpolated linearly.
    Tensor<float> ramp(1, 4, 10);
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 10; ++x) ramp.at(0, y, x) = static_cast<float>(x) / 10.0f;
    const Tensor<float> out = warp_image_pixels(ramp, {{0.8, 0, 0, 0, 0.8, 0}});
    for (std::size_t x = 0; x < 7; ++x)
      CHECK(out.at(0, 0, x) == doctest::Approx(static_cast<double>(x) / 8.0).epsilon(1e-6));
  }
  SUBCASE("matches the bilinear oracle") {
    for (int trial = 0; trial < 30; ++trial) {
      const AffineTransform rel = sample_affine(rng, {0.7, 1.2});
      const AffineTransform px = rel.to_pixels(img.width(), img.height());
      const Tensor<float> got = warp_image(img, rel);
      const Tensor<float> want = warp_oracle(img, px.m);
      REQUIRE(got.shape() == img.shape());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) <= 1e-6f);
        CHECK(got[i] >= 0.0f);
        CHECK(got[i] <= 1.0f);
      }
    }
  }
  SUBCASE("singular map") {
    CHECK_THROWS_AS(warp_image(img, {{1, 1, 0, 1, 1, 0}}), std::invalid_argument);
  }
}

TEST_CASE("balance_augment") {
  BalanceOptions opt;
  opt.seed = 7;

  SUBCASE("two singleton classes to ten") {
    const std::vector<WordSample> in = {sample("a0", "alpha", 1), sample("b0", "beta", 2)};
    opt.target_total = 10;
    const auto out = balance_augment(in, opt);
    REQUIRE(out.size() == 10);
    CHECK(histogram(out) == std::map<std::string, std::size_t>{{"alpha", 5}, {"beta", 5}});
    CHECK(out[0].id == "a0");
    CHECK(out[0].image == in[0].image);
    CHECK(out[5].id == "b0");
    for (std::size_t k : {1, 2, 3, 4}) {
      CHECK(out[k].id == "a0_aug" + std::to_string(k));
      CHECK(out[k].image_path.empty());
      CHECK(out[k].image.shape() == in[0].image.shape());
    }
    CHECK(out[9].id == "b0_aug9");
  }
  SUBCASE("target equal to the count returns the originals") {
    const std::vector<WordSample> in = {sample("x", "b", 1), sample("y", "a", 2), sample("z", "b", 3)};
    opt.target_total = 3;
    const auto out = balance_augment(in, opt);
    REQUIRE(out.size() == 3);
    CHECK(out[0].id == "y");
    CHECK(out[1].id == "x");
    CHECK(out[2].id == "z");
    for (const auto& s : out) CHECK_FALSE(s.image_path.empty());
  }
  SUBCASE("flat histogram with remainder to the first classes") {
    std::vector<WordSample> in;
    for (int c = 0; c < 3; ++c) in.push_back(sample("s" + std::to_string(c), std::string(1, static_cast<char>('c' - c)), c));
    opt.target_total = 11;
    const auto h = histogram(balance_augment(in, opt));
    CHECK(h == std::map<std::string, std::size_t>{{"a", 4}, {"b", 4}, {"c", 3}});
  }
  SUBCASE("counts differ by at most one whenever no class exceeds the level") {
    for (std::size_t classes = 1; classes <= 6; ++classes)
      for (std::size_t target : {classes * 3, classes * 3 + 1, 23 * classes + classes - 1}) {
        std::vector<WordSample> in;
        for (std::size_t c = 0; c < classes; ++c)
          for (std::size_t j = 0; j <= c % 3; ++j)
            in.push_back(sample("w" + std::to_string(c) + "_" + std::to_string(j), "w" + std::to_string(c), c * 10 + j));
        opt.target_total = target;
        const auto out = balance_augment(in, opt);
        CHECK(out.size() == target);
        std::size_t lo = target, hi = 0;
        for (const auto& [_, n] : histogram(out)) {
          lo = std::min(lo, n);
          hi = std::max(hi, n);
        }
        CHECK(hi - lo <= 1);
      }
  }
  SUBCASE("large classes keep every original") {
    std::vector<WordSample> in;
    for (int j = 0; j < 7; ++j) in.push_back(sample("big" + std::to_string(j), "big", j));
    in.push_back(sample("s", "small", 99));
    opt.target_total = 10;
    const auto h = histogram(balance_augment(in, opt));
    CHECK(h.at("big") == 7);
    CHECK(h.at("small") == 3);
  }
  SUBCASE("warped copies keep their source label and come from it") {
    std::vector<WordSample> in;
    for (int j = 0; j < 3; ++j) in.push_back(sample("p" + std::to_string(j), "pq", j));
    in.push_back(sample("r", "rs", 9));
    opt.target_total = 40;
    const auto out = balance_augment(in, opt);
    for (const auto& s : out) {
      const std::string src = s.id.substr(0, s.id.find("_aug"));
      bool found = false;
      for (const auto& o : in)
        if (o.id == src) {
          found = true;
          CHECK(o.transcription == s.transcription);
        }
      CHECK(found);
    }
  }
  SUBCASE("deterministic in the seed") {
    const std::vector<WordSample> in = {sample("a", "x", 1), sample("b", "y", 2), sample("c", "y", 3)};
    opt.target_total = 20;
    const auto a = balance_augment(in, opt), b = balance_augment(in, opt);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].image == b[i].image);
    }
    opt.seed = 8;
    const auto c = balance_augment(in, opt);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs = differs || !(a[i].image == c[i].image);
    CHECK(differs);
  }
  SUBCASE("errors") {
    const std::vector<WordSample> in = {sample("a", "x", 1), sample("b", "y", 2)};
    opt.target_total = 1;
    CHECK_THROWS_AS(balance_augment(in, opt), std::invalid_argument);
    opt.target_total = 5;
    CHECK_THROWS_AS(balance_augment(std::span<const WordSample>{}, opt), std::invalid_argument);
    std::vector<WordSample> unloaded = in;
    unloaded[0].image = {};
    CHECK_THROWS_AS(balance_augment(unloaded, opt), std::invalid_argument);
  }
}
