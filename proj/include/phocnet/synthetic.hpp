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

#ifndef PHOCNET_SYNTHETIC_HPP_
#define PHOCNET_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phocnet/augment.hpp"
#include "phocnet/data.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

struct SynthStyle {
  bool variation = true;
  std::uint64_t seed = 42;
  AffineSampling sampling;
};

inline constexpr std::size_t kGlyphWidth = 5;
inline constexpr std::size_t kGlyphHeight = 7;
inline constexpr std::size_t kGlyphMargin = 2;

/// Renders `word` (over a-z, 0-9) with built-in 5x7 glyphs: a 2-pixel
/// margin, one blank column after each glyph, giving an 11 x (2 + 6n)
/// canvas. With variation on, the canvas is warped by a random affine map
/// drawn from a stream seeded by style.seed.
Tensor<float> render_synthetic(std::string_view word, const SynthStyle& style = {});

struct SyntheticOptions {
  std::size_t samples_per_class = 10;
  double train_ratio = 0.7;
  std::uint64_t seed = 42;
  bool variation = true;
  AffineSampling sampling;
};

/// `count` distinct lowercase words with lengths in [min_len, max_len],
/// drawn from a stream seeded by `seed`.
std::vector<std::string> random_words(std::size_t count, std::size_t min_len, std::size_t max_len,
                                      std::uint64_t seed);

/// Renders samples_per_class images per word, sends the first
/// round(train_ratio * samples_per_class) of each class to the training
/// split, and writes PGM images plus manifest.tsv under `out_dir`.
Dataset build_synthetic_dataset(const std::vector<std::string>& words,
                                const SyntheticOptions& options,
                                const std::filesystem::path& out_dir);

}  // namespace phocnet

#endif  // PHOCNET_SYNTHETIC_HPP_
