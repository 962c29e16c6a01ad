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

#include "phocnet/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "phocnet/image_io.hpp"

namespace phocnet {
namespace {

using Glyph = std::array<const char*, kGlyphHeight>;

// Rows top to bottom, '#' is ink. Letters a-z then digits 0-9.
constexpr std::array<Glyph, 36> kGlyphs = {{
    {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
    {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},
    {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},
    {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."},
    {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},
    {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},
    {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"},
    {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
    {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},
    {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},
    {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},
    {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},
    {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},
    {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"},
    {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
    {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},
    {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},
    {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},
    {".####", "#....", "#....", ".###.", "....#", "....#", "####."},
    {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},
    {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
    {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},
    {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."},
    {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},
    {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},
    {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},
    {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},
    {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."},
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},
}};

const Glyph& glyph_for(char c) {
  if (c >= 'a' && c <= 'z') return kGlyphs[static_cast<std::size_t>(c - 'a')];
  if (c >= '0' && c <= '9') return kGlyphs[26 + static_cast<std::size_t>(c - '0')];
  throw std::invalid_argument(std::string("render_synthetic: no glyph for character '") + c + "'");
}

}  // namespace

Tensor<float> render_synthetic(std::string_view word, const SynthStyle& style) {
  if (word.empty()) throw std::invalid_argument("render_synthetic: empty word");
  const std::size_t pitch = kGlyphWidth + 1;
  Tensor<float> canvas(1, kGlyphHeight + 2 * kGlyphMargin, kGlyphMargin + pitch * word.size());
  for (std::size_t k = 0; k < word.size(); ++k) {
    const Glyph& g = glyph_for(word[k]);
    for (std::size_t y = 0; y < kGlyphHeight; ++y) {
      for (std::size_t x = 0; x < kGlyphWidth; ++x) {
        if (g[y][x] == '#') canvas.at(0, kGlyphMargin + y, kGlyphMargin + pitch * k + x) = 1.0f;
      }
    }
  }
  if (!style.variation) return canvas;
  Rng rng(derive_seed(style.seed, {0x5791}));
  return warp_image(canvas, sample_affine(rng, style.sampling));
}

std::vector<std::string> random_words(std::size_t count, std::size_t min_len, std::size_t max_len,
                                      std::uint64_t seed) {
  if (min_len == 0 || min_len > max_len) throw std::invalid_argument("random_words: need 1 <= min_len <= max_len");
  double capacity = 0.0;
  for (std::size_t len = min_len; len <= max_len && capacity < 1e18; ++len) capacity += std::pow(26.0, len);
  if (static_cast<double>(count) > capacity / 2) throw std::invalid_argument("random_words: too many words for the length range");
  Rng rng(derive_seed(seed, {0x3f0d}));
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w(min_len + rng.below(max_len - min_len + 1), 'a');
    for (char& c : w) c = static_cast<char>('a' + rng.below(26));
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

Dataset build_synthetic_dataset(const std::vector<std::string>& words, const SyntheticOptions& options,
                                const std::filesystem::path& out_dir) {
  if (words.empty()) throw std::invalid_argument("build_synthetic_dataset: empty word list");
  if (options.samples_per_class < 2) {
    throw std::invalid_argument("build_synthetic_dataset: samples_per_class must be at least 2");
  }
  if (!(options.train_ratio >= 0.0 && options.train_ratio <= 1.0)) {
    throw std::invalid_argument("build_synthetic_dataset: train_ratio must lie in [0, 1]");
  }
  std::set<std::string> seen;
  for (const auto& w : words) {
    if (!seen.insert(w).second) throw std::invalid_argument("build_synthetic_dataset: duplicate word '" + w + "'");
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(options.train_ratio * static_cast<double>(options.samples_per_class)));

  const std::filesystem::path image_dir = out_dir / "images";
  std::filesystem::create_directories(image_dir);
  std::vector<WordSample> samples;
  samples.reserve(words.size() * options.samples_per_class);
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    for (std::size_t j = 0; j < options.samples_per_class; ++j) {
      SynthStyle style{options.variation, derive_seed(options.seed, {wi, j}), options.sampling};
      const std::string name = words[wi] + "_" + std::to_string(j) + ".pgm";
      const auto bytes = encode_pgm(render_synthetic(words[wi], style));
      WordSample s;
      s.id = "images/" + name;
      s.image_path = image_dir / name;
      s.image = decode_image(bytes, s.id);  // keep exactly what is on disk
      s.transcription = words[wi];
      s.split = j < n_train ? Split::kTrain : Split::kTest;
      std::ofstream out(s.image_path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw std::runtime_error(s.image_path.string() + ": write failed");
      samples.push_back(std::move(s));
    }
  }
  Dataset dataset(std::move(samples));
  write_manifest(dataset, out_dir / "manifest.tsv");
  return dataset;
}

}  // namespace phocnet
