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

#ifndef PHOCNET_PHOC_HPP_
#define PHOCNET_PHOC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phocnet {

/// Splits a UTF-8 string into code points, one string per code point.
/// Invalid lead bytes are passed through as single-byte symbols.
std::vector<std::string> utf8_symbols(std::string_view text);

/// Ordered set of unigram symbols (one code point each).
class Alphabet {
 public:
  /// Throws std::invalid_argument on an empty list, a duplicate, or a
  /// symbol that is not exactly one code point.
  explicit Alphabet(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
  std::optional<std::size_t> index_of(std::string_view symbol) const;
  bool contains(std::string_view symbol) const { return index_of(symbol).has_value(); }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// "latin36" (a..z then 0..9) or a comma-free explicit symbol list.
Alphabet build_alphabet(std::string_view preset);
Alphabet build_alphabet(std::vector<std::string> symbols);

/// One symbol per line, order significant. Blank lines are an error.
Alphabet load_alphabet_file(const std::filesystem::path& path);

/// Lower-cases ASCII letters and drops every symbol not in the alphabet.
std::string normalize_transcription(std::string_view raw, const Alphabet& alphabet);

/// The k most frequent adjacent symbol pairs (both in the alphabet), ties
/// broken by byte-wise lexicographic order of the pair.
std::vector<std::string> select_bigrams(std::span<const std::string> transcriptions, std::size_t k,
                                        const Alphabet& alphabet);

std::vector<std::string> load_bigram_file(const std::filesystem::path& path);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

/// Normalized extent [k/n, (k+1)/n] of the k-th of n symbols.
Interval occupancy(std::size_t k, std::size_t n);

class PhocConfig {
 public:
  /// Defaults: levels {2,3,4,5}, no bigrams, bigram levels {2}.
  explicit PhocConfig(Alphabet alphabet, std::vector<std::size_t> unigram_levels = {2, 3, 4, 5},
                      std::vector<std::string> bigrams = {},
                      std::vector<std::size_t> bigram_levels = {2});

  const Alphabet& alphabet() const { return alphabet_; }
  const std::vector<std::size_t>& unigram_levels() const { return unigram_levels_; }
  const std::vector<std::string>& bigrams() const { return bigrams_; }
  const std::vector<std::size_t>& bigram_levels() const { return bigram_levels_; }
  std::optional<std::size_t> bigram_index(std::string_view bigram) const;

  std::size_t dimension() const;

  /// Canonical text form; also the input of digest().
  std::string to_json() const;
  static PhocConfig from_json(std::string_view json);
  /// 64-bit FNV-1a of to_json(), as 16 hex digits.
  std::string digest() const;

  friend bool operator==(const PhocConfig& a, const PhocConfig& b) {
    return a.alphabet_ == b.alphabet_ && a.unigram_levels_ == b.unigram_levels_ &&
           a.bigrams_ == b.bigrams_ && a.bigram_levels_ == b.bigram_levels_;
  }

 private:
  Alphabet alphabet_;
  std::vector<std::size_t> unigram_levels_;
  std::vector<std::string> bigrams_;
  std::vector<std::size_t> bigram_levels_;
  std::unordered_map<std::string, std::size_t> bigram_index_;
};

std::size_t phoc_dimension(const PhocConfig& config);

/// Binary attribute vector. Layout: unigram blocks ordered by (level, region,
/// alphabet position), then bigram blocks ordered the same way.
struct PhocVector {
  std::vector<float> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  friend bool operator==(const PhocVector&, const PhocVector&) = default;
};

/// Throws std::invalid_argument on an empty transcription or a symbol outside
/// the alphabet (normalize first).
PhocVector encode_phoc(std::string_view transcription, const PhocConfig& config);

}  // namespace phocnet

#endif  // PHOCNET_PHOC_HPP_
