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

#include "phocnet/phoc.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace phocnet {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

void check_levels(const std::vector<std::size_t>& levels, const char* what) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == 0) throw std::invalid_argument(std::string(what) + " levels must be positive");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw std::invalid_argument(std::string(what) + " levels must be strictly ascending");
  }
}

std::size_t level_sum(const std::vector<std::size_t>& levels) {
  std::size_t s = 0;
  for (std::size_t l : levels) s += l;
  return s;
}

// A span [first, first + span) of n symbols lies in region r of L iff the
// overlap covers at least half of the span. Everything is scaled by n*L so
// the comparison is exact.
bool span_in_region(std::size_t first, std::size_t span, std::size_t n, std::size_t region,
                    std::size_t level) {
  const std::size_t lo = first * level;
  const std::size_t hi = (first + span) * level;
  const std::size_t region_lo = region * n;
  const std::size_t region_hi = (region + 1) * n;
  const std::size_t a = std::max(lo, region_lo);
  const std::size_t b = std::min(hi, region_hi);
  if (b <= a) return false;
  return 2 * (b - a) >= hi - lo;
}

}  // namespace

std::vector<std::string> utf8_symbols(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw std::invalid_argument("alphabet is empty");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const std::string& s = symbols_[i];
    if (s.empty() || utf8_symbols(s).size() != 1)
      throw std::invalid_argument("alphabet symbol '" + s + "' is not a single character");
    if (!index_.emplace(s, i).second)
      throw std::invalid_argument("duplicate alphabet symbol '" + s + "'");
  }
}

std::optional<std::size_t> Alphabet::index_of(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Alphabet build_alphabet(std::string_view preset) {
  if (preset == "latin36") {
    std::vector<std::string> s;
    for (char c = 'a'; c <= 'z'; ++c) s.emplace_back(1, c);
    for (char c = '0'; c <= '9'; ++c) s.emplace_back(1, c);
    return Alphabet(std::move(s));
  }
  throw std::invalid_argument("unknown alphabet preset '" + std::string(preset) + "'");
}

Alphabet build_alphabet(std::vector<std::string> symbols) { return Alphabet(std::move(symbols)); }

Alphabet load_alphabet_file(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].empty())
      throw std::invalid_argument(path.string() + ":" + std::to_string(i + 1) + ": empty symbol");
  return Alphabet(std::move(lines));
}

std::string normalize_transcription(std::string_view raw, const Alphabet& alphabet) {
  std::string out;
  for (std::string sym : utf8_symbols(raw)) {
    if (sym.size() == 1 && sym[0] >= 'A' && sym[0] <= 'Z') sym[0] = static_cast<char>(sym[0] - 'A' + 'a');
    if (alphabet.contains(sym)) out += sym;
  }
  return out;
}

std::vector<std::string> select_bigrams(std::span<const std::string> transcriptions,
                                        std::size_t k, const Alphabet& alphabet) {
  std::map<std::string, std::size_t> counts;
  for (const std::string& t : transcriptions) {
    auto syms = utf8_symbols(t);
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (!alphabet.contains(syms[i]) || !alphabet.contains(syms[i + 1])) continue;
      ++counts[syms[i] + syms[i + 1]];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<std::string> load_bigram_file(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (utf8_symbols(lines[i]).size() != 2)
      throw std::invalid_argument(path.string() + ":" + std::to_string(i + 1) +
                                  ": bigram must have exactly two characters");
  return lines;
}

Interval occupancy(std::size_t k, std::size_t n) {
  if (n == 0 || k >= n)
    throw std::out_of_range("occupancy: position " + std::to_string(k) + " outside word of length " +
                            std::to_string(n));
  return {static_cast<double>(k) / static_cast<double>(n),
          static_cast<double>(k + 1) / static_cast<double>(n)};
}

PhocConfig::PhocConfig(Alphabet alphabet, std::vector<std::size_t> unigram_levels,
                       std::vector<std::string> bigrams, std::vector<std::size_t> bigram_levels)
    : alphabet_(std::move(alphabet)),
      unigram_levels_(std::move(unigram_levels)),
      bigrams_(std::move(bigrams)),
      bigram_levels_(std::move(bigram_levels)) {
  if (unigram_levels_.empty()) throw std::invalid_argument("at least one unigram level is required");
  check_levels(unigram_levels_, "unigram");
  check_levels(bigram_levels_, "bigram");
  if (!bigrams_.empty() && bigram_levels_.empty())
    throw std::invalid_argument("bigrams given without bigram levels");
  for (std::size_t i = 0; i < bigrams_.size(); ++i) {
    auto syms = utf8_symbols(bigrams_[i]);
    if (syms.size() != 2)
      throw std::invalid_argument("bigram '" + bigrams_[i] + "' must have two characters");
    for (const auto& s : syms)
      if (!alphabet_.contains(s))
        throw std::invalid_argument("bigram '" + bigrams_[i] + "' uses a symbol outside the alphabet");
    if (!bigram_index_.emplace(bigrams_[i], i).second)
      throw std::invalid_argument("duplicate bigram '" + bigrams_[i] + "'");
  }
}

std::optional<std::size_t> PhocConfig::bigram_index(std::string_view bigram) const {
  auto it = bigram_index_.find(std::string(bigram));
  if (it == bigram_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PhocConfig::dimension() const {
  std::size_t d = alphabet_.size() * level_sum(unigram_levels_);
  if (!bigrams_.empty()) d += bigrams_.size() * level_sum(bigram_levels_);
  return d;
}

std::string PhocConfig::to_json() const {
  nlohmann::json j;
  j["alphabet"] = alphabet_.symbols();
  j["unigram_levels"] = unigram_levels_;
  j["bigrams"] = bigrams_;
  j["bigram_levels"] = bigram_levels_;
  return j.dump();
}

PhocConfig PhocConfig::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    return PhocConfig(Alphabet(j.at("alphabet").get<std::vector<std::string>>()),
                      j.at("unigram_levels").get<std::vector<std::size_t>>(),
                      j.at("bigrams").get<std::vector<std::string>>(),
                      j.at("bigram_levels").get<std::vector<std::size_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed PHOC config: ") + e.what());
  }
}

std::string PhocConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t phoc_dimension(const PhocConfig& config) { return config.dimension(); }

std::size_t PhocVector::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1.0f));
}

PhocVector encode_phoc(std::string_view transcription, const PhocConfig& config) {
  if (transcription.empty()) throw std::invalid_argument("cannot encode an empty transcription");
  const Alphabet& alphabet = config.alphabet();
  const auto syms = utf8_symbols(transcription);
  const std::size_t n = syms.size();

  std::vector<std::size_t> pos(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto idx = alphabet.index_of(syms[k]);
    if (!idx)
      throw std::invalid_argument("symbol '" + syms[k] + "' of '" + std::string(transcription) +
                                  "' is not in the alphabet");
    pos[k] = *idx;
  }

  PhocVector out;
  out.bits.assign(config.dimension(), 0.0f);
  std::size_t block = 0;
  const std::size_t a = alphabet.size();
  for (std::size_t level : config.unigram_levels()) {
    for (std::size_t r = 0; r < level; ++r, block += a) {
      for (std::size_t k = 0; k < n; ++k)
        if (span_in_region(k, 1, n, r, level)) out.bits[block + pos[k]] = 1.0f;
    }
  }

  const auto& bigrams = config.bigrams();
  if (bigrams.empty()) return out;
  const std::size_t b = bigrams.size();
  std::vector<std::optional<std::size_t>> bigram_at(n > 0 ? n - 1 : 0);
  for (std::size_t k = 0; k + 1 < n; ++k) bigram_at[k] = config.bigram_index(syms[k] + syms[k + 1]);
  for (std::size_t level : config.bigram_levels()) {
    for (std::size_t r = 0; r < level; ++r, block += b) {
      for (std::size_t k = 0; k + 1 < n; ++k)
        if (bigram_at[k] && span_in_region(k, 2, n, r, level)) out.bits[block + *bigram_at[k]] = 1.0f;
    }
  }
  return out;
}

}  // namespace phocnet
