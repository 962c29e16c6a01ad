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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "phocnet/phoc.hpp"

using namespace phocnet;

namespace {

std::vector<std::string> letters(const std::string& s) {
  std::vector<std::string> out;
  for (char c : s) out.push_back(std::string(1, c));
  return out;
}

// Indices of set bits inside the (level, region) block.
std::set<std::string> block(const PhocVector& v, const PhocConfig& c, std::size_t level_offset, std::size_t region) {
  std::set<std::string> out;
  const std::size_t base = (level_offset + region) * c.alphabet().size();
  for (std::size_t i = 0; i < c.alphabet().size(); ++i)
    if (v.bits[base + i] != 0.0f) out.insert(c.alphabet().symbol(i));
  return out;
}

}  // namespace

TEST_CASE("latin36 preset") {
  const Alphabet a = build_alphabet("latin36");
  CHECK(a.size() == 36);
  CHECK(a.symbol(0) == "a");
  CHECK(a.symbol(25) == "z");
  CHECK(a.symbol(26) == "0");
  CHECK(a.symbol(35) == "9");
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.index_of(a.symbol(i)) == i);
}

TEST_CASE("explicit alphabets") {
  std::vector<std::string> fifty;
  for (int i = 0; i < 50; ++i) fifty.push_back(std::string(1, static_cast<char>('!' + i)));
  CHECK(build_alphabet(fifty).size() == 50);
  CHECK_THROWS_AS(build_alphabet(std::vector<std::string>{"a", "a"}), std::invalid_argument);
  CHECK_THROWS_AS(build_alphabet(std::vector<std::string>{}), std::invalid_argument);
  CHECK_THROWS_AS(build_alphabet(std::vector<std::string>{"ab"}), std::invalid_argument);
  // Multi-byte code points are single symbols.
  const Alphabet arabic = build_alphabet(std::vector<std::string>{"\xd8\xa8", "\xd8\xaa"});
  CHECK(arabic.size() == 2);
  CHECK(normalize_transcription("\xd8\xa8x\xd8\xaa", arabic) == "\xd8\xa8\xd8\xaa");
}

TEST_CASE("alphabet and bigram files") {
  const auto dir = std::filesystem::temp_directory_path() / "phocnet_test_phoc";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "alpha.txt") << "x\ny\nz\n";
    std::ofstream(dir / "bigrams.txt") << "xy\nzz\n";
  }
  const Alphabet a = load_alphabet_file(dir / "alpha.txt");
  CHECK(a.symbols() == std::vector<std::string>{"x", "y", "z"});
  CHECK(load_bigram_file(dir / "bigrams.txt") == std::vector<std::string>{"xy", "zz"});
  CHECK_THROWS(load_alphabet_file(dir / "missing.txt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("normalize_transcription") {
  const Alphabet a = build_alphabet("latin36");
  CHECK(normalize_transcription("Wash-ington", a) == "washington");
  CHECK(normalize_transcription("1776", a) == "1776");
  CHECK(normalize_transcription("!!", a) == "");
}

TEST_CASE("select_bigrams") {
  const Alphabet a = build_alphabet("latin36");
  const std::vector<std::string> t1 = {"aba", "ab"};
  CHECK(select_bigrams(t1, 1, a) == std::vector<std::string>{"ab"});
  CHECK(select_bigrams(t1, 0, a).empty());
  const std::vector<std::string> t2 = {"ab", "ba"};
  CHECK(select_bigrams(t2, 2, a) == std::vector<std::string>{"ab", "ba"});
  CHECK(select_bigrams(t2, 10, a).size() == 2);
  CHECK(select_bigrams(std::vector<std::string>{}, 5, a).empty());
}

TEST_CASE("occupancy") {
  CHECK(occupancy(0, 2).lo == 0.0);
  CHECK(occupancy(0, 2).hi == 0.5);
  CHECK(occupancy(2, 6).lo == doctest::Approx(1.0 / 3));
  CHECK(occupancy(2, 6).hi == doctest::Approx(0.5));
  CHECK_THROWS_AS(occupancy(3, 3), std::out_of_range);
  CHECK_THROWS_AS(occupancy(0, 0), std::out_of_range);
}

TEST_CASE("phoc dimensions") {
  const Alphabet latin = build_alphabet("latin36");
  CHECK(phoc_dimension(PhocConfig(latin)) == 504);
  std::vector<std::string> bigrams;
  for (int i = 0; i < 50; ++i) bigrams.push_back(latin.symbol(i % 26) + latin.symbol(i / 26));
  CHECK(PhocConfig(latin, {2, 3, 4, 5}, bigrams, {2}).dimension() == 604);
  std::vector<std::string> fifty;
  for (int i = 0; i < 50; ++i) fifty.push_back(std::string(1, static_cast<char>('!' + i)));
  std::vector<std::string> bigrams50;
  for (int i = 0; i < 50; ++i) bigrams50.push_back(fifty[i] + fifty[(i + 1) % 50]);
  CHECK(PhocConfig(build_alphabet(fifty), {2, 3, 4, 5}, bigrams50, {2}).dimension() == 800);
}

TEST_CASE("invalid configs") {
  const Alphabet latin = build_alphabet("latin36");
  CHECK_THROWS_AS(PhocConfig(latin, {}), std::invalid_argument);
  CHECK_THROWS_AS(PhocConfig(latin, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(PhocConfig(latin, {3, 2}), std::invalid_argument);
  CHECK_THROWS_AS(PhocConfig(latin, {2}, {"a"}), std::invalid_argument);
  CHECK_THROWS_AS(PhocConfig(latin, {2}, {"a!"}), std::invalid_argument);
  CHECK_THROWS_AS(PhocConfig(latin, {2}, {"ab", "ab"}), std::invalid_argument);
}

TEST_CASE("encode_phoc hand examples") {
  const PhocConfig c(build_alphabet("latin36"), {2});
  SUBCASE("beyond") {
    const PhocVector v = encode_phoc("beyond", c);
    CHECK(v.size() == 72);
    CHECK(v.count() == 6);
    CHECK(block(v, c, 0, 0) == std::set<std::string>{"b", "e", "y"});
    CHECK(block(v, c, 0, 1) == std::set<std::string>{"o", "n", "d"});
  }
  SUBCASE("single character sits in both halves") {
    const PhocVector v = encode_phoc("a", c);
    CHECK(block(v, c, 0, 0) == std::set<std::string>{"a"});
    CHECK(block(v, c, 0, 1) == std::set<std::string>{"a"});
  }
  SUBCASE("middle of three straddles the midpoint") {
    const PhocVector v = encode_phoc("out", c);
    CHECK(block(v, c, 0, 0) == std::set<std::string>{"o", "u"});
    CHECK(block(v, c, 0, 1) == std::set<std::string>{"u", "t"});
  }
  SUBCASE("single character has empty level-3 blocks") {
    const PhocConfig c3(build_alphabet("latin36"), {3});
    CHECK(encode_phoc("a", c3).count() == 0);
  }
}

TEST_CASE("bigrams span both characters") {
  const PhocConfig c(build_alphabet("latin36"), {2}, {"ab", "bc"}, {2});
  const PhocVector v = encode_phoc("abc", c);
  const std::size_t base = 72;  // after the unigram blocks
  // "ab" spans [0, 2/3]: half of it lies in [0, 1/2] (0.5 >= 1/3), not in [1/2, 1].
  CHECK(v.bits[base + 0] == 1.0f);
  CHECK(v.bits[base + 2] == 0.0f);
  // "bc" spans [1/3, 1]: only the right half holds half of it.
  CHECK(v.bits[base + 1] == 0.0f);
  CHECK(v.bits[base + 3] == 1.0f);
}

TEST_CASE("encode_phoc errors") {
  const PhocConfig c(build_alphabet("latin36"));
  CHECK_THROWS_AS(encode_phoc("", c), std::invalid_argument);
  CHECK_THROWS_AS(encode_phoc("Abc", c), std::invalid_argument);
}

TEST_CASE("matches the brute-force oracle, words up to length 4 over {a,b,c}") {
  const std::vector<char> sym = {'a', 'b', 'c'};
  const std::vector<std::string> bigrams = {"ab", "ca", "bb"};
  const PhocConfig c(build_alphabet(letters("abc")), {2, 3}, bigrams, {2, 3});
  std::vector<std::string> words = {""};
  std::size_t checked = 0;
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::string> next;
    for (const auto& w : words)
      for (char s : sym) next.push_back(w + s);
    for (const auto& w : next) {
      CHECK_MESSAGE(encode_phoc(w, c).bits == oracle::phoc(w, sym, {2, 3}, bigrams, {2, 3}), w);
      ++checked;
    }
    words = next;
  }
  CHECK(checked == 120);
}

TEST_CASE("longer words against the oracle") {
  std::vector<char> sym;
  for (char ch = 'a'; ch <= 'z'; ++ch) sym.push_back(ch);
  for (char ch = '0'; ch <= '9'; ++ch) sym.push_back(ch);
  const std::vector<std::string> bigrams = {"th", "he", "in", "er"};
  const PhocConfig c(build_alphabet("latin36"), {2, 3, 4, 5}, bigrams, {2});
  for (const std::string w : {"the", "weather", "thinner", "x", "hitherto", "washington1776", "inherit"}) {
    CHECK_MESSAGE(encode_phoc(w, c).bits == oracle::phoc(w, sym, {2, 3, 4, 5}, bigrams, {2}), w);
  }
}

TEST_CASE("every character lands in some level-2 region") {
  const PhocConfig c(build_alphabet("latin36"), {2});
  for (const std::string w : {"a", "ab", "abc", "abcdefg", "zyxwvutsrq"}) {
    const PhocVector v = encode_phoc(w, c);
    auto both = block(v, c, 0, 0);
    for (const auto& s : block(v, c, 0, 1)) both.insert(s);
    for (char ch : w) CHECK(both.count(std::string(1, ch)) == 1);
  }
}

TEST_CASE("alphabet permutation permutes bits within each block") {
  const Alphabet fwd = build_alphabet(letters("abcd"));
  const Alphabet rev = build_alphabet(letters("dcba"));
  const PhocConfig cf(fwd, {2, 3}), cr(rev, {2, 3});
  for (const std::string w : {"abcd", "dab", "c", "bbad"}) {
    const PhocVector a = encode_phoc(w, cf), b = encode_phoc(w, cr);
    REQUIRE(a.size() == b.size());
    for (std::size_t blk = 0; blk < a.size() / 4; ++blk)
      for (std::size_t i = 0; i < 4; ++i) CHECK(a.bits[blk * 4 + i] == b.bits[blk * 4 + (3 - i)]);
  }
}

TEST_CASE("config json roundtrip and digest") {
  const PhocConfig c(build_alphabet("latin36"), {2, 3, 4, 5}, {"th", "he"}, {2});
  const PhocConfig back = PhocConfig::from_json(c.to_json());
  CHECK(back == c);
  CHECK(back.digest() == c.digest());
  CHECK(c.digest().size() == 16);
  CHECK(PhocConfig(build_alphabet("latin36")).digest() != c.digest());
  CHECK(c.bigram_index("he") == 1u);
  CHECK_FALSE(c.bigram_index("zz").has_value());
}
