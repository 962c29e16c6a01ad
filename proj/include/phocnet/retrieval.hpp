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

#ifndef PHOCNET_RETRIEVAL_HPP_
#define PHOCNET_RETRIEVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phocnet/phoc.hpp"

namespace phocnet {

/// sum |u_i - v_i| / sum (u_i + v_i); 0 when both vectors are all zero.
/// Throws std::invalid_argument on length mismatch or negative/NaN entries.
double bray_curtis(std::span<const float> u, std::span<const float> v);

/// Non-interpolated AP: mean of precision@k over the relevant positions k,
/// divided by total_relevant. Throws when total_relevant is 0 or smaller
/// than the number of relevant flags.
double average_precision(std::span<const std::uint8_t> relevance, std::size_t total_relevant);

struct GalleryEntry {
  std::string id;
  std::vector<float> vector;
};

struct RankedEntry {
  std::string id;
  double distance = 0.0;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // ascending distance, ties by id
};

RankedList rank(std::span<const float> query, std::span<const GalleryEntry> gallery,
                const std::optional<std::string>& exclude_id = std::nullopt, std::string query_id = {});

/// A test sample with its predicted attribute vector.
struct PredictedSample {
  std::string id;
  std::string transcription;
  std::vector<float> vector;
};

enum class Protocol { kQbe, kQbs };
const char* protocol_name(Protocol protocol);

struct QueryResult {
  std::string query_id;
  std::string transcription;
  std::size_t relevant = 0;
  double average_precision = 0.0;
};

struct EvalReport {
  Protocol protocol = Protocol::kQbe;
  std::vector<QueryResult> queries;  // valid queries only
  double mean_average_precision = 0.0;
  std::size_t discarded = 0;
  std::vector<std::string> warnings;

  std::size_t valid() const { return queries.size(); }
  /// "protocol<TAB>n_queries<TAB>mAP" style one-liner.
  std::string summary() const;
  /// Header plus one row per query: query_id, class, relevant, AP.
  void write_tsv(std::ostream& out) const;
};

/// Every sample queries the remaining ones; queries whose class occurs once
/// are discarded but stay in the gallery as distractors.
EvalReport evaluate_qbe(std::span<const PredictedSample> samples);

struct QbsOptions {
  std::set<std::string> exclude;                   // never used as queries
  std::optional<std::vector<std::string>> queries;  // default: unique transcriptions
};

/// One query per string, encoded with `config`, ranked against all samples.
/// Queries without relevant items are discarded with a warning.
EvalReport evaluate_qbs(std::span<const PredictedSample> samples, const PhocConfig& config,
                        const QbsOptions& options = {});

/// Word-per-line UTF-8 list; blank lines are ignored.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

}  // namespace phocnet

#endif  // PHOCNET_RETRIEVAL_HPP_
