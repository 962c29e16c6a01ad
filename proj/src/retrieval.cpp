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

#include "phocnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace phocnet {

double bray_curtis(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("bray_curtis: length mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("bray_curtis: negative or NaN entry");
    num += std::abs(a - b);
    den += a + b;
  }
  return den == 0.0 ? 0.0 : num / den;
}

double average_precision(std::span<const std::uint8_t> relevance, std::size_t total_relevant) {
  if (total_relevant == 0) throw std::invalid_argument("average_precision: query has no relevant items");
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < relevance.size(); ++k) {
    if (relevance[k] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits > total_relevant) throw std::invalid_argument("average_precision: more hits than total_relevant");
  return sum / static_cast<double>(total_relevant);
}

RankedList rank(std::span<const float> query, std::span<const GalleryEntry> gallery,
                const std::optional<std::string>& exclude_id, std::string query_id) {
  RankedList list{std::move(query_id), {}};
  list.entries.reserve(gallery.size());
  std::set<std::string_view> ids;
  for (const auto& g : gallery) {
    if (!ids.insert(g.id).second) throw std::invalid_argument("rank: duplicate gallery id " + g.id);
    if (exclude_id && g.id == *exclude_id) continue;
    list.entries.push_back({g.id, bray_curtis(query, g.vector)});
  }
  if (list.entries.empty()) throw std::invalid_argument("rank: empty gallery");
  std::stable_sort(list.entries.begin(), list.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  return list;
}

const char* protocol_name(Protocol protocol) { return protocol == Protocol::kQbe ? "qbe" : "qbs"; }

std::string EvalReport::summary() const {
  std::ostringstream out;
  out << "protocol=" << protocol_name(protocol) << " n_queries=" << valid() << " discarded=" << discarded
      << " mAP=" << std::fixed << std::setprecision(6) << mean_average_precision;
  return out.str();
}

void EvalReport::write_tsv(std::ostream& out) const {
  out << "query_id\tclass\trelevant\tap\n";
  out << std::setprecision(9);
  for (const auto& q : queries) {
    out << q.query_id << '\t' << q.transcription << '\t' << q.relevant << '\t' << q.average_precision << '\n';
  }
}

namespace {

std::vector<GalleryEntry> make_gallery(std::span<const PredictedSample> samples) {
  std::vector<GalleryEntry> gallery;
  gallery.reserve(samples.size());
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate sample id " + s.id);
    if (!samples.empty() && s.vector.size() != samples.front().vector.size()) {
      throw std::invalid_argument("sample " + s.id + ": predicted vector length differs");
    }
    gallery.push_back({s.id, s.vector});
  }
  return gallery;
}

double score(const RankedList& list, const std::map<std::string, const PredictedSample*>& by_id,
             const std::string& transcription, std::size_t total_relevant) {
  std::vector<std::uint8_t> relevance(list.entries.size());
  for (std::size_t k = 0; k < list.entries.size(); ++k) {
    relevance[k] = by_id.at(list.entries[k].id)->transcription == transcription ? 1 : 0;
  }
  return average_precision(relevance, total_relevant);
}

void finish(EvalReport& report) {
  if (report.queries.empty()) {
    throw std::invalid_argument(std::string("evaluate_") + protocol_name(report.protocol) + ": no valid queries");
  }
  double sum = 0.0;
  for (const auto& q : report.queries) sum += q.average_precision;
  report.mean_average_precision = sum / static_cast<double>(report.queries.size());
}

}  // namespace

EvalReport evaluate_qbe(std::span<const PredictedSample> samples) {
  if (samples.size() < 2) throw std::invalid_argument("evaluate_qbe: need at least two samples");
  const auto gallery = make_gallery(samples);
  std::map<std::string, std::size_t> class_size;
  std::map<std::string, const PredictedSample*> by_id;
  for (const auto& s : samples) {
    ++class_size[s.transcription];
    by_id[s.id] = &s;
  }
  EvalReport report;
  report.protocol = Protocol::kQbe;
  for (const auto& q : samples) {
    const std::size_t relevant = class_size[q.transcription] - 1;
    if (relevant == 0) {
      ++report.discarded;
      continue;
    }
    const RankedList list = rank(q.vector, gallery, q.id, q.id);
    report.queries.push_back({q.id, q.transcription, relevant, score(list, by_id, q.transcription, relevant)});
  }
  finish(report);
  return report;
}

EvalReport evaluate_qbs(std::span<const PredictedSample> samples, const PhocConfig& config,
                        const QbsOptions& options) {
  if (samples.empty()) throw std::invalid_argument("evaluate_qbs: no samples");
  const auto gallery = make_gallery(samples);
  if (gallery.front().vector.size() != config.dimension()) {
    throw std::invalid_argument("evaluate_qbs: predicted vectors have length " +
                                std::to_string(gallery.front().vector.size()) + " but the PHOC dimension is " +
                                std::to_string(config.dimension()));
  }
  std::map<std::string, std::size_t> class_size;
  std::map<std::string, const PredictedSample*> by_id;
  for (const auto& s : samples) {
    ++class_size[s.transcription];
    by_id[s.id] = &s;
  }
  std::vector<std::string> queries;
  if (options.queries) {
    queries = *options.queries;
  } else {
    for (const auto& [t, _] : class_size) queries.push_back(t);
  }
  EvalReport report;
  report.protocol = Protocol::kQbs;
  std::set<std::string> done;
  for (const auto& q : queries) {
    if (options.exclude.count(q) != 0 || !done.insert(q).second) continue;
    const auto it = class_size.find(q);
    if (it == class_size.end()) {
      ++report.discarded;
      report.warnings.push_back("query '" + q + "' has no relevant items; discarded");
      continue;
    }
    const PhocVector phoc = encode_phoc(q, config);
    const RankedList list = rank(phoc.bits, gallery, std::nullopt, q);
    report.queries.push_back({q, q, it->second, score(list, by_id, q, it->second)});
  }
  if (report.queries.empty() && done.empty()) throw std::invalid_argument("evaluate_qbs: empty query set");
  finish(report);
  return report;
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open word list");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

}  // namespace phocnet
