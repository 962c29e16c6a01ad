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

#include "phocnet/data.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "phocnet/image_io.hpp"

namespace phocnet {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void check_image(const WordSample& s) {
  if (s.image.empty()) return;
  if (s.image.channels() != 1 || s.image.height() == 0 || s.image.width() == 0) {
    throw std::invalid_argument("sample " + s.id + ": image must be 1 x h x w with h, w >= 1");
  }
  for (float v : s.image.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("sample " + s.id + ": pixel value outside [0, 1]");
  }
}

}  // namespace

const char* split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Dataset::Dataset(std::vector<WordSample> samples) : samples_(std::move(samples)) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const WordSample& s = samples_[i];
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate sample id " + s.id);
    if (s.transcription.empty()) throw std::invalid_argument("sample " + s.id + ": empty transcription");
    check_image(s);
    classes_[s.transcription].push_back(i);
  }
}

std::vector<std::string> Dataset::transcriptions() const {
  std::vector<std::string> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.transcription);
  return out;
}

Dataset Dataset::subset(Split split) const {
  std::vector<WordSample> picked;
  for (const auto& s : samples_) {
    if (s.split == split) picked.push_back(s);
  }
  Dataset out(std::move(picked));
  out.warnings = warnings;
  return out;
}

void Dataset::load_images() {
  for (auto& s : samples_) {
    if (!s.image.empty()) continue;
    if (s.image_path.empty()) throw std::invalid_argument("sample " + s.id + " has neither image nor path");
    s.image = load_image(s.image_path);
    check_image(s);
  }
}

Dataset load_manifest(const std::filesystem::path& path, const Alphabet& alphabet, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open manifest");
  const std::string file = path.string();
  const std::filesystem::path base = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  bool has_fold = false;
  bool header_seen = false;
  std::vector<WordSample> samples;
  std::vector<std::string> warnings;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (!header_seen) {
      const bool base_ok = fields.size() >= 3 && fields[0] == "image_path" && fields[1] == "transcription" &&
                           fields[2] == "split";
      if (!base_ok || fields.size() > 4 || (fields.size() == 4 && fields[3] != "fold")) {
        throw ManifestError(file, line_no, "expected header 'image_path<TAB>transcription<TAB>split[<TAB>fold]'");
      }
      has_fold = fields.size() == 4;
      header_seen = true;
      continue;
    }
    const std::size_t expected = has_fold ? 4 : 3;
    if (fields.size() != expected) {
      throw ManifestError(file, line_no,
                          "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ManifestError(file, line_no, "empty image_path");
    WordSample s;
    s.id = fields[0];
    s.image_path = base / fields[0];
    if (fields[2] == "train") {
      s.split = Split::kTrain;
    } else if (fields[2] == "test") {
      s.split = Split::kTest;
    } else {
      throw ManifestError(file, line_no, "unknown split '" + fields[2] + "' (expected train or test)");
    }
    if (has_fold && !fields[3].empty()) {
      std::size_t used = 0;
      unsigned long fold = 0;
      try {
        fold = std::stoul(fields[3], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[3].size() || fields[3][0] == '-' || fold > 1000) {
        throw ManifestError(file, line_no, "invalid fold '" + fields[3] + "'");
      }
      s.fold = fold;
    }
    if (!ids.insert(s.id).second) throw ManifestError(file, line_no, "duplicate image_path " + s.id);
    s.transcription = normalize_transcription(fields[1], alphabet);
    if (s.transcription.empty()) {
      warnings.push_back(file + ":" + std::to_string(line_no) + ": transcription '" + fields[1] +
                         "' is empty after normalization; row dropped");
      continue;
    }
    if (options.load_images) {
      try {
        s.image = load_image(s.image_path);
      } catch (const ImageError& e) {
        throw ManifestError(file, line_no, e.what());
      }
    }
    samples.push_back(std::move(s));
  }
  if (!header_seen) throw ManifestError(file, line_no, "missing header row");
  Dataset dataset(std::move(samples));
  dataset.warnings = std::move(warnings);
  return dataset;
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  bool all_folds = !dataset.empty();
  for (const auto& s : dataset.samples()) all_folds = all_folds && s.fold.has_value();
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  std::ostringstream out;
  out << "image_path\ttranscription\tsplit" << (all_folds ? "\tfold" : "") << '\n';
  for (const auto& s : dataset.samples()) {
    if (s.image_path.empty()) throw std::invalid_argument("write_manifest: sample " + s.id + " has no image path");
    const auto rel = std::filesystem::absolute(s.image_path).lexically_relative(base);
    out << rel.generic_string() << '\t' << s.transcription << '\t' << split_name(s.split);
    if (all_folds) out << '\t' << *s.fold;
    out << '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw std::runtime_error(path.string() + ": cannot open for writing");
  file << out.str();
  if (!file) throw std::runtime_error(path.string() + ": write failed");
}

std::pair<Dataset, Dataset> make_folds(const Dataset& dataset, std::size_t n_folds, std::size_t test_fold) {
  if (n_folds < 2) throw std::invalid_argument("make_folds: n_folds must be at least 2");
  if (test_fold >= n_folds) {
    throw std::out_of_range("make_folds: test_fold " + std::to_string(test_fold) + " not in [0, " +
                            std::to_string(n_folds) + ")");
  }
  bool all_folds = !dataset.empty();
  for (const auto& s : dataset.samples()) all_folds = all_folds && s.fold.has_value();
  std::vector<WordSample> train, test;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    WordSample s = dataset[i];
    const std::size_t fold = all_folds ? *s.fold : i % n_folds;
    if (fold >= n_folds) {
      throw std::invalid_argument("make_folds: sample " + s.id + " has fold " + std::to_string(fold) +
                                  " outside [0, " + std::to_string(n_folds) + ")");
    }
    s.fold = fold;
    (fold == test_fold ? test : train).push_back(std::move(s));
  }
  if (train.empty() || test.empty()) throw std::invalid_argument("make_folds: a side of the split is empty");
  return {Dataset(std::move(train)), Dataset(std::move(test))};
}

}  // namespace phocnet
