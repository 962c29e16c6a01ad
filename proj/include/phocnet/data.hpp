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

#ifndef PHOCNET_DATA_HPP_
#define PHOCNET_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phocnet/phoc.hpp"
#include "phocnet/tensor.hpp"

namespace phocnet {

enum class Split { kTrain, kTest };

const char* split_name(Split split);

/// A segmented word image. Pixel values lie in [0, 1] with ink high.
struct WordSample {
  std::string id;
  Tensor<float> image;  // (1, h, w); empty until loaded when ingestion is lazy
  std::filesystem::path image_path;
  std::string transcription;  // normalized, non-empty
  Split split = Split::kTrain;
  std::optional<std::size_t> fold;
};

class Dataset {
 public:
  Dataset() = default;
  /// Throws std::invalid_argument on duplicate ids or empty transcriptions.
  explicit Dataset(std::vector<WordSample> samples);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const WordSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<WordSample>& samples() const { return samples_; }

  /// transcription -> indices of its samples, in sample order.
  const std::map<std::string, std::vector<std::size_t>>& classes() const { return classes_; }
  std::vector<std::string> transcriptions() const;

  Dataset subset(Split split) const;
  /// Loads any image that was deferred at ingestion.
  void load_images();

  /// Non-fatal ingestion diagnostics (e.g. rows dropped by normalization).
  std::vector<std::string> warnings;

 private:
  std::vector<WordSample> samples_;
  std::map<std::string, std::vector<std::size_t>> classes_;
};

struct ManifestOptions {
  bool load_images = true;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a tab-separated manifest with the header
///   image_path  transcription  split  [fold]
/// Image paths are relative to the manifest's directory. Transcriptions are
/// normalized against `alphabet`; rows that normalize to nothing are dropped
/// and recorded in Dataset::warnings.
Dataset load_manifest(const std::filesystem::path& path, const Alphabet& alphabet,
                      const ManifestOptions& options = {});

/// Writes a manifest; image paths are made relative to its directory.
void write_manifest(const Dataset& dataset, const std::filesystem::path& path);

/// Splits into (train, test). Uses each sample's fold when every sample has
/// one, otherwise assigns folds round-robin in sample order.
std::pair<Dataset, Dataset> make_folds(const Dataset& dataset, std::size_t n_folds,
                                       std::size_t test_fold);

}  // namespace phocnet

#endif  // PHOCNET_DATA_HPP_
