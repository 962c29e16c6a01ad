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

#ifndef PHOCNET_PIPELINE_HPP_
#define PHOCNET_PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phocnet/data.hpp"
#include "phocnet/model.hpp"
#include "phocnet/phoc.hpp"
#include "phocnet/retrieval.hpp"
#include "phocnet/train.hpp"

namespace phocnet {

/// Sorted unique transcriptions; the softmax head's class order.
std::vector<std::string> class_list(const Dataset& dataset);

/// Builds a freshly initialised model whose metadata carries the label
/// space: the PHOC config for kPhoc, the class list for kSoftmax.
NetworkModel make_model(const std::string& architecture, TrainMode mode, const PhocConfig& phoc,
                        const std::vector<std::string>& classes, std::uint64_t seed);

/// Training targets in the model's label space. Images must be loaded.
std::vector<TrainingExample> make_training_examples(std::span<const WordSample> samples,
                                                    const NetworkModel& model);

/// Inference-mode outputs, one per sample, in sample order.
std::vector<PredictedSample> predict(const NetworkModel& model, std::span<const WordSample> samples,
                                     std::size_t threads = 1);

/// Binary PHOC vectors as predictions (the perfect predictor).
std::vector<PredictedSample> ground_truth_predictions(std::span<const WordSample> samples,
                                                      const PhocConfig& config);

enum class PredictionFormat { kBinary, kTsv };

inline constexpr char kPredictionMagic[8] = {'P', 'H', 'O', 'C', 'P', 'R', 'E', 'D'};

/// Binary: magic, u32 version (1), u32 count, u32 dim, then per sample the
/// u32-length-prefixed id and transcription followed by dim f32 values.
/// TSV: header "id, transcription, vector" with space-separated values.
void write_predictions(std::span<const PredictedSample> predictions, const std::filesystem::path& path,
                       PredictionFormat format);
/// Detects the format from the leading bytes.
std::vector<PredictedSample> read_predictions(const std::filesystem::path& path);

}  // namespace phocnet

#endif  // PHOCNET_PIPELINE_HPP_
