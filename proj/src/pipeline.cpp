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

#include "phocnet/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace phocnet {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error(name_ + ": truncated prediction file");
  }
  std::span<const std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::vector<PredictedSample> parse_tsv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<PredictedSample> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = name + ":" + std::to_string(line_no) + ": ";
    if (!header) {
      if (line != "id\ttranscription\tvector") throw std::runtime_error(where + "expected prediction TSV header");
      header = true;
      continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::runtime_error(where + "expected 3 tab-separated fields");
    PredictedSample s{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), {}};
    const char* p = line.data() + t2 + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw std::runtime_error(where + "malformed vector value");
      s.vector.push_back(v);
      p = next;
    }
    if (!out.empty() && s.vector.size() != out.front().vector.size()) {
      throw std::runtime_error(where + "vector length differs from the first row");
    }
    out.push_back(std::move(s));
  }
  if (!header) throw std::runtime_error(name + ": empty prediction file");
  return out;
}

}  // namespace

std::vector<std::string> class_list(const Dataset& dataset) {
  std::vector<std::string> out;
  for (const auto& [t, _] : dataset.classes()) out.push_back(t);
  return out;
}

NetworkModel make_model(const std::string& architecture, TrainMode mode, const PhocConfig& phoc,
                        const std::vector<std::string>& classes, std::uint64_t seed) {
  const Head head = mode == TrainMode::kPhoc ? Head::kSigmoid : Head::kSoftmax;
  if (mode == TrainMode::kSoftmax && classes.size() < 2) {
    throw std::invalid_argument("softmax model needs at least two classes");
  }
  const std::size_t dim = mode == TrainMode::kPhoc ? phoc.dimension() : classes.size();
  NetworkModel model = build_network(architecture_preset(architecture, head), dim);
  Rng rng(derive_seed(seed, {0x1417}));
  model.init_params(rng);
  model.metadata().phoc = phoc;
  if (mode == TrainMode::kSoftmax) model.metadata().classes = classes;
  return model;
}

std::vector<TrainingExample> make_training_examples(std::span<const WordSample> samples,
                                                    const NetworkModel& model) {
  const bool softmax = model.head() == Head::kSoftmax;
  const auto& meta = model.metadata();
  if (!softmax && !meta.phoc) throw std::invalid_argument("model has no PHOC configuration");
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.image.empty()) throw std::invalid_argument("sample " + s.id + ": image not loaded");
    TrainingExample ex;
    ex.image = s.image;
    if (softmax) {
      const auto it = std::lower_bound(meta.classes.begin(), meta.classes.end(), s.transcription);
      if (it == meta.classes.end() || *it != s.transcription) {
        throw std::invalid_argument("sample " + s.id + ": class '" + s.transcription + "' unknown to the model");
      }
      ex.class_index = static_cast<std::size_t>(it - meta.classes.begin());
    } else {
      ex.target = encode_phoc(s.transcription, *meta.phoc).bits;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<PredictedSample> predict(const NetworkModel& model, std::span<const WordSample> samples,
                                     std::size_t threads) {
  std::vector<PredictedSample> out(samples.size());
  const auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& s = samples[i];
      if (s.image.empty()) throw std::invalid_argument("sample " + s.id + ": image not loaded");
      const auto result = model.forward(s.image, Mode::kInfer);
      out[i] = {s.id, s.transcription, std::vector<float>(result.output.values().begin(), result.output.values().end())};
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(samples.size(), 1));
  if (threads == 1) {
    work(0, samples.size());
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(samples.size() * t / threads, samples.size() * (t + 1) / threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<PredictedSample> ground_truth_predictions(std::span<const WordSample> samples,
                                                      const PhocConfig& config) {
  std::vector<PredictedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.id, s.transcription, encode_phoc(s.transcription, config).bits});
  return out;
}

void write_predictions(std::span<const PredictedSample> predictions, const std::filesystem::path& path,
                       PredictionFormat format) {
  const std::size_t dim = predictions.empty() ? 0 : predictions.front().vector.size();
  for (const auto& p : predictions) {
    if (p.vector.size() != dim) throw std::invalid_argument("write_predictions: vector lengths differ");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  if (format == PredictionFormat::kBinary) {
    std::vector<std::uint8_t> bytes(std::begin(kPredictionMagic), std::end(kPredictionMagic));
    put_u32(bytes, 1);
    put_u32(bytes, static_cast<std::uint32_t>(predictions.size()));
    put_u32(bytes, static_cast<std::uint32_t>(dim));
    for (const auto& p : predictions) {
      put_u32(bytes, static_cast<std::uint32_t>(p.id.size()));
      bytes.insert(bytes.end(), p.id.begin(), p.id.end());
      put_u32(bytes, static_cast<std::uint32_t>(p.transcription.size()));
      bytes.insert(bytes.end(), p.transcription.begin(), p.transcription.end());
      for (float v : p.vector) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    out << "id\ttranscription\tvector\n";
    char buf[32];
    for (const auto& p : predictions) {
      out << p.id << '\t' << p.transcription << '\t';
      for (std::size_t i = 0; i < p.vector.size(); ++i) {
        const auto r = std::to_chars(buf, buf + sizeof buf, p.vector[i]);
        if (i) out << ' ';
        out.write(buf, r.ptr - buf);
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<PredictedSample> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open prediction file");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPredictionMagic, 8) != 0) {
    return parse_tsv(std::string(bytes.begin(), bytes.end()), name);
  }
  Reader r(bytes, name);
  r.skip(8);
  if (const auto version = r.u32(); version != 1) {
    throw std::runtime_error(name + ": unsupported prediction format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  std::vector<PredictedSample> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    PredictedSample p;
    p.id = r.str();
    p.transcription = r.str();
    p.vector.resize(dim);
    for (auto& v : p.vector) v = r.f32();
    out.push_back(std::move(p));
  }
  if (!r.done()) throw std::runtime_error(name + ": trailing bytes in prediction file");
  return out;
}

}  // namespace phocnet
