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

#include "phocnet/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace phocnet {

using nlohmann::json;

ArchitectureSpec architecture_preset(std::string_view name, Head head) {
  ArchitectureSpec spec;
  spec.name = std::string(name);
  spec.head = head;
  auto convs = [&](std::size_t n, std::size_t width) {
    for (std::size_t i = 0; i < n; ++i) spec.layers.push_back(ConvSpec{width});
  };
  if (name == "phocnet-full") {
    convs(2, 64);
    spec.layers.push_back(MaxPoolSpec{});
    convs(2, 128);
    spec.layers.push_back(MaxPoolSpec{});
    convs(6, 256);
    convs(3, 512);
    spec.layers.push_back(SppSpec{{1, 2, 4}});
    spec.layers.push_back(FcSpec{4096});
    spec.layers.push_back(DropoutSpec{0.5});
    spec.layers.push_back(FcSpec{4096});
    spec.layers.push_back(DropoutSpec{0.5});
  } else if (name == "phocnet-mini") {
    convs(2, 16);
    spec.layers.push_back(MaxPoolSpec{});
    convs(2, 32);
    spec.layers.push_back(MaxPoolSpec{});
    convs(2, 48);
    spec.layers.push_back(SppSpec{{1, 2, 4}});
    spec.layers.push_back(FcSpec{512});
    spec.layers.push_back(DropoutSpec{0.5});
  } else {
    throw std::invalid_argument("unknown architecture preset '" + std::string(name) + "'");
  }
  return spec;
}

void validate_architecture(const ArchitectureSpec& spec) {
  std::size_t spp_count = 0;
  bool seen_conv = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    const bool spatial = std::holds_alternative<ConvSpec>(layer) || std::holds_alternative<MaxPoolSpec>(layer);
    if (spatial && spp_count > 0)
      throw std::invalid_argument(where + "convolution/pooling after the SPP layer");
    if (!spatial && !std::holds_alternative<SppSpec>(layer) && spp_count == 0)
      throw std::invalid_argument(where + "fully connected/dropout layer before the SPP layer");
    if (auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (conv->out_channels == 0) throw std::invalid_argument(where + "conv width is zero");
      seen_conv = true;
    } else if (auto* spp = std::get_if<SppSpec>(&layer)) {
      ++spp_count;
      if (spp->levels.empty()) throw std::invalid_argument(where + "SPP without levels");
      for (std::size_t l : spp->levels)
        if (l == 0) throw std::invalid_argument(where + "SPP level is zero");
    } else if (auto* fc = std::get_if<FcSpec>(&layer)) {
      if (fc->out == 0) throw std::invalid_argument(where + "FC width is zero");
    } else if (auto* d = std::get_if<DropoutSpec>(&layer)) {
      if (!(d->p >= 0.0 && d->p < 1.0)) throw std::invalid_argument(where + "dropout outside [0, 1)");
    }
  }
  if (spp_count != 1)
    throw std::invalid_argument("architecture needs exactly one SPP layer, found " +
                                std::to_string(spp_count));
  if (!seen_conv) throw std::invalid_argument("architecture has no convolution layer");
}

std::string architecture_to_json(const ArchitectureSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) {
    if (auto* conv = std::get_if<ConvSpec>(&layer))
      layers.push_back({{"type", "conv"}, {"out", conv->out_channels}});
    else if (std::holds_alternative<MaxPoolSpec>(layer))
      layers.push_back({{"type", "maxpool"}});
    else if (auto* spp = std::get_if<SppSpec>(&layer))
      layers.push_back({{"type", "spp"}, {"levels", spp->levels}});
    else if (auto* fc = std::get_if<FcSpec>(&layer))
      layers.push_back({{"type", "fc"}, {"out", fc->out}});
    else if (auto* d = std::get_if<DropoutSpec>(&layer))
      layers.push_back({{"type", "dropout"}, {"p", d->p}});
  }
  return json{{"name", spec.name},
              {"head", spec.head == Head::kSigmoid ? "sigmoid" : "softmax"},
              {"layers", layers}}
      .dump();
}

ArchitectureSpec architecture_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    ArchitectureSpec spec;
    spec.name = j.at("name").get<std::string>();
    const std::string head = j.at("head").get<std::string>();
    if (head == "sigmoid")
      spec.head = Head::kSigmoid;
    else if (head == "softmax")
      spec.head = Head::kSoftmax;
    else
      throw std::invalid_argument("unknown head '" + head + "'");
    for (const json& l : j.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "conv")
        spec.layers.push_back(ConvSpec{l.at("out").get<std::size_t>()});
      else if (type == "maxpool")
        spec.layers.push_back(MaxPoolSpec{});
      else if (type == "spp")
        spec.layers.push_back(SppSpec{l.at("levels").get<std::vector<std::size_t>>()});
      else if (type == "fc")
        spec.layers.push_back(FcSpec{l.at("out").get<std::size_t>()});
      else if (type == "dropout")
        spec.layers.push_back(DropoutSpec{l.at("p").get<double>()});
      else
        throw std::invalid_argument("unknown layer type '" + type + "'");
    }
    return spec;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed architecture: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Binary model format (little-endian):
//   magic "PHOCNET1" | u32 version | u32 metadata length | metadata (JSON)
//   | u32 layer count | per layer: u32 kind tag, u32 blob count,
//   blobs (u32 rank, u32 dims[rank], f32 data[]), then the optimizer-state
//   blobs with the same framing.

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void blob(const Blob<float>& b) {
    u32(static_cast<std::uint32_t>(b.shape.size()));
    for (std::size_t d : b.shape) u32(static_cast<std::uint32_t>(d));
    for (float v : b.values) u32(std::bit_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n, "metadata");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void blob_into(Blob<float>& dst, std::size_t layer) {
    const std::uint32_t rank = u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = u32();
    if (shape != dst.shape)
      throw ModelFileError(ModelFileError::Kind::kShapeMismatch,
                           "layer " + std::to_string(layer) + ": blob shape does not match architecture");
    need(dst.size() * 4, "parameter data");
    for (float& v : dst.values) v = std::bit_cast<float>(u32());
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw ModelFileError(ModelFileError::Kind::kTruncated,
                           std::string("model file truncated while reading ") + what);
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string metadata_json(const NetworkModel& model) {
  const ModelMetadata& m = model.metadata();
  json j;
  j["architecture"] = json::parse(architecture_to_json(model.spec()));
  j["label_dim"] = model.label_dim();
  j["input_channels"] = model.input_channels();
  if (m.phoc) {
    j["phoc"] = json::parse(m.phoc->to_json());
    j["phoc_digest"] = m.phoc->digest();
  } else {
    j["phoc"] = nullptr;
  }
  j["classes"] = m.classes;
  j["iteration"] = m.iteration;
  return j.dump();
}

std::size_t param_blob_count(LayerKind kind) {
  return kind == LayerKind::kConv3x3 || kind == LayerKind::kFullyConnected ? 2 : 0;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const NetworkModel& model) {
  Writer w;
  w.raw(kModelMagic, sizeof kModelMagic);
  w.u32(kModelFormatVersion);
  const std::string meta = metadata_json(model);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.raw(meta.data(), meta.size());
  const auto& ops = model.ops();
  w.u32(static_cast<std::uint32_t>(ops.size()));
  for (const Op& op : ops) {
    w.u32(static_cast<std::uint32_t>(op.kind));
    const std::size_t n = param_blob_count(op.kind);
    w.u32(static_cast<std::uint32_t>(n));
    for (std::size_t b = 0; b < n; ++b) w.blob(model.params()[op.param_offset + b]);
    for (std::size_t b = 0; b < n; ++b) w.blob(model.velocity()[op.param_offset + b]);
  }
  return w.take();
}

NetworkModel deserialize_model(std::span<const std::uint8_t> bytes) {
  using Kind = ModelFileError::Kind;
  if (bytes.size() < sizeof kModelMagic)
    throw ModelFileError(Kind::kTruncated, "model file shorter than its magic bytes");
  if (std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0)
    throw ModelFileError(Kind::kBadMagic, "bad magic: not a PHOCNET1 model file");
  Reader r(bytes.subspan(sizeof kModelMagic));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    throw ModelFileError(Kind::kVersionMismatch, "unsupported model format version " +
                                                     std::to_string(version));
  const std::string meta = r.str(r.u32());

  NetworkModel model;
  try {
    json j = json::parse(meta);
    ArchitectureSpec spec = architecture_from_json(j.at("architecture").dump());
    model = NetworkModel::build(spec, j.at("label_dim").get<std::size_t>(),
                                j.at("input_channels").get<std::size_t>());
    if (!j.at("phoc").is_null()) model.metadata().phoc = PhocConfig::from_json(j.at("phoc").dump());
    model.metadata().classes = j.at("classes").get<std::vector<std::string>>();
    model.metadata().iteration = j.at("iteration").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ModelFileError(Kind::kBadMetadata, std::string("bad model metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFileError(Kind::kBadMetadata, std::string("bad model metadata: ") + e.what());
  }

  const auto& ops = model.ops();
  const std::uint32_t layers = r.u32();
  if (layers != ops.size())
    throw ModelFileError(Kind::kShapeMismatch, "file has " + std::to_string(layers) +
                                                   " layers, architecture has " +
                                                   std::to_string(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Op& op = ops[i];
    const std::uint32_t kind = r.u32();
    const std::uint32_t blobs = r.u32();
    const std::size_t n = param_blob_count(op.kind);
    if (kind != static_cast<std::uint32_t>(op.kind) || blobs != n)
      throw ModelFileError(Kind::kShapeMismatch,
                           "layer " + std::to_string(i) + ": kind/blob count does not match architecture");
    for (std::size_t b = 0; b < n; ++b) r.blob_into(model.params()[op.param_offset + b], i);
    for (std::size_t b = 0; b < n; ++b) r.blob_into(model.velocity()[op.param_offset + b], i);
  }
  if (!r.done()) throw ModelFileError(Kind::kShapeMismatch, "trailing bytes after the last layer");
  return model;
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelFileError(ModelFileError::Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelFileError(ModelFileError::Kind::kIo, "write failed for " + path.string());
}

NetworkModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError(ModelFileError::Kind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

bool models_identical(const NetworkModel& a, const NetworkModel& b) {
  auto same_bits = [](const std::vector<Blob<float>>& x, const std::vector<Blob<float>>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].shape != y[i].shape) return false;
      if (std::memcmp(x[i].values.data(), y[i].values.data(), x[i].size() * sizeof(float)) != 0)
        return false;
    }
    return true;
  };
  return a.ops() == b.ops() && a.label_dim() == b.label_dim() &&
         architecture_to_json(a.spec()) == architecture_to_json(b.spec()) &&
         a.metadata() == b.metadata() && same_bits(a.params(), b.params()) &&
         same_bits(a.velocity(), b.velocity());
}

}  // namespace phocnet
