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

#include "phocnet/train.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>
#include <thread>

#include "phocnet/rng.hpp"

namespace phocnet {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(base_lr > 0.0)) fail("base_lr must be positive");
  if (total_iterations == 0) fail("total_iterations must be positive");
  if (lr_drop_iteration > total_iterations) fail("lr_drop_iteration exceeds total_iterations");
  if (!(lr_drop_factor > 0.0)) fail("lr_drop_factor must be positive");
  if (log_every == 0) fail("log_every must be positive");
  if (threads == 0) fail("threads must be positive");
}

TrainConfig softmax_preset(TrainConfig base) {
  base.mode = TrainMode::kSoftmax;
  base.total_iterations = 500000;
  base.lr_drop_iteration = 250000;
  return base;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw std::invalid_argument("train config: " + key + " expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw std::invalid_argument("train config: " + key + " expects a number, got '" + v + "'");
  return x;
}

}  // namespace

void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "batch_size") {
    c.batch_size = parse_count(key, value);
  } else if (key == "momentum") {
    c.momentum = parse_real(key, value);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_real(key, value);
  } else if (key == "base_lr") {
    c.base_lr = parse_real(key, value);
  } else if (key == "total_iterations") {
    c.total_iterations = parse_count(key, value);
  } else if (key == "lr_drop_iteration") {
    c.lr_drop_iteration = parse_count(key, value);
  } else if (key == "lr_drop_factor") {
    c.lr_drop_factor = parse_real(key, value);
  } else if (key == "seed") {
    c.seed = parse_count(key, value);
  } else if (key == "log_every") {
    c.log_every = parse_count(key, value);
  } else if (key == "threads") {
    c.threads = parse_count(key, value);
  } else if (key == "mode") {
    if (value == "phoc")
      c.mode = TrainMode::kPhoc;
    else if (value == "softmax")
      c.mode = TrainMode::kSoftmax;
    else
      throw std::invalid_argument("train config: mode must be phoc or softmax, got '" + value + "'");
  } else if (key == "loss_normalization") {
    if (value == "mean")
      c.loss_normalization = LossNormalization::kMean;
    else if (value == "sum")
      c.loss_normalization = LossNormalization::kSum;
    else
      throw std::invalid_argument("train config: loss_normalization must be mean or sum, got '" +
                                  value + "'");
  } else {
    throw std::invalid_argument("train config: unknown key '" + key + "'");
  }
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("train config line " + std::to_string(line_no) + ": expected key=value");
    try {
      apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open train config " + path.string());
  try {
    return parse_train_config(in, base);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "batch_size=" << c.batch_size << '\n'
      << "momentum=" << shortest(c.momentum) << '\n'
      << "weight_decay=" << shortest(c.weight_decay) << '\n'
      << "base_lr=" << shortest(c.base_lr) << '\n'
      << "total_iterations=" << c.total_iterations << '\n'
      << "lr_drop_iteration=" << c.lr_drop_iteration << '\n'
      << "lr_drop_factor=" << shortest(c.lr_drop_factor) << '\n'
      << "seed=" << c.seed << '\n'
      << "mode=" << (c.mode == TrainMode::kPhoc ? "phoc" : "softmax") << '\n'
      << "loss_normalization=" << (c.loss_normalization == LossNormalization::kSum ? "sum" : "mean")
      << '\n'
      << "log_every=" << c.log_every << '\n'
      << "threads=" << c.threads << '\n';
  return out.str();
}

double lr_at(std::size_t iteration, const TrainConfig& config) {
  if (iteration >= config.total_iterations)
    throw std::out_of_range("lr_at: iteration " + std::to_string(iteration) + " outside [0, " +
                            std::to_string(config.total_iterations) + ")");
  return iteration < config.lr_drop_iteration ? config.base_lr
                                              : config.base_lr / config.lr_drop_factor;
}

void TrainLog::write_tsv(std::ostream& out) const {
  out << "iteration\tloss\tlr\telapsed_seconds\n";
  out << std::setprecision(9);
  for (const auto& r : records)
    out << r.iteration << '\t' << r.loss << '\t' << r.lr << '\t' << r.elapsed_seconds << '\n';
}

void TrainLog::write_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log " + path.string());
  write_tsv(out);
}

namespace {

void check_compatible(std::span<const TrainingExample> data, const NetworkModel& model,
                      TrainMode mode) {
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  if ((mode == TrainMode::kPhoc) != (model.head() == Head::kSigmoid))
    throw std::invalid_argument("train: phoc mode needs a sigmoid head, softmax mode a softmax head");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (mode == TrainMode::kPhoc && data[i].target.size() != model.label_dim())
      throw std::invalid_argument("train: sample " + std::to_string(i) + " has a label of length " +
                                  std::to_string(data[i].target.size()) + ", model outputs " +
                                  std::to_string(model.label_dim()));
    if (mode == TrainMode::kSoftmax && data[i].class_index >= model.label_dim())
      throw std::invalid_argument("train: sample " + std::to_string(i) + " has class " +
                                  std::to_string(data[i].class_index) + " beyond the model's " +
                                  std::to_string(model.label_dim()) + " classes");
  }
}

LossResult<float> sample_loss(const TrainingExample& ex, const Tensor<float>& logits, TrainMode mode) {
  return mode == TrainMode::kPhoc ? bce_loss_with_logits<float>(ex.target, logits)
                                  : softmax_xent_loss<float>(ex.class_index, logits);
}

// Cycles through the data in seeded per-epoch permutations.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::size_t sample(std::size_t global_index) {
    const std::size_t epoch = global_index / n_;
    if (epoch != epoch_ || order_.empty()) {
      order_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
      Rng rng(derive_seed(seed_, {0x5eed, epoch}));
      rng.shuffle(order_);
      epoch_ = epoch;
    }
    return order_[global_index % n_];
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace

TrainLog train(std::span<const TrainingExample> data, NetworkModel& model, const TrainConfig& config,
               const TrainCallbacks& callbacks) {
  config.validate();
  check_compatible(data, model, config.mode);

  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = config.batch_size;
  const std::size_t threads = std::min(config.threads, batch);
  BatchSampler sampler(data.size(), config.seed);

  std::vector<GradientAccumulator<float>> partial;
  for (std::size_t t = 0; t < threads; ++t) partial.emplace_back(model);
  std::vector<double> partial_loss(threads);
  std::vector<std::size_t> picks(batch);

  TrainLog log;
  double window_loss = 0.0;
  std::size_t window_count = 0;

  for (std::size_t it = model.metadata().iteration; it < config.total_iterations; ++it) {
    for (std::size_t s = 0; s < batch; ++s) picks[s] = sampler.sample(it * batch + s);

    auto work = [&](std::size_t t) {
      auto& acc = partial[t];
      acc.zero();
      partial_loss[t] = 0.0;
      const std::size_t lo = batch * t / threads;
      const std::size_t hi = batch * (t + 1) / threads;
      for (std::size_t s = lo; s < hi; ++s) {
        const TrainingExample& ex = data[picks[s]];
        Rng dropout_rng(derive_seed(config.seed, {0xd50b, it, s}));
        auto fr = model.forward(ex.image, Mode::kTrain, &dropout_rng);
        LossResult<float> l = sample_loss(ex, fr.logits, config.mode);
        if (config.loss_normalization == LossNormalization::kSum) {
          const float n = static_cast<float>(l.grad.size());
          for (float& g : l.grad.values()) g *= n;
        }
        partial_loss[t] += l.loss;
        model.backward_accumulate(fr.cache, l.grad, acc);
      }
      acc.finalize();
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    auto& grads = partial[0].blobs();
    double batch_loss = partial_loss[0];
    for (std::size_t t = 1; t < threads; ++t) {
      batch_loss += partial_loss[t];
      for (std::size_t b = 0; b < grads.size(); ++b)
        for (std::size_t i = 0; i < grads[b].size(); ++i) grads[b].values[i] += partial[t].blobs()[b].values[i];
    }
    batch_loss /= static_cast<double>(batch);
    if (!std::isfinite(batch_loss)) throw TrainingDivergedError(it);

    const float inv_batch = 1.0f / static_cast<float>(batch);
    const double lr = lr_at(it, config);
    for (std::size_t b = 0; b < grads.size(); ++b) {
      for (float& g : grads[b].values) g *= inv_batch;
      const double wd = NetworkModel::is_bias(b) ? 0.0 : config.weight_decay;
      sgd_step<float>(model.params()[b].values, grads[b].values, model.velocity()[b].values, lr,
                      config.momentum, wd);
    }
    model.metadata().iteration = it + 1;

    window_loss += batch_loss;
    ++window_count;
    if ((it + 1) % config.log_every == 0 || it + 1 == config.total_iterations) {
      TrainLogRecord rec;
      rec.iteration = it;
      rec.loss = window_loss / static_cast<double>(window_count);
      rec.lr = lr;
      rec.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.records.push_back(rec);
      if (callbacks.on_log) callbacks.on_log(rec);
      window_loss = 0.0;
      window_count = 0;
    }
    if (callbacks.evaluate && callbacks.eval_every > 0 && (it + 1) % callbacks.eval_every == 0)
      log.snapshots.push_back({it, callbacks.evaluate(model, it)});
  }
  return log;
}

double evaluate_loss(std::span<const TrainingExample> data, const NetworkModel& model, TrainMode mode) {
  check_compatible(data, model, mode);
  double total = 0.0;
  for (const auto& ex : data) {
    auto fr = model.forward(ex.image, Mode::kInfer);
    total += sample_loss(ex, fr.logits, mode).loss;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace phocnet
