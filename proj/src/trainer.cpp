// Copyright 2026 The cam2rank Authors
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
#include "cam2/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "cam2/error.hpp"
#include "cam2/hash.hpp"
#include "cam2/nn/serialize.hpp"

namespace cam2 {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointMagic = "CAM2CKPT";
constexpr std::uint64_t kCheckpointVersion = 1;
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;  // "SHUFF"

void accumulate(LossReport& acc, const LossReport& r) {
  const double n = static_cast<double>(r.batch_size);
  if (acc.task.empty()) acc.task.assign(r.task.size(), 0.0);
  for (std::size_t t = 0; t < r.task.size(); ++t) acc.task[t] += n * r.task[t];
  acc.conformity += n * r.conformity;
  acc.relevance += n * r.relevance;
  acc.mixture += n * r.mixture;
  acc.total += n * r.total;
  acc.batch_size += r.batch_size;
  acc.has_causal = r.has_causal;
}

void finish(LossReport& acc) {
  if (acc.batch_size == 0) return;
  const double n = static_cast<double>(acc.batch_size);
  for (double& v : acc.task) v /= n;
  acc.conformity /= n;
  acc.relevance /= n;
  acc.mixture /= n;
  acc.total /= n;
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

TrainState::TrainState(Cam2Model m, TrainerConfig t, std::uint64_t s,
                       std::string data_hash)
    : model(std::move(m)),
      trainer(std::move(t)),
      seed(s),
      config_hash(cam2::config_hash(model.config(), trainer)),
      dataset_hash(std::move(data_hash)) {}

TrainState init_state(const Cam2Config& model, const TrainerConfig& trainer,
                      const Dataset& data, std::uint64_t seed) {
  Cam2Config cfg = model;
  cfg.seed = seed;
  trainer.validate(cfg.num_tasks);
  if (cfg.num_tasks != data.config.num_tasks() || cfg.topics != data.config.topics) {
    throw MismatchError("model task/topic counts differ from the dataset");
  }
  return TrainState(Cam2Model(cfg, data.schema), trainer, seed, data.config_hash);
}

std::vector<std::size_t> batch_order(std::size_t rows, std::uint64_t seed, int day,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, kShuffleStream, static_cast<std::uint64_t>(day),
                                  epoch));
  // Explicit Fisher-Yates so the order does not depend on the standard library.
  for (std::size_t i = rows; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

DaySummary train_day(TrainState& state, const Dataset& data, int day) {
  if (day != state.last_day + 1) {
    throw SequencingError("train_day expects day " + std::to_string(state.last_day + 1) +
                          ", got " + std::to_string(day));
  }
  if (data.config_hash != state.dataset_hash) {
    throw MismatchError("training state belongs to another dataset");
  }
  const DayData& dd = data.day(day);
  DaySummary summary;
  summary.day = day;
  const std::size_t n = dd.examples.size();
  const std::size_t bs = state.trainer.batch_size;
  nn::ParameterStore& params = state.model.parameters();
  for (std::size_t epoch = 0; epoch < state.trainer.epochs_per_day; ++epoch) {
    const std::vector<std::size_t> order = batch_order(n, state.seed, day, epoch);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Batch batch = make_batch(data, dd, rows);
      if (!state.audited) {
        if (state.trainer.audit_first_batch) {
          const ProvenanceReport report =
              gradient_provenance(state.model, batch.features, batch.targets);
          check_decoupling(report, state.model.variant());
        }
        state.audited = true;
      }
      params.zero_grads();
      nn::Tape tape(true);
      const ForwardOutputs out = state.model.forward(tape, batch.features);
      const LossVars loss = state.model.losses(tape, out, batch.targets);
      tape.backward(loss.objective);
      nn::adam_step(params, state.trainer.adam, state.adam);
      accumulate(summary.mean, loss.report);
      ++summary.steps;
    }
  }
  params.zero_grads();
  finish(summary.mean);
  summary.mean.has_causal = has_causal_modules(state.model.variant());
  state.last_day = day;
  return summary;
}

HoldoutMetrics evaluate_day(const Cam2Model& model, const Dataset& data, int day,
                            const std::vector<double>& aggregation_weights,
                            std::size_t batch_size) {
  const DayData& dd = data.day(day);
  const std::size_t tasks = model.config().num_tasks;
  const std::size_t n = dd.examples.size();
  if (n == 0) throw UndefinedMetricError("holdout day " + std::to_string(day) + " is empty");
  std::vector<std::vector<double>> preds(tasks), labels(tasks);
  for (std::size_t t = 0; t < tasks; ++t) {
    preds[t].reserve(n);
    labels[t].reserve(n);
  }
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    rows.clear();
    for (std::size_t i = start; i < end; ++i) rows.push_back(i);
    const Batch batch = make_batch(data, dd, rows);
    const std::vector<double> p = model.predict(batch.features);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t t = 0; t < tasks; ++t) {
        preds[t].push_back(p[r * tasks + t]);
        labels[t].push_back(batch.targets.labels.at(r, t));
      }
    }
  }
  HoldoutMetrics m;
  m.day = day;
  m.examples = n;
  double wsum = 0.0;
  for (std::size_t t = 0; t < tasks; ++t) {
    m.ne.push_back(normalized_cross_entropy(preds[t], labels[t]));
    double pos = 0.0;
    for (double y : labels[t]) pos += y;
    m.base_rate.push_back(pos / static_cast<double>(n));
    const double w = aggregation_weights.empty() ? 1.0 : aggregation_weights[t];
    m.ne_aggregated += w * m.ne.back();
    wsum += w;
  }
  m.ne_aggregated /= wsum;
  return m;
}

std::vector<MetricsRow> run_experiment(TrainState& state, const Dataset& data,
                                       const ExperimentOptions& options) {
  const int days = static_cast<int>(data.num_days());
  if (days < 2) throw ValidationError("run_experiment needs at least 2 days");
  int last = days - 1;
  if (options.stop_after_day > 0) last = std::min(last, options.stop_after_day);
  std::vector<MetricsRow> rows;
  for (int d = state.last_day + 1; d <= last; ++d) {
    MetricsRow row;
    row.variant = std::string(to_string(state.model.variant()));
    row.seed = state.seed;
    row.train_day = d;
    row.eval_day = d + 1;
    row.config_hash = state.config_hash;
    row.train = train_day(state, data, d);
    // Day d + 1 has not been seen by any gradient step at this point.
    row.holdout = evaluate_day(state.model, data, d + 1,
                               state.trainer.aggregation_weights);
    if (options.log) *options.log << progress_line(row) << '\n' << std::flush;
    if (options.on_day_end) options.on_day_end(state, row);
    rows.push_back(std::move(row));
  }
  return rows;
}

double run_ne(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw UndefinedMetricError("no metrics rows");
  double s = 0.0;
  for (const MetricsRow& r : rows) s += r.holdout.ne_aggregated;
  return s / static_cast<double>(rows.size());
}

std::string metrics_header(std::size_t num_tasks) {
  std::string h = "variant\tseed\ttrain_day\teval_day";
  for (std::size_t t = 0; t < num_tasks; ++t) h += "\tloss_task" + std::to_string(t + 1);
  h += "\tloss_conformity\tloss_relevance\tloss_mixture\tloss_total";
  for (std::size_t t = 0; t < num_tasks; ++t) h += "\tne_task" + std::to_string(t + 1);
  h += "\tne_aggregated\tconfig_hash";
  return h;
}

std::string metrics_line(const MetricsRow& row) {
  std::string s = row.variant + "\t" + std::to_string(row.seed) + "\t" +
                  std::to_string(row.train_day) + "\t" + std::to_string(row.eval_day);
  const auto g = [](double v) { return fmt(v, "%.17g"); };
  for (double v : row.train.mean.task) s += "\t" + g(v);
  // Baseline has no causal losses; leave those cells empty rather than zero.
  if (row.train.mean.has_causal) {
    s += "\t" + g(row.train.mean.conformity) + "\t" + g(row.train.mean.relevance) +
         "\t" + g(row.train.mean.mixture);
  } else {
    s += "\t\t\t";
  }
  s += "\t" + g(row.train.mean.total);
  for (double v : row.holdout.ne) s += "\t" + g(v);
  s += "\t" + g(row.holdout.ne_aggregated) + "\t" + row.config_hash;
  return s;
}

std::string progress_line(const MetricsRow& row) {
  std::string s = "day " + std::to_string(row.train_day) + " [" + row.variant +
                  " seed " + std::to_string(row.seed) + "] steps " +
                  std::to_string(row.train.steps) + " loss";
  for (double v : row.train.mean.task) s += " " + fmt(v, "%.4f");
  if (row.train.mean.has_causal) {
    s += " L_C " + fmt(row.train.mean.conformity, "%.4f") + " L_R " +
         fmt(row.train.mean.relevance, "%.4f");
  }
  s += " | holdout day " + std::to_string(row.eval_day) + " NE";
  for (double v : row.holdout.ne) s += " " + fmt(v, "%.4f");
  s += " agg " + fmt(row.holdout.ne_aggregated, "%.5f");
  return s;
}

std::string serialize_state(const TrainState& state) {
  nn::ByteWriter w;
  w.str(kCheckpointMagic);
  w.u64(kCheckpointVersion);
  w.str(state.config_hash);
  w.str(state.dataset_hash);
  w.str(state.model.schema_hash());
  w.str(to_json(state.model.config()).dump());
  w.str(to_json(state.trainer).dump());
  w.u64(state.seed);
  w.u64(static_cast<std::uint64_t>(state.last_day));
  w.u8(state.audited ? 1 : 0);
  nn::write_parameters(w, state.model.parameters());
  nn::write_adam_state(w, state.adam);
  std::string bytes = w.bytes();
  bytes += sha256_hex(bytes);
  return bytes;
}

TrainState deserialize_state(std::string_view bytes, const Schema& schema) {
  constexpr std::size_t kDigest = 64;
  if (bytes.size() < kDigest) throw ChecksumError("checkpoint is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - kDigest);
  if (sha256_hex(body) != bytes.substr(bytes.size() - kDigest)) {
    throw ChecksumError("checkpoint checksum mismatch (corrupt or tampered)");
  }
  nn::ByteReader r(body);
  if (r.str() != kCheckpointMagic) throw ChecksumError("not a checkpoint file");
  if (r.u64() != kCheckpointVersion) throw MismatchError("unsupported checkpoint version");
  const std::string cfg_hash = r.str();
  const std::string data_hash = r.str();
  const std::string schema_hash = r.str();
  if (schema_hash != schema.hash()) {
    throw MismatchError("checkpoint was trained under another feature schema");
  }
  const Cam2Config model_cfg = model_from_json(nlohmann::json::parse(r.str()));
  const TrainerConfig trainer_cfg = trainer_from_json(nlohmann::json::parse(r.str()));
  const std::uint64_t seed = r.u64();
  TrainState state(Cam2Model(model_cfg, schema), trainer_cfg, seed, data_hash);
  if (state.config_hash != cfg_hash) {
    throw MismatchError("checkpoint config hash does not match its embedded config");
  }
  state.last_day = static_cast<int>(r.u64());
  state.audited = r.u8() != 0;
  nn::read_parameters_into(r, state.model.parameters());
  state.adam = nn::read_adam_state(r);
  if (!r.done()) throw ChecksumError("trailing bytes in checkpoint");
  return state;
}

void save_checkpoint(const TrainState& state, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    const std::string bytes = serialize_state(state);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("checkpoint write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

TrainState load_checkpoint(const fs::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_state(ss.str(), schema);
}

TrainState load_checkpoint(const fs::path& path, const Schema& schema,
                           const std::string& expected_config_hash,
                           const std::string& expected_dataset_hash) {
  TrainState state = load_checkpoint(path, schema);
  if (state.config_hash != expected_config_hash) {
    throw MismatchError("checkpoint " + path.string() +
                        " was trained under a different config (variant " +
                        std::string(to_string(state.model.variant())) + ")");
  }
  if (state.dataset_hash != expected_dataset_hash) {
    throw MismatchError("checkpoint " + path.string() + " belongs to another dataset");
  }
  return state;
}

}  // namespace cam2
