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
#include "cam2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <Eigen/Dense>

#include "cam2/error.hpp"
#include "cam2/hash.hpp"

namespace cam2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kReplayCandidateStream = 0x43414e44ULL;  // "CAND"
constexpr std::uint64_t kReplayOutcomeStream = 0x4f555443ULL;    // "OUTC"
constexpr std::uint64_t kProbeStream = 0x50524f42ULL;            // "PROB"

bool better(const RankedItem& a, const RankedItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

double uniform_from(std::uint64_t seed) {
  // 53 random mantissa bits.
  return static_cast<double>(mix64(seed) >> 11) * 0x1.0p-53;
}

}  // namespace

double final_score(std::span<const double> predictions, std::span<const double> weights) {
  if (predictions.size() != weights.size()) {
    throw ValidationError("final_score: " + std::to_string(predictions.size()) +
                          " predictions but " + std::to_string(weights.size()) +
                          " weights");
  }
  double total_w = 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (!(weights[t] >= 0.0)) throw ValidationError("final_score: weights must be >= 0");
    total_w += weights[t];
    s += weights[t] * predictions[t];
  }
  if (!(total_w > 0.0)) throw ValidationError("final_score: weights are all zero");
  return s;
}

std::vector<RankedItem> top_k(std::span<const std::uint32_t> items,
                              std::span<const double> scores, std::size_t k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (items.size() != scores.size()) {
    throw ValidationError("top_k: items and scores differ in length");
  }
  if (items.empty()) throw ValidationError("top_k: no candidates");
  std::vector<RankedItem> all(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) all[i] = {items[i], scores[i]};
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    better);
  all.resize(n);
  return all;
}

std::vector<PartitionedFeatures> candidate_features(
    const Dataset& data, const Histories& history, const NormStats& norm, int day,
    std::uint32_t user, std::span<const std::uint32_t> items) {
  data.world.user(user);
  std::vector<PartitionedFeatures> out;
  out.reserve(items.size());
  for (std::uint32_t item : items) {
    const ItemProfile& it = data.world.item(item);
    if (it.birth_day > day) {
      throw DataError("item " + std::to_string(item) + " is not live on day " +
                      std::to_string(day));
    }
    InteractionEvent ev;
    ev.day = day;
    ev.user = user;
    ev.item = item;
    std::vector<double> raw = derive_features(ev, history, data.world);
    norm.apply(raw);
    out.push_back(partition(raw, data.schema));
  }
  return out;
}

namespace {

std::vector<double> score_rows(const Cam2Model& model, const Schema& schema,
                               const std::vector<PartitionedFeatures>& feats,
                               std::span<const double> combine_weights) {
  std::vector<const PartitionedFeatures*> ptrs;
  ptrs.reserve(feats.size());
  for (const PartitionedFeatures& f : feats) ptrs.push_back(&f);
  const FeatureBatch batch = FeatureBatch::from_rows(schema, ptrs);
  const std::vector<double> p = model.predict(batch);
  const std::size_t tasks = model.config().num_tasks;
  std::vector<double> scores(feats.size());
  for (std::size_t r = 0; r < feats.size(); ++r) {
    scores[r] = final_score(std::span<const double>(p.data() + r * tasks, tasks),
                            combine_weights);
  }
  return scores;
}

}  // namespace

RankedList rank_topk(const Cam2Model& model, const Dataset& data,
                     const Histories& history, const NormStats& norm, int day,
                     std::uint32_t user, std::span<const std::uint32_t> candidates,
                     std::size_t k, std::span<const double> combine_weights) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (candidates.empty()) throw ValidationError("rank: candidate list is empty");
  const auto feats = candidate_features(data, history, norm, day, user, candidates);
  const auto scores = score_rows(model, data.schema, feats, combine_weights);
  RankedList list;
  list.user = user;
  list.items = top_k(candidates, scores, k);
  return list;
}

TailCoverage tail_coverage(std::span<const ExposureRecord> log, const World& world,
                           std::vector<double> quantiles) {
  if (log.empty()) throw DataError("tail_coverage: empty exposure log");
  std::map<std::uint32_t, ExposureRecord> per_item;
  std::uint64_t total_eng = 0;
  std::uint64_t total_imp = 0;
  std::uint64_t tail_imp = 0;
  // Bottom 80% of the catalogue by popularity rank.
  const double head_cut = 0.2 * static_cast<double>(world.config.n_items);
  for (const ExposureRecord& r : log) {
    const ItemProfile& it = world.item(r.item);
    ExposureRecord& acc = per_item[r.item];
    acc.item = r.item;
    acc.impressions += r.impressions;
    acc.engagements += r.engagements;
    total_eng += r.engagements;
    total_imp += r.impressions;
    if (static_cast<double>(it.popularity_rank) > head_cut) tail_imp += r.impressions;
  }
  if (total_eng == 0) throw DataError("tail_coverage: log has no engagement");
  std::vector<std::uint64_t> volumes;
  volumes.reserve(per_item.size());
  for (const auto& [_, r] : per_item) {
    if (r.engagements) volumes.push_back(r.engagements);
  }
  std::sort(volumes.begin(), volumes.end(), std::greater<>());
  TailCoverage out;
  std::sort(quantiles.begin(), quantiles.end());
  out.quantiles = quantiles;
  for (double q : quantiles) {
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("tail quantiles must lie in (0, 1]");
    const double target = q * static_cast<double>(total_eng);
    std::uint64_t cum = 0;
    std::size_t count = 0;
    while (count < volumes.size() && static_cast<double>(cum) < target) {
      cum += volumes[count++];
    }
    out.item_counts.push_back(count);
  }
  out.bottom80_impression_share =
      total_imp ? static_cast<double>(tail_imp) / static_cast<double>(total_imp) : 0.0;
  return out;
}

std::size_t age_bucket(int age_days) {
  if (age_days < 0) {
    throw DataError("negative item age (" + std::to_string(age_days) +
                    " days): event before the item's birth");
  }
  if (age_days < 1) return 0;
  if (age_days < 3) return 1;
  if (age_days < 10) return 2;
  return 3;
}

std::array<RateCounter, kAgeBuckets> engagement_by_item_age(
    std::span<const AgedEvent> log, const World& world) {
  std::array<RateCounter, kAgeBuckets> out{};
  for (const AgedEvent& e : log) {
    const ItemProfile& it = world.item(e.item);
    RateCounter& c = out[age_bucket(e.day - it.birth_day)];
    ++c.impressions;
    c.engagements += e.engagements;
  }
  return out;
}

double relative_delta_pct(double treatment, double control) {
  if (control == 0.0) return treatment == 0.0 ? 0.0 : std::copysign(INFINITY, treatment);
  return 100.0 * (treatment - control) / control;
}

std::vector<bool> casual_users(const Histories& history, int start_day,
                               const CohortRule& rule) {
  const int first = start_day - rule.window_days;
  if (rule.window_days < 1) throw ValidationError("cohort window must be >= 1 day");
  if (first < 1) {
    throw ValidationError("cohort window of " + std::to_string(rule.window_days) +
                          " days before day " + std::to_string(start_day) +
                          " exceeds the available history");
  }
  std::vector<bool> out(history.users.size(), false);
  for (std::size_t u = 0; u < history.users.size(); ++u) {
    int active = 0;
    for (int d : history.users[u].active_days) {
      if (d >= first && d < start_day) ++active;
    }
    out[u] = active >= rule.min_active_days && active <= rule.max_active_days;
  }
  return out;
}

ReplayCandidates make_replay_candidates(const Dataset& data, int day,
                                        std::size_t per_user, std::uint64_t seed) {
  const DayData& dd = data.day(day);
  ReplayCandidates out;
  out.day = day;
  for (const Example& e : dd.examples) {
    if (out.users.empty() || out.users.back() != e.user) out.users.push_back(e.user);
  }
  const ExposureSampler exposure(data.world, day, data.config.exposure_eta);
  const std::size_t n = std::min(per_user, exposure.live_items().size());
  out.items.reserve(out.users.size());
  for (std::uint32_t u : out.users) {
    std::mt19937_64 rng(derive_seed(seed, kReplayCandidateStream,
                                    static_cast<std::uint64_t>(day), u));
    ExposureSampler sampler = exposure;
    std::vector<std::uint32_t> items;
    std::unordered_set<std::uint32_t> seen;
    while (items.size() < n) {
      const std::uint32_t it = sampler(rng);
      if (seen.insert(it).second) items.push_back(it);
    }
    std::sort(items.begin(), items.end());
    out.items.push_back(std::move(items));
  }
  return out;
}

ReplayStats counterfactual_replay(const Cam2Model& model, const Dataset& data,
                                  const ReplayCandidates& candidates,
                                  const EvalConfig& eval) {
  const int day = candidates.day;
  const Histories history = fold_history(data, day - 1);
  const NormStats& norm = data.day(day).norm;
  const std::size_t tasks = data.config.num_tasks();
  const CohortRule rule{1, 2, eval.cohort_window_days};
  const std::vector<bool> casual = casual_users(history, day, rule);

  ReplayStats out;
  out.day = day;
  out.users = candidates.users.size();
  out.task_positives.assign(tasks, 0);
  std::vector<ExposureRecord> exposure;
  std::vector<AgedEvent> aged;
  for (std::size_t i = 0; i < candidates.users.size(); ++i) {
    const std::uint32_t u = candidates.users[i];
    const RankedList list = rank_topk(model, data, history, norm, day, u,
                                      candidates.items[i], eval.replay_k,
                                      eval.combine_weights);
    const UserProfile& user = data.world.user(u);
    CohortStats& cohort = casual[u] ? out.casual : out.regular;
    ++cohort.users;
    for (const RankedItem& r : list.items) {
      const ItemProfile& item = data.world.item(r.item);
      const EngagementTerms terms = engagement_terms(data.world, user, item);
      std::uint64_t positives = 0;
      for (std::size_t t = 0; t < tasks; ++t) {
        const double p = engagement_probability(data.config.tasks[t], terms.conformity,
                                                terms.relevance);
        const double draw = uniform_from(derive_seed(
            eval.replay_seed, kReplayOutcomeStream, static_cast<std::uint64_t>(day), u,
            r.item, t));
        if (draw < p) {
          ++positives;
          ++out.task_positives[t];
        }
      }
      ++out.impressions;
      out.engagements += positives;
      ++cohort.impressions;
      cohort.engagements += positives;
      exposure.push_back({r.item, 1, positives});
      aged.push_back({day, r.item, positives});
    }
  }
  out.tail = tail_coverage(exposure, data.world);
  out.age = engagement_by_item_age(aged, data.world);
  return out;
}

double probe_r2(const nn::Tensor& x, std::span<const double> y, bool* ridge_used) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.rows());
  const Eigen::Index d = static_cast<Eigen::Index>(x.cols());
  if (static_cast<std::size_t>(n) != y.size()) {
    throw DimensionError("probe: design has " + std::to_string(n) + " rows but target " +
                         std::to_string(y.size()));
  }
  if (ridge_used) *ridge_used = false;
  if (n < 2) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const double ymean = yv.mean();
  const double sstot = (yv.array() - ymean).square().sum();
  if (!(sstot > 0.0)) return 0.0;
  Eigen::MatrixXd a(n, d + 1);
  a.col(0).setOnes();
  a.rightCols(d) = x.as_matrix();
  Eigen::VectorXd beta;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) {
    if (ridge_used) *ridge_used = true;
    const Eigen::MatrixXd gram =
        a.transpose() * a + 1e-6 * Eigen::MatrixXd::Identity(d + 1, d + 1);
    beta = gram.ldlt().solve(a.transpose() * yv);
  } else {
    beta = qr.solve(yv);
  }
  const double ssres = (yv - a * beta).squaredNorm();
  return std::clamp(1.0 - ssres / sstot, 0.0, 1.0);
}

ProbeReport disentanglement_probe(const Cam2Model& model, const Dataset& data,
                                  std::size_t samples, std::uint64_t seed) {
  if (!has_causal_modules(model.variant())) {
    throw ValidationError("probe needs a variant with causal modules");
  }
  std::vector<const Example*> pool;
  for (const DayData& d : data.days) {
    for (const Example& e : d.examples) pool.push_back(&e);
  }
  if (pool.size() < 2) throw DataError("probe: not enough examples");
  const std::vector<std::size_t> order = batch_order(pool.size(), seed, 0, kProbeStream);
  const std::size_t n = std::min(samples, pool.size());
  std::vector<const PartitionedFeatures*> rows(n);
  std::vector<double> pop(n), align(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = *pool[order[i]];
    rows[i] = &e.features;
    const ItemProfile& item = data.world.item(e.item);
    const UserProfile& user = data.world.user(e.user);
    pop[i] = data.world.popularity_z(item);
    const double flags = static_cast<double>(item.topic_count());
    double a = 0.0;
    for (std::size_t x = 0; x < user.interests.size(); ++x) {
      a += user.interests[x] * item.topics[x] / flags;
    }
    align[i] = a;
  }
  const FeatureBatch batch = FeatureBatch::from_rows(data.schema, rows);
  const Cam2Model::Embeddings emb = model.embeddings(batch);
  ProbeReport rep;
  rep.samples = n;
  const nn::Tensor* e[2] = {&emb.conformity, &emb.relevance};
  const std::vector<double>* targets[2] = {&pop, &align};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      bool ridge = false;
      rep.r2[i][j] = probe_r2(*e[i], *targets[j], &ridge);
      rep.ridge_fallback = rep.ridge_fallback || ridge;
    }
  }
  return rep;
}

RunResult finish_run(const RunConfig& config, const Dataset& data, TrainState& state,
                     std::vector<MetricsRow> rows) {
  RunResult r;
  r.variant = std::string(to_string(state.model.variant()));
  r.seed = state.seed;
  r.config_hash = state.config_hash;
  r.rows = std::move(rows);
  r.ne = run_ne(r.rows);
  const std::size_t tasks = data.config.num_tasks();
  r.ne_task.assign(tasks, 0.0);
  for (const MetricsRow& row : r.rows) {
    for (std::size_t t = 0; t < tasks; ++t) r.ne_task[t] += row.holdout.ne[t];
  }
  for (double& v : r.ne_task) v /= static_cast<double>(r.rows.size());
  const int replay_day = static_cast<int>(data.num_days());
  const ReplayCandidates cands = make_replay_candidates(
      data, replay_day, config.eval.replay_candidates, config.eval.replay_seed);
  r.replay = counterfactual_replay(state.model, data, cands, config.eval);
  if (has_causal_modules(state.model.variant())) {
    r.probe = disentanglement_probe(state.model, data, config.eval.probe_samples,
                                    config.eval.replay_seed);
  }
  return r;
}

RunResult run_single(const RunConfig& config, const Dataset& data, Variant variant,
                     std::uint64_t seed, const RunHooks& hooks) {
  Cam2Config model = config.model;
  model.variant = variant;
  TrainState state = init_state(model, config.trainer, data, seed);
  if (hooks.resume_from) {
    state = load_checkpoint(*hooks.resume_from, data.schema, state.config_hash,
                            data.config_hash);
  }
  ExperimentOptions opts;
  opts.log = hooks.log;
  opts.stop_after_day = hooks.stop_after_day;
  if (!hooks.checkpoint_dir.empty()) {
    opts.on_day_end = [&](const TrainState& s, const MetricsRow& row) {
      char name[96];
      std::snprintf(name, sizeof(name), "%s_s%llu_day%02d.ckpt",
                    std::string(to_string(variant)).c_str(),
                    static_cast<unsigned long long>(seed), row.train_day);
      save_checkpoint(s, hooks.checkpoint_dir / name);
    };
  }
  std::vector<MetricsRow> rows = run_experiment(state, data, opts);
  const int last = static_cast<int>(data.num_days()) - 1;
  if (state.last_day < last) {
    RunResult r;
    r.variant = std::string(to_string(variant));
    r.seed = seed;
    r.config_hash = state.config_hash;
    r.rows = std::move(rows);
    r.ok = false;
    r.error = "stopped after day " + std::to_string(state.last_day);
    return r;
  }
  return finish_run(config, data, state, std::move(rows));
}

AblationResult ablation_run(const RunConfig& config, const Dataset& data,
                            std::span<const Variant> variants,
                            std::span<const std::uint64_t> seeds, const RunHooks& hooks) {
  if (seeds.size() < 5) {
    throw ValidationError("ablation needs at least 5 seeds, got " +
                          std::to_string(seeds.size()));
  }
  AblationResult out;
  for (Variant v : variants) {
    for (std::uint64_t s : seeds) {
      try {
        RunHooks h = hooks;
        h.resume_from.reset();
        h.stop_after_day = 0;
        out.runs.push_back(run_single(config, data, v, s, h));
      } catch (const Error& e) {
        RunResult failed;
        failed.variant = std::string(to_string(v));
        failed.seed = s;
        failed.ok = false;
        failed.error = e.what();
        out.runs.push_back(std::move(failed));
      }
      if (!out.runs.back().ok) out.partial = true;
    }
  }
  std::sort(out.runs.begin(), out.runs.end(), [](const RunResult& a, const RunResult& b) {
    const Variant va = parse_variant(a.variant);
    const Variant vb = parse_variant(b.variant);
    if (va != vb) return va < vb;
    return a.seed < b.seed;
  });
  return out;
}

double sign_test_p(std::span<const double> deltas) {
  std::size_t neg = 0;
  std::size_t pos = 0;
  for (double d : deltas) {
    if (d < 0.0) ++neg;
    if (d > 0.0) ++pos;
  }
  const std::size_t n = neg + pos;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(neg, pos);
  // Two-sided exact binomial tail with p = 1/2.
  double tail = 0.0;
  double c = 1.0;  // C(n, i)
  for (std::size_t i = 0; i <= k; ++i) {
    if (i > 0) c = c * static_cast<double>(n - i + 1) / static_cast<double>(i);
    tail += c;
  }
  return std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
}

double median(std::vector<double> v) {
  if (v.empty()) throw UndefinedMetricError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::optional<double> reference_delta_pct(Variant v) {
  switch (v) {
    case Variant::kBaseline:
      return 0.0;
    case Variant::kProposed:
      return -0.139;
    case Variant::kTaskArch:
      return -0.060;
    case Variant::kJointLoss:
      return -0.016;
    case Variant::kAllFeats:
      return 0.029;
  }
  return std::nullopt;
}

json to_json(const ReplayStats& r) {
  json age = json::array();
  for (std::size_t b = 0; b < kAgeBuckets; ++b) {
    age.push_back({{"bucket", kAgeBucketNames[b]},
                   {"impressions", r.age[b].impressions},
                   {"engagements", r.age[b].engagements}});
  }
  auto cohort = [](const CohortStats& c) {
    return json{{"users", c.users}, {"impressions", c.impressions},
                {"engagements", c.engagements}};
  };
  return {{"day", r.day},
          {"users", r.users},
          {"impressions", r.impressions},
          {"engagements", r.engagements},
          {"task_positives", r.task_positives},
          {"tail", {{"quantiles", r.tail.quantiles},
                    {"item_counts", r.tail.item_counts},
                    {"bottom80_impression_share", r.tail.bottom80_impression_share}}},
          {"age", age},
          {"casual", cohort(r.casual)},
          {"regular", cohort(r.regular)}};
}

ReplayStats replay_from_json(const json& j) {
  ReplayStats r;
  r.day = j.at("day").get<int>();
  r.users = j.at("users").get<std::size_t>();
  r.impressions = j.at("impressions").get<std::uint64_t>();
  r.engagements = j.at("engagements").get<std::uint64_t>();
  r.task_positives = j.at("task_positives").get<std::vector<std::uint64_t>>();
  const json& t = j.at("tail");
  r.tail.quantiles = t.at("quantiles").get<std::vector<double>>();
  r.tail.item_counts = t.at("item_counts").get<std::vector<std::size_t>>();
  r.tail.bottom80_impression_share = t.at("bottom80_impression_share").get<double>();
  const json& age = j.at("age");
  if (age.size() != kAgeBuckets) throw DataError("replay: expected 4 age buckets");
  for (std::size_t b = 0; b < kAgeBuckets; ++b) {
    r.age[b].impressions = age[b].at("impressions").get<std::uint64_t>();
    r.age[b].engagements = age[b].at("engagements").get<std::uint64_t>();
  }
  auto cohort = [](const json& c) {
    CohortStats s;
    s.users = c.at("users").get<std::uint64_t>();
    s.impressions = c.at("impressions").get<std::uint64_t>();
    s.engagements = c.at("engagements").get<std::uint64_t>();
    return s;
  };
  r.casual = cohort(j.at("casual"));
  r.regular = cohort(j.at("regular"));
  return r;
}

json to_json(const ProbeReport& p) {
  return {{"samples", p.samples},
          {"r2_conformity_popularity", p.r2[0][0]},
          {"r2_conformity_alignment", p.r2[0][1]},
          {"r2_relevance_popularity", p.r2[1][0]},
          {"r2_relevance_alignment", p.r2[1][1]},
          {"ridge_fallback", p.ridge_fallback}};
}

ProbeReport probe_from_json(const json& j) {
  ProbeReport p;
  p.samples = j.at("samples").get<std::size_t>();
  p.r2[0][0] = j.at("r2_conformity_popularity").get<double>();
  p.r2[0][1] = j.at("r2_conformity_alignment").get<double>();
  p.r2[1][0] = j.at("r2_relevance_popularity").get<double>();
  p.r2[1][1] = j.at("r2_relevance_alignment").get<double>();
  p.ridge_fallback = j.at("ridge_fallback").get<bool>();
  return p;
}

namespace {

json row_to_json(const MetricsRow& row) {
  const LossReport& l = row.train.mean;
  json loss = {{"task", l.task}, {"total", l.total}, {"steps", row.train.steps},
               {"examples", l.batch_size}};
  if (l.has_causal) {
    loss["conformity"] = l.conformity;
    loss["relevance"] = l.relevance;
    loss["mixture"] = l.mixture;
  }
  return {{"variant", row.variant},
          {"seed", row.seed},
          {"train_day", row.train_day},
          {"eval_day", row.eval_day},
          {"loss", loss},
          {"ne", row.holdout.ne},
          {"ne_aggregated", row.holdout.ne_aggregated},
          {"base_rate", row.holdout.base_rate},
          {"holdout_examples", row.holdout.examples},
          {"config_hash", row.config_hash}};
}

MetricsRow row_from_json(const json& j) {
  MetricsRow row;
  row.variant = j.at("variant").get<std::string>();
  row.seed = j.at("seed").get<std::uint64_t>();
  row.train_day = j.at("train_day").get<int>();
  row.eval_day = j.at("eval_day").get<int>();
  const json& loss = j.at("loss");
  row.train.day = row.train_day;
  row.train.steps = loss.at("steps").get<std::size_t>();
  row.train.mean.task = loss.at("task").get<std::vector<double>>();
  row.train.mean.total = loss.at("total").get<double>();
  row.train.mean.batch_size = loss.at("examples").get<std::size_t>();
  row.train.mean.has_causal = loss.contains("conformity");
  if (row.train.mean.has_causal) {
    row.train.mean.conformity = loss.at("conformity").get<double>();
    row.train.mean.relevance = loss.at("relevance").get<double>();
    row.train.mean.mixture = loss.at("mixture").get<double>();
  }
  row.holdout.day = row.eval_day;
  row.holdout.ne = j.at("ne").get<std::vector<double>>();
  row.holdout.ne_aggregated = j.at("ne_aggregated").get<double>();
  row.holdout.base_rate = j.at("base_rate").get<std::vector<double>>();
  row.holdout.examples = j.at("holdout_examples").get<std::size_t>();
  row.config_hash = j.at("config_hash").get<std::string>();
  return row;
}

std::string run_stem(const std::string& variant, std::uint64_t seed) {
  std::string v = variant;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  return v + "_s" + std::to_string(seed);
}

}  // namespace

void write_run_artifacts(const RunResult& run, const fs::path& metrics_dir,
                         std::size_t num_tasks) {
  fs::create_directories(metrics_dir);
  const std::string stem = run_stem(run.variant, run.seed);
  {
    std::ofstream tsv(metrics_dir / ("metrics_" + stem + ".tsv"), std::ios::trunc);
    tsv << metrics_header(num_tasks) << '\n';
    for (const MetricsRow& row : run.rows) tsv << metrics_line(row) << '\n';
    if (!tsv) throw DataError("cannot write metrics for " + stem);
  }
  json rows = json::array();
  for (const MetricsRow& row : run.rows) rows.push_back(row_to_json(row));
  json j = {{"variant", run.variant}, {"seed", run.seed},   {"ok", run.ok},
            {"error", run.error},     {"config_hash", run.config_hash},
            {"rows", rows}};
  if (run.ok) {
    j["ne"] = run.ne;
    j["ne_task"] = run.ne_task;
  }
  if (run.replay) j["replay"] = to_json(*run.replay);
  if (run.probe) j["probe"] = to_json(*run.probe);
  std::ofstream out(metrics_dir / ("run_" + stem + ".json"), std::ios::trunc);
  out << j.dump(1) << '\n';
  if (!out) throw DataError("cannot write run summary for " + stem);
}

std::vector<RunResult> read_run_artifacts(const fs::path& metrics_dir) {
  std::vector<RunResult> runs;
  if (fs::is_directory(metrics_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(metrics_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
      std::ifstream in(p);
      json j;
      try {
        in >> j;
        RunResult r;
        r.variant = std::string(to_string(parse_variant(j.at("variant").get<std::string>())));
        r.seed = j.at("seed").get<std::uint64_t>();
        r.ok = j.at("ok").get<bool>();
        r.error = j.at("error").get<std::string>();
        r.config_hash = j.at("config_hash").get<std::string>();
        for (const json& row : j.at("rows")) {
          r.rows.push_back(row_from_json(row));
          if (r.rows.back().config_hash != r.config_hash) {
            throw MismatchError(p.string() + ": row config hash differs from the run");
          }
        }
        if (r.ok) {
          r.ne = j.at("ne").get<double>();
          r.ne_task = j.at("ne_task").get<std::vector<double>>();
        }
        if (j.contains("replay")) r.replay = replay_from_json(j.at("replay"));
        if (j.contains("probe")) r.probe = probe_from_json(j.at("probe"));
        runs.push_back(std::move(r));
      } catch (const json::exception& e) {
        throw DataError(p.string() + " is malformed: " + e.what());
      }
    }
  }
  if (runs.empty()) {
    throw DataError("no metrics found in " + metrics_dir.string());
  }
  return runs;
}

}  // namespace cam2
