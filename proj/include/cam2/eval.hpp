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
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cam2/config.hpp"
#include "cam2/dataset.hpp"
#include "cam2/model.hpp"
#include "cam2/trainer.hpp"

namespace cam2 {

// Throws ValidationError on arity mismatch, negative or all-zero weights.
double final_score(std::span<const double> predictions, std::span<const double> weights);

struct RankedItem {
  std::uint32_t item = 0;
  double score = 0.0;
  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

struct RankedList {
  std::uint32_t user = 0;
  std::vector<RankedItem> items;  // score descending, ties by ascending item id
};

// Top-k of already scored candidates. Throws ValidationError when k < 1 or
// the sizes differ.
std::vector<RankedItem> top_k(std::span<const std::uint32_t> items,
                              std::span<const double> scores, std::size_t k);

// Features of (user, item) pairs as they would appear on `day`, using the
// history of days < day and the given normalisation.
std::vector<PartitionedFeatures> candidate_features(
    const Dataset& data, const Histories& history, const NormStats& norm, int day,
    std::uint32_t user, std::span<const std::uint32_t> items);

RankedList rank_topk(const Cam2Model& model, const Dataset& data,
                     const Histories& history, const NormStats& norm, int day,
                     std::uint32_t user, std::span<const std::uint32_t> candidates,
                     std::size_t k, std::span<const double> combine_weights);

struct TailCoverage {
  std::vector<double> quantiles;
  std::vector<std::size_t> item_counts;  // one per quantile
  double bottom80_impression_share = 0.0;
};

struct ExposureRecord {
  std::uint32_t item = 0;
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;
};

// Throws DataError on an empty log or a log without engagement.
TailCoverage tail_coverage(std::span<const ExposureRecord> log, const World& world,
                           std::vector<double> quantiles = {0.5, 0.75});

inline constexpr std::size_t kAgeBuckets = 4;
inline constexpr std::array<const char*, kAgeBuckets> kAgeBucketNames = {
    "[0-1 day)", "[1-3 days)", "[3-10 days)", "[10+ days)"};
// Bucket index of an age in days; throws DataError for negative ages.
std::size_t age_bucket(int age_days);

struct RateCounter {
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;
  double rate() const {
    return impressions ? static_cast<double>(engagements) / static_cast<double>(impressions)
                       : 0.0;
  }
};

struct AgedEvent {
  int day = 0;
  std::uint32_t item = 0;
  std::uint64_t engagements = 0;
};

std::array<RateCounter, kAgeBuckets> engagement_by_item_age(
    std::span<const AgedEvent> log, const World& world);

// Relative change in percent; 0 when both are 0.
double relative_delta_pct(double treatment, double control);

struct CohortRule {
  int min_active_days = 1;
  int max_active_days = 2;
  int window_days = 28;
};

// Casual tags frozen over [start_day - window, start_day - 1]. Throws
// ValidationError when the window reaches before day 1.
std::vector<bool> casual_users(const Histories& history, int start_day,
                               const CohortRule& rule);

struct CohortStats {
  std::uint64_t users = 0;
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;
  double per_user() const {
    return users ? static_cast<double>(engagements) / static_cast<double>(users) : 0.0;
  }
};

struct ReplayCandidates {
  int day = 0;
  std::vector<std::uint32_t> users;
  std::vector<std::vector<std::uint32_t>> items;  // per user, distinct
};

// Frozen candidate sets for the users active on `day`, drawn from the
// logging exposure distribution. Identical for every model.
ReplayCandidates make_replay_candidates(const Dataset& data, int day,
                                        std::size_t per_user, std::uint64_t seed);

struct ReplayStats {
  int day = 0;
  std::size_t users = 0;
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;  // positive labels summed over tasks
  std::vector<std::uint64_t> task_positives;
  TailCoverage tail;
  std::array<RateCounter, kAgeBuckets> age{};
  CohortStats casual;
  CohortStats regular;
};

// Ranks every frozen candidate set, shows the top k and replays engagement
// through the generative model with common random numbers per
// (user, item, task), so two rankers showing the same item see the same
// outcome.
ReplayStats counterfactual_replay(const Cam2Model& model, const Dataset& data,
                                  const ReplayCandidates& candidates,
                                  const EvalConfig& eval);

struct ProbeReport {
  std::size_t samples = 0;
  // r2[embedding][target]; embedding 0 = e_C, 1 = e_R; target 0 = popularity,
  // 1 = interest alignment.
  std::array<std::array<double, 2>, 2> r2{};
  bool ridge_fallback = false;
};

// Least-squares R^2 of y on [1, x]; ridge 1e-6 when the design is rank
// deficient. Constant y gives 0.
double probe_r2(const nn::Tensor& x, std::span<const double> y, bool* ridge_used = nullptr);

ProbeReport disentanglement_probe(const Cam2Model& model, const Dataset& data,
                                  std::size_t samples, std::uint64_t seed);

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::string config_hash;
  std::vector<MetricsRow> rows;
  double ne = 0.0;  // mean aggregated holdout NE over the run
  std::vector<double> ne_task;
  std::optional<ReplayStats> replay;
  std::optional<ProbeReport> probe;
};

struct RunHooks {
  std::ostream* log = nullptr;
  // Directory for per-day checkpoints; empty disables them.
  std::filesystem::path checkpoint_dir;
  int stop_after_day = 0;
  std::optional<std::filesystem::path> resume_from;
};

// Trains one (variant, seed), then replays and probes the final model.
RunResult run_single(const RunConfig& config, const Dataset& data, Variant variant,
                     std::uint64_t seed, const RunHooks& hooks = {});

// Reduces already finished runs (replay and probe included) into a result.
RunResult finish_run(const RunConfig& config, const Dataset& data, TrainState& state,
                     std::vector<MetricsRow> rows);

struct AblationResult {
  std::vector<RunResult> runs;  // sorted by (variant, seed)
  bool partial = false;
};

// Requires at least five seeds. Failed runs are kept with ok = false.
AblationResult ablation_run(const RunConfig& config, const Dataset& data,
                            std::span<const Variant> variants,
                            std::span<const std::uint64_t> seeds,
                            const RunHooks& hooks = {});

// Two-sided exact sign test on paired differences (zeros dropped).
double sign_test_p(std::span<const double> deltas);
double median(std::vector<double> v);

// Reference deltas of the original study, shown for context only.
std::optional<double> reference_delta_pct(Variant v);

nlohmann::json to_json(const ReplayStats& r);
ReplayStats replay_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProbeReport& p);
ProbeReport probe_from_json(const nlohmann::json& j);

// metrics_<variant>_s<seed>.tsv plus run_<variant>_s<seed>.json.
void write_run_artifacts(const RunResult& run, const std::filesystem::path& metrics_dir,
                         std::size_t num_tasks);
// Throws DataError("no metrics found ...") when the directory has no runs.
std::vector<RunResult> read_run_artifacts(const std::filesystem::path& metrics_dir);

nlohmann::json build_summary(const std::vector<RunResult>& runs);
// Every number in the text is formatted from the summary document.
std::string render_report(const nlohmann::json& summary);

}  // namespace cam2
