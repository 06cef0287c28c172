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
#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "cam2/error.hpp"
#include "cam2/eval.hpp"
#include "fixtures.hpp"

namespace cam2 {
namespace {

namespace fs = std::filesystem;
using testing::tiny_datagen;
using testing::tiny_model;

World flat_world(std::size_t n_items, int birth_day = 0) {
  World w;
  w.config.n_items = n_items;
  for (std::size_t i = 0; i < n_items; ++i) {
    ItemProfile it;
    it.id = static_cast<std::uint32_t>(i);
    it.popularity_rank = i + 1;
    it.birth_day = birth_day;
    w.items.push_back(it);
  }
  return w;
}

TEST(FinalScore, SingleTaskIsThePrediction) {
  const std::vector<double> p = {0.37};
  const std::vector<double> w = {2.5};
  EXPECT_DOUBLE_EQ(final_score(p, w), 2.5 * 0.37);
}

TEST(FinalScore, EqualPredictionsGiveWeightMass) {
  const std::vector<double> p = {0.4, 0.4, 0.4};
  const std::vector<double> w = {1.0, 0.5, 0.25};
  EXPECT_NEAR(final_score(p, w), 0.4 * 1.75, 1e-15);
}

TEST(FinalScore, ScalingWeightsKeepsTheOrder) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> w = {1.0, 0.3, 2.0};
  std::vector<double> w3 = w;
  for (double& x : w3) x *= 3.0;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a = {u(rng), u(rng), u(rng)}, b = {u(rng), u(rng), u(rng)};
    EXPECT_EQ(final_score(a, w) < final_score(b, w), final_score(a, w3) < final_score(b, w3));
  }
}

TEST(FinalScore, RejectsBadWeights) {
  const std::vector<double> p = {0.1, 0.2};
  EXPECT_THROW(final_score(p, std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(final_score(p, std::vector<double>{1.0, -0.1}), ValidationError);
  EXPECT_THROW(final_score(p, std::vector<double>{0.0, 0.0}), ValidationError);
}

TEST(TopK, MatchesFullSort) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint32_t> items(100);
  std::iota(items.begin(), items.end(), 1000u);
  std::shuffle(items.begin(), items.end(), rng);
  std::vector<double> scores(100);
  for (double& s : scores) s = std::round(u(rng) * 20.0) / 20.0;  // plenty of ties
  std::vector<RankedItem> all;
  for (std::size_t i = 0; i < items.size(); ++i) all.push_back({items[i], scores[i]});
  std::sort(all.begin(), all.end(), [](const RankedItem& a, const RankedItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  const auto top = top_k(items, scores, 10);
  ASSERT_EQ(top.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(top[i], all[i]) << i;
}

TEST(TopK, TiesBreakByItemId) {
  const std::vector<std::uint32_t> items = {9, 3, 5};
  const std::vector<double> scores = {0.5, 0.5, 0.5};
  const auto top = top_k(items, scores, 3);
  EXPECT_EQ(top[0].item, 3u);
  EXPECT_EQ(top[1].item, 5u);
  EXPECT_EQ(top[2].item, 9u);
}

TEST(TopK, EdgeCases) {
  const std::vector<std::uint32_t> one = {4};
  const std::vector<double> s = {0.2};
  const auto top = top_k(one, s, 10);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].item, 4u);
  EXPECT_THROW(top_k(one, s, 0), ValidationError);
  EXPECT_THROW(top_k(one, std::vector<double>{0.1, 0.2}, 1), ValidationError);
}

TEST(TailCoverage, FourItemExample) {
  const World w = flat_world(4);
  const std::vector<ExposureRecord> log = {
      {0, 100, 40}, {1, 100, 30}, {2, 100, 20}, {3, 100, 10}};
  const TailCoverage t = tail_coverage(log, w);
  ASSERT_EQ(t.item_counts.size(), 2u);
  EXPECT_EQ(t.item_counts[0], 2u);
  EXPECT_EQ(t.item_counts[1], 3u);
}

TEST(TailCoverage, UniformVolume) {
  const World w = flat_world(100);
  std::vector<ExposureRecord> log;
  for (std::uint32_t i = 0; i < 100; ++i) log.push_back({i, 3, 1});
  const TailCoverage t = tail_coverage(log, w);
  EXPECT_EQ(t.item_counts[0], 50u);
  EXPECT_EQ(t.item_counts[1], 75u);
  // ranks 21..100 are the bottom 80%
  EXPECT_NEAR(t.bottom80_impression_share, 0.8, 1e-12);
}

TEST(TailCoverage, SingleItemAndErrors) {
  const World w = flat_world(3);
  const std::vector<ExposureRecord> one = {{1, 5, 2}};
  EXPECT_EQ(tail_coverage(one, w).item_counts, (std::vector<std::size_t>{1, 1}));
  EXPECT_THROW(tail_coverage(std::vector<ExposureRecord>{}, w), DataError);
  EXPECT_THROW(tail_coverage(std::vector<ExposureRecord>{{0, 4, 0}}, w), DataError);
  EXPECT_THROW(tail_coverage(one, w, {0.0}), ValidationError);
}

TEST(TailCoverage, MonotoneInQuantile) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> v(0, 50);
  const World w = flat_world(60);
  std::vector<ExposureRecord> log;
  for (std::uint32_t i = 0; i < 60; ++i) log.push_back({i, 60, static_cast<std::uint64_t>(v(rng))});
  const TailCoverage t = tail_coverage(log, w, {0.1, 0.3, 0.5, 0.75, 0.9, 1.0});
  for (std::size_t i = 1; i < t.item_counts.size(); ++i) {
    EXPECT_LE(t.item_counts[i - 1], t.item_counts[i]);
  }
}

TEST(AgeBuckets, Boundaries) {
  EXPECT_EQ(age_bucket(0), 0u);
  EXPECT_EQ(age_bucket(1), 1u);
  EXPECT_EQ(age_bucket(2), 1u);
  EXPECT_EQ(age_bucket(3), 2u);
  EXPECT_EQ(age_bucket(9), 2u);
  EXPECT_EQ(age_bucket(10), 3u);
  EXPECT_THROW(age_bucket(-1), DataError);
}

TEST(AgeBuckets, BornOnTheEventDay) {
  const World w = flat_world(5, 4);
  std::vector<AgedEvent> log;
  for (std::uint32_t i = 0; i < 5; ++i) log.push_back({4, i, i % 2u});
  const auto by_age = engagement_by_item_age(log, w);
  EXPECT_EQ(by_age[0].impressions, 5u);
  EXPECT_EQ(by_age[0].engagements, 2u);
  for (std::size_t b = 1; b < kAgeBuckets; ++b) EXPECT_EQ(by_age[b].impressions, 0u);
  std::vector<AgedEvent> early = {{3, 0, 0}};
  EXPECT_THROW(engagement_by_item_age(early, w), DataError);
}

TEST(Cohorts, CasualRule) {
  Histories h(4);
  h.users[1].active_days = {5};
  h.users[2].active_days = {3, 6};
  h.users[3].active_days = {1, 2, 3, 4};
  const std::vector<bool> c = casual_users(h, 8, CohortRule{1, 2, 7});
  EXPECT_FALSE(c[0]);  // inactive
  EXPECT_TRUE(c[1]);
  EXPECT_TRUE(c[2]);   // exactly two days
  EXPECT_FALSE(c[3]);
  EXPECT_THROW(casual_users(h, 8, CohortRule{1, 2, 8}), ValidationError);
}

TEST(Stats, SignTestAndMedian) {
  const std::vector<double> five_neg = {-1, -2, -0.5, -3, -0.1};
  EXPECT_NEAR(sign_test_p(five_neg), 0.0625, 1e-15);
  const std::vector<double> four_one = {-1, -2, -0.5, 3, -0.1};
  EXPECT_NEAR(sign_test_p(four_one), 0.375, 1e-15);
  EXPECT_DOUBLE_EQ(sign_test_p(std::vector<double>{0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(relative_delta_pct(0.98, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(relative_delta_pct(0.0, 0.0), 0.0);
}

TEST(Probe, ConstantTargetAndRange) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Tensor x = nn::Tensor::matrix(200, 3);
  for (double& v : x.storage()) v = g(rng);
  const std::vector<double> flat(200, 1.5);
  EXPECT_DOUBLE_EQ(probe_r2(x, flat), 0.0);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = 2.0 * x.at(i, 0) - x.at(i, 2) + 0.5 * g(rng);
  const double r2 = probe_r2(x, y);
  EXPECT_GT(r2, 0.8);
  EXPECT_LE(r2, 1.0);
  std::vector<double> exact(200);
  for (std::size_t i = 0; i < 200; ++i) exact[i] = 1.0 + x.at(i, 1);
  EXPECT_NEAR(probe_r2(x, exact), 1.0, 1e-12);
  EXPECT_THROW(probe_r2(x, std::vector<double>(10, 0.0)), DimensionError);
}

TEST(Probe, RankDeficientDesignUsesRidge) {
  nn::Tensor x = nn::Tensor::matrix(50, 2);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x.at(i, 0) = static_cast<double>(i);
    x.at(i, 1) = 2.0 * static_cast<double>(i);
    y[i] = static_cast<double>(i % 7);
  }
  bool ridge = false;
  const double r2 = probe_r2(x, y, &ridge);
  EXPECT_TRUE(ridge);
  EXPECT_GE(r2, 0.0);
  EXPECT_LE(r2, 1.0);
}

class EvalRunTest : public ::testing::Test {
 protected:
  static RunConfig config() {
    RunConfig c;
    c.datagen = tiny_datagen(8);
    c.model = tiny_model(Variant::kProposed);
    c.trainer.batch_size = 32;
    c.eval.combine_weights = {1.0, 0.7};
    c.eval.replay_candidates = 12;
    c.eval.replay_k = 3;
    c.eval.probe_samples = 200;
    c.eval.cohort_window_days = 3;
    return c;
  }
  static void SetUpTestSuite() { data_ = new Dataset(build_dataset(config().datagen)); }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }
  static Dataset* data_;
};
Dataset* EvalRunTest::data_ = nullptr;

TEST_F(EvalRunTest, ReplayCandidatesAreFrozen) {
  const auto a = make_replay_candidates(*data_, 8, 12, 4);
  const auto b = make_replay_candidates(*data_, 8, 12, 4);
  EXPECT_EQ(a.users, b.users);
  EXPECT_EQ(a.items, b.items);
  ASSERT_FALSE(a.users.empty());
  for (const auto& items : a.items) {
    EXPECT_EQ(items.size(), 12u);
    EXPECT_TRUE(std::adjacent_find(items.begin(), items.end()) == items.end());
  }
}

TEST_F(EvalRunTest, ReplayIsDeterministic) {
  const RunConfig c = config();
  const Cam2Model m(c.model, data_->schema);
  const auto cands = make_replay_candidates(*data_, 8, 12, 4);
  const ReplayStats a = counterfactual_replay(m, *data_, cands, c.eval);
  const ReplayStats b = counterfactual_replay(m, *data_, cands, c.eval);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(a.impressions, a.users * 3u);
  EXPECT_EQ(a.task_positives.size(), 2u);
  EXPECT_EQ(replay_from_json(to_json(a)).impressions, a.impressions);
}

TEST_F(EvalRunTest, SummaryAndReport) {
  const RunConfig c = config();
  std::vector<RunResult> runs;
  for (Variant v : {Variant::kBaseline, Variant::kProposed}) {
    runs.push_back(run_single(c, *data_, v, 1));
  }
  ASSERT_TRUE(runs[0].ok) << runs[0].error;
  ASSERT_TRUE(runs[1].ok) << runs[1].error;
  EXPECT_EQ(runs[0].rows.size(), 7u);
  EXPECT_FALSE(runs[0].probe.has_value());
  ASSERT_TRUE(runs[1].probe.has_value());
  for (const auto& row : runs[1].probe->r2) {
    for (double r2 : row) {
      EXPECT_GE(r2, 0.0);
      EXPECT_LE(r2, 1.0);
    }
  }
  const fs::path dir = fs::temp_directory_path() / "cam2_eval_artifacts";
  fs::remove_all(dir);
  for (const auto& r : runs) write_run_artifacts(r, dir, 2);
  const auto back = read_run_artifacts(dir);
  ASSERT_EQ(back.size(), 2u);
  const nlohmann::json s = build_summary(back);
  EXPECT_TRUE(s["baseline_present"].get<bool>());
  EXPECT_EQ(s["age_buckets"].size(), kAgeBuckets);
  EXPECT_EQ(s, build_summary(runs));
  const std::string text = render_report(s);
  EXPECT_NE(text.find("Proposed"), std::string::npos);
  fs::remove_all(dir);
}

TEST(ReadArtifacts, EmptyDirectory) {
  const fs::path dir = fs::temp_directory_path() / "cam2_eval_empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    read_run_artifacts(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no metrics found"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Ablation, NeedsFiveSeeds) {
  RunConfig c;
  c.datagen = tiny_datagen(3);
  c.model = tiny_model(Variant::kBaseline);
  const Dataset d = build_dataset(c.datagen);
  const std::vector<Variant> v = {Variant::kBaseline};
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  EXPECT_THROW(ablation_run(c, d, v, seeds), ValidationError);
}

}  // namespace
}  // namespace cam2
