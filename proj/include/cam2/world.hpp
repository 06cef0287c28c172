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

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cam2/schema.hpp"

namespace cam2 {

// Generative coefficients of one engagement task: the logit is
// alpha * conformity_term + beta * relevance_term + gamma.
struct TaskParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

struct DatagenConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 5000;
  std::size_t topics = 8;
  std::size_t days = 14;
  double zipf_s = 1.1;
  double conformity_a = 2.0;  // Beta(a, b) prior of user conformity
  double conformity_b = 5.0;
  double exposure_eta = 0.7;  // exposure weight pop^eta
  double mean_activity = 6.0;  // expected impressions per user per day
  double activity_shape = 1.0;  // gamma shape of per-user activity rates
  double interest_concentration = 0.3;  // symmetric Dirichlet
  std::size_t new_items_per_day = 50;
  int max_initial_age = 30;  // initial items are born on days [-max, 0]
  std::size_t age_buckets = 6;
  std::size_t content_types = 4;
  std::vector<TaskParams> tasks = {
      {2.0, 8.0, -2.6}, {1.0, 10.0, -3.6}, {3.0, 3.0, -3.4}};
  std::uint64_t seed = 7;

  std::size_t num_tasks() const { return tasks.size(); }
  // Throws ValidationError on counts < 1, topics < 2, or no tasks.
  void validate() const;

  friend bool operator==(const DatagenConfig&, const DatagenConfig&) = default;
};

struct UserProfile {
  std::uint32_t id = 0;
  double conformity = 0.0;        // c_u in [0, 1]
  std::vector<double> interests;  // on the topic simplex
  double activity_rate = 0.0;
  int age_bucket = 0;
};

struct ItemProfile {
  std::uint32_t id = 0;
  std::size_t popularity_rank = 1;  // 1 = most popular
  double popularity = 1.0;          // rank^-s
  std::vector<std::uint8_t> topics;  // multi-hot, 1..3 set
  double quality = 0.5;
  int birth_day = 0;
  int content_type = 0;

  std::size_t topic_count() const;
};

struct World {
  DatagenConfig config;
  std::vector<UserProfile> users;
  std::vector<ItemProfile> items;  // grows as simulate_days injects items
  double log_pop_mean = 0.0;
  double log_pop_sd = 0.0;
  std::size_t top_decile_rank = 1;  // ranks <= this are "top decile"

  // Standardised log popularity under the initial catalogue's moments.
  double popularity_z(const ItemProfile& item) const;
  bool top_decile(const ItemProfile& item) const {
    return item.popularity_rank <= top_decile_rank;
  }
  const UserProfile& user(std::uint32_t id) const;
  const ItemProfile& item(std::uint32_t id) const;
};

World generate_world(const DatagenConfig& config);

// Logged generative terms of one (user, item, task) triple.
struct EngagementTerms {
  double conformity = 0.0;  // c_u * z(log pop_i)
  double relevance = 0.0;   // <theta_u, phi_i / |phi_i|_1> * q_i
  double probability = 0.5;
};

// Conformity and relevance terms are task independent.
EngagementTerms engagement_terms(const World& world, const UserProfile& user,
                                 const ItemProfile& item);
double engagement_probability(const World& world, const UserProfile& user,
                              const ItemProfile& item, std::size_t task);
double engagement_probability(const TaskParams& task, double conformity,
                              double relevance);

struct InteractionEvent {
  int day = 0;
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::vector<std::uint8_t> labels;  // one per task
  double true_conformity = 0.0;
  double true_relevance = 0.0;
};

struct UserHistory {
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;          // anchor-task positives
  std::uint64_t popular_engagements = 0;  // ... on top-decile items
  std::vector<int> active_days;           // days with >= 1 impression
};

struct ItemHistory {
  std::uint64_t impressions = 0;
  std::uint64_t engagements = 0;
};

// Running engagement history; a fold over completed days.
struct Histories {
  std::vector<UserHistory> users;
  std::vector<ItemHistory> items;

  explicit Histories(std::size_t n_users = 0) : users(n_users) {}
  void apply(const World& world, std::span<const InteractionEvent> events,
             int day);
};

struct DayLog {
  int day = 0;
  std::vector<InteractionEvent> events;  // sorted by (user, item)
  Histories history;  // state at the start of the day (days < day)
};

// Draws from pop^eta over the items alive on `day`.
class ExposureSampler {
 public:
  ExposureSampler(const World& world, int day, double eta);

  std::uint32_t operator()(std::mt19937_64& rng) {
    return live_[dist_(rng)];
  }
  const std::vector<std::uint32_t>& live_items() const { return live_; }

 private:
  std::vector<std::uint32_t> live_;
  std::discrete_distribution<std::size_t> dist_;
};

// Simulates days 1..days, injecting new items into `world` as it goes.
std::vector<DayLog> simulate_days(World& world, std::size_t days,
                                  std::uint64_t seed);

// Share of the user's engagements on top-decile items; 0.5 without history.
double derive_x(const UserHistory& history);

// Raw (not yet standardised) feature vector in default_schema order, from
// history strictly before the event's day.
std::vector<double> derive_features(const InteractionEvent& event,
                                    const Histories& history,
                                    const World& world);

// Per-day standardisation of the dense raw columns.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> sd;  // 1 for categorical columns and constant columns

  void apply(std::span<double> raw) const;
};

// Mean/sd over rows of a raw feature matrix; categorical columns get (0, 1).
NormStats compute_norm_stats(const std::vector<std::vector<double>>& raw,
                             const Schema& schema);

}  // namespace cam2
