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
#include "cam2/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cam2/error.hpp"
#include "cam2/hash.hpp"

namespace cam2 {

namespace {

constexpr std::uint64_t kUserStream = 1;
constexpr std::uint64_t kItemStream = 2;
constexpr std::uint64_t kNewItemStream = 3;
constexpr std::uint64_t kEventStream = 4;

double sample_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::size_t k,
                                     double concentration) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> v(k);
  double total = 0.0;
  for (double& x : v) {
    x = g(rng);
    total += x;
  }
  if (!(total > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(k));
    return v;
  }
  for (double& x : v) x /= total;
  return v;
}

ItemProfile sample_item(std::mt19937_64& rng, const DatagenConfig& c,
                        std::uint32_t id, std::size_t rank, int birth_day) {
  ItemProfile item;
  item.id = id;
  item.popularity_rank = rank;
  item.popularity = std::pow(static_cast<double>(rank), -c.zipf_s);
  item.topics.assign(c.topics, 0);
  std::uniform_int_distribution<std::size_t> count(
      1, std::min<std::size_t>(3, c.topics));
  std::vector<std::size_t> order(c.topics);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) item.topics[order[i]] = 1;
  item.quality = sample_beta(rng, 2.0, 2.0);
  item.birth_day = birth_day;
  std::uniform_int_distribution<int> ct(0, static_cast<int>(c.content_types) - 1);
  item.content_type = ct(rng);
  return item;
}

}  // namespace

void DatagenConfig::validate() const {
  if (n_users < 1 || n_items < 1) {
    throw ValidationError("datagen: n_users and n_items must be >= 1");
  }
  if (topics < 2) throw ValidationError("datagen: topics must be >= 2");
  if (days < 2) throw ValidationError("datagen: days must be >= 2");
  if (tasks.empty()) throw ValidationError("datagen: at least one task required");
  if (zipf_s < 0.0) throw ValidationError("datagen: zipf_s must be >= 0");
  if (conformity_a <= 0.0 || conformity_b <= 0.0) {
    throw ValidationError("datagen: conformity Beta parameters must be > 0");
  }
  if (mean_activity < 0.0 || activity_shape <= 0.0) {
    throw ValidationError("datagen: activity must be >= 0 with shape > 0");
  }
  if (interest_concentration <= 0.0) {
    throw ValidationError("datagen: interest_concentration must be > 0");
  }
  if (age_buckets < 2 || content_types < 2) {
    throw ValidationError("datagen: age_buckets and content_types must be >= 2");
  }
  if (max_initial_age < 0) {
    throw ValidationError("datagen: max_initial_age must be >= 0");
  }
}

std::size_t ItemProfile::topic_count() const {
  return static_cast<std::size_t>(std::count(topics.begin(), topics.end(), 1));
}

double World::popularity_z(const ItemProfile& item) const {
  if (!(log_pop_sd > 0.0)) return 0.0;
  return (std::log(item.popularity) - log_pop_mean) / log_pop_sd;
}

const UserProfile& World::user(std::uint32_t id) const {
  if (id >= users.size()) {
    throw DataError("unknown user id " + std::to_string(id));
  }
  return users[id];
}

const ItemProfile& World::item(std::uint32_t id) const {
  if (id >= items.size()) {
    throw DataError("unknown item id " + std::to_string(id));
  }
  return items[id];
}

World generate_world(const DatagenConfig& config) {
  config.validate();
  World w;
  w.config = config;

  std::mt19937_64 urng(derive_seed(config.seed, kUserStream));
  std::gamma_distribution<double> activity(
      config.activity_shape, config.mean_activity / config.activity_shape);
  std::uniform_int_distribution<int> age(
      0, static_cast<int>(config.age_buckets) - 1);
  w.users.reserve(config.n_users);
  for (std::size_t u = 0; u < config.n_users; ++u) {
    UserProfile p;
    p.id = static_cast<std::uint32_t>(u);
    p.conformity = sample_beta(urng, config.conformity_a, config.conformity_b);
    p.interests =
        sample_dirichlet(urng, config.topics, config.interest_concentration);
    p.activity_rate = config.mean_activity > 0.0 ? activity(urng) : 0.0;
    p.age_bucket = age(urng);
    w.users.push_back(std::move(p));
  }

  std::mt19937_64 irng(derive_seed(config.seed, kItemStream));
  std::vector<std::size_t> ranks(config.n_items);
  std::iota(ranks.begin(), ranks.end(), 1);
  std::shuffle(ranks.begin(), ranks.end(), irng);
  std::uniform_int_distribution<int> birth(-config.max_initial_age, 0);
  w.items.reserve(config.n_items + config.days * config.new_items_per_day);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    const int born = birth(irng);
    w.items.push_back(sample_item(irng, config, static_cast<std::uint32_t>(i),
                                  ranks[i], born));
  }

  double sum = 0.0;
  double sq = 0.0;
  for (const ItemProfile& it : w.items) {
    const double l = std::log(it.popularity);
    sum += l;
    sq += l * l;
  }
  const double n = static_cast<double>(w.items.size());
  w.log_pop_mean = sum / n;
  const double var = std::max(0.0, sq / n - w.log_pop_mean * w.log_pop_mean);
  w.log_pop_sd = std::sqrt(var);
  // An all-equal catalogue has no spread; keep z at exactly 0.
  if (w.log_pop_sd < 1e-12) w.log_pop_sd = 0.0;
  w.top_decile_rank = std::max<std::size_t>(1, config.n_items / 10);
  return w;
}

EngagementTerms engagement_terms(const World& world, const UserProfile& user,
                                 const ItemProfile& item) {
  EngagementTerms t;
  t.conformity = user.conformity * world.popularity_z(item);
  const double norm = static_cast<double>(item.topic_count());
  double dot = 0.0;
  for (std::size_t x = 0; x < item.topics.size(); ++x) {
    if (item.topics[x]) dot += user.interests[x];
  }
  t.relevance = norm > 0.0 ? dot / norm * item.quality : 0.0;
  return t;
}

double engagement_probability(const TaskParams& task, double conformity,
                              double relevance) {
  const double logit =
      task.alpha * conformity + task.beta * relevance + task.gamma;
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

double engagement_probability(const World& world, const UserProfile& user,
                              const ItemProfile& item, std::size_t task) {
  const EngagementTerms t = engagement_terms(world, user, item);
  return engagement_probability(world.config.tasks.at(task), t.conformity,
                                t.relevance);
}

void Histories::apply(const World& world,
                      std::span<const InteractionEvent> events, int day) {
  if (users.size() < world.users.size()) users.resize(world.users.size());
  if (items.size() < world.items.size()) items.resize(world.items.size());
  for (const InteractionEvent& e : events) {
    UserHistory& u = users[e.user];
    ItemHistory& i = items[e.item];
    if (u.active_days.empty() || u.active_days.back() != day) {
      u.active_days.push_back(day);
    }
    ++u.impressions;
    ++i.impressions;
    if (!e.labels.empty() && e.labels[0]) {
      ++u.engagements;
      ++i.engagements;
      if (world.top_decile(world.items[e.item])) ++u.popular_engagements;
    }
  }
}

ExposureSampler::ExposureSampler(const World& world, int day, double eta) {
  std::vector<double> weights;
  for (const ItemProfile& it : world.items) {
    if (it.birth_day <= day) {
      live_.push_back(it.id);
      weights.push_back(std::pow(it.popularity, eta));
    }
  }
  if (live_.empty()) throw DataError("no live items on day " + std::to_string(day));
  dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

std::vector<DayLog> simulate_days(World& world, std::size_t days,
                                  std::uint64_t seed) {
  const DatagenConfig& c = world.config;
  std::vector<DayLog> logs;
  Histories history(world.users.size());
  history.items.resize(world.items.size());
  for (std::size_t d = 1; d <= days; ++d) {
    const int day = static_cast<int>(d);
    std::mt19937_64 nrng(derive_seed(seed, kNewItemStream, d));
    for (std::size_t n = 0; n < c.new_items_per_day; ++n) {
      std::uniform_int_distribution<std::size_t> rank(1, c.n_items);
      const std::size_t r = rank(nrng);
      const auto id = static_cast<std::uint32_t>(world.items.size());
      world.items.push_back(sample_item(nrng, c, id, r, day));
    }
    history.items.resize(world.items.size());

    DayLog log;
    log.day = day;
    log.history = history;
    ExposureSampler exposure(world, day, c.exposure_eta);
    const std::size_t live = exposure.live_items().size();
    for (const UserProfile& u : world.users) {
      if (!(u.activity_rate > 0.0)) continue;
      std::mt19937_64 rng(derive_seed(seed, kEventStream, d, u.id));
      std::poisson_distribution<int> count(u.activity_rate);
      const std::size_t n = std::min<std::size_t>(count(rng), live);
      std::vector<std::uint32_t> chosen;
      std::unordered_set<std::uint32_t> seen;
      // Rejection keeps impressions distinct per (user, day).
      for (std::size_t attempts = 0; chosen.size() < n && attempts < 50 * n + 100;
           ++attempts) {
        const std::uint32_t item = exposure(rng);
        if (seen.insert(item).second) chosen.push_back(item);
      }
      std::sort(chosen.begin(), chosen.end());
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (std::uint32_t item : chosen) {
        const ItemProfile& it = world.items[item];
        const EngagementTerms terms = engagement_terms(world, u, it);
        InteractionEvent e;
        e.day = day;
        e.user = u.id;
        e.item = item;
        e.true_conformity = terms.conformity;
        e.true_relevance = terms.relevance;
        e.labels.resize(c.tasks.size());
        for (std::size_t t = 0; t < c.tasks.size(); ++t) {
          const double p =
              engagement_probability(c.tasks[t], terms.conformity, terms.relevance);
          e.labels[t] = unif(rng) < p ? 1 : 0;
        }
        log.events.push_back(std::move(e));
      }
    }
    history.apply(world, log.events, day);
    logs.push_back(std::move(log));
  }
  return logs;
}

double derive_x(const UserHistory& history) {
  if (history.engagements == 0) return 0.5;
  return static_cast<double>(history.popular_engagements) /
         static_cast<double>(history.engagements);
}

std::vector<double> derive_features(const InteractionEvent& event,
                                    const Histories& history,
                                    const World& world) {
  const UserProfile& u = world.user(event.user);
  const ItemProfile& it = world.item(event.item);
  const UserHistory uh =
      event.user < history.users.size() ? history.users[event.user] : UserHistory{};
  const ItemHistory ih =
      event.item < history.items.size() ? history.items[event.item] : ItemHistory{};

  std::vector<double> raw;
  raw.reserve(8 + 2 * world.config.topics);
  raw.push_back(std::log1p(static_cast<double>(ih.impressions)));
  raw.push_back(std::log1p(static_cast<double>(ih.engagements)));
  raw.push_back((static_cast<double>(ih.engagements) + 1.0) /
                (static_cast<double>(ih.impressions) + 2.0));
  raw.push_back(std::log1p(static_cast<double>(uh.engagements)));
  raw.push_back((static_cast<double>(uh.popular_engagements) + 1.0) /
                (static_cast<double>(uh.engagements) + 2.0));
  raw.push_back(static_cast<double>(u.age_bucket));
  raw.insert(raw.end(), u.interests.begin(), u.interests.end());
  for (std::uint8_t f : it.topics) raw.push_back(f);
  raw.push_back(it.quality);
  raw.push_back(static_cast<double>(it.content_type));
  return raw;
}

void NormStats::apply(std::span<double> raw) const {
  for (std::size_t c = 0; c < raw.size(); ++c) {
    raw[c] = (raw[c] - mean[c]) / sd[c];
  }
}

NormStats compute_norm_stats(const std::vector<std::vector<double>>& raw,
                             const Schema& schema) {
  const std::size_t w = schema.raw_width();
  NormStats s;
  s.mean.assign(w, 0.0);
  s.sd.assign(w, 1.0);
  std::vector<bool> dense(w, false);
  for (std::size_t f = 0; f < schema.features().size(); ++f) {
    const FeatureSpec& spec = schema.features()[f];
    if (spec.encoding != Encoding::kDense) continue;
    for (std::size_t c = 0; c < spec.width; ++c) {
      dense[schema.raw_offset(f) + c] = true;
    }
  }
  if (raw.empty()) return s;
  const double n = static_cast<double>(raw.size());
  for (std::size_t c = 0; c < w; ++c) {
    if (!dense[c]) continue;
    double sum = 0.0;
    for (const auto& row : raw) sum += row[c];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& row : raw) ss += (row[c] - mean) * (row[c] - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[c] = mean;
    s.sd[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

}  // namespace cam2
