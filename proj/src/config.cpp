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
#include "cam2/config.hpp"

#include <fstream>
#include <set>

#include "cam2/error.hpp"
#include "cam2/hash.hpp"

namespace cam2 {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
  if (!j.is_object()) {
    throw ValidationError("config section '" + section + "' must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError("unknown config key '" + section + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config key '" + section + "." + key +
                          "' has the wrong type: " + e.what());
  }
}

}  // namespace

void TrainerConfig::validate(std::size_t num_tasks) const {
  if (!(adam.lr > 0.0)) throw ValidationError("trainer.lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ValidationError("trainer betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ValidationError("trainer.eps must be > 0");
  if (batch_size < 1) throw ValidationError("trainer.batch_size must be >= 1");
  if (epochs_per_day < 1) throw ValidationError("trainer.epochs_per_day must be >= 1");
  if (!aggregation_weights.empty()) {
    if (aggregation_weights.size() != num_tasks) {
      throw ValidationError("trainer.aggregation_weights needs one weight per task");
    }
    double total = 0.0;
    for (double w : aggregation_weights) {
      if (!(w >= 0.0)) throw ValidationError("aggregation weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ValidationError("aggregation weights sum to 0");
  }
}

void EvalConfig::validate(std::size_t num_tasks) const {
  if (combine_weights.size() != num_tasks) {
    throw ValidationError("eval.combine_weights needs one weight per task");
  }
  double total = 0.0;
  for (double w : combine_weights) {
    if (!(w >= 0.0)) throw ValidationError("eval.combine_weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("eval.combine_weights are all zero");
  if (replay_candidates < 1 || replay_k < 1) {
    throw ValidationError("eval.replay_candidates and eval.replay_k must be >= 1");
  }
  if (probe_samples < 2) throw ValidationError("eval.probe_samples must be >= 2");
  if (cohort_window_days < 1) {
    throw ValidationError("eval.cohort_window_days must be >= 1");
  }
}

void RunConfig::validate() const {
  datagen.validate();
  model.validate();
  trainer.validate(model.num_tasks);
  eval.validate(model.num_tasks);
  if (model.num_tasks != datagen.num_tasks()) {
    throw ValidationError("model.num_tasks (" + std::to_string(model.num_tasks) +
                          ") differs from datagen task count (" +
                          std::to_string(datagen.num_tasks()) + ")");
  }
  if (model.topics != datagen.topics) {
    throw ValidationError("model.topics must equal datagen.topics");
  }
  if (seeds.empty()) throw ValidationError("seeds must not be empty");
}

json to_json(const DatagenConfig& c) {
  json tasks = json::array();
  for (const TaskParams& t : c.tasks) {
    tasks.push_back({{"alpha", t.alpha}, {"beta", t.beta}, {"gamma", t.gamma}});
  }
  return {{"n_users", c.n_users},
          {"n_items", c.n_items},
          {"topics", c.topics},
          {"days", c.days},
          {"zipf_s", c.zipf_s},
          {"conformity_a", c.conformity_a},
          {"conformity_b", c.conformity_b},
          {"exposure_eta", c.exposure_eta},
          {"mean_activity", c.mean_activity},
          {"activity_shape", c.activity_shape},
          {"interest_concentration", c.interest_concentration},
          {"new_items_per_day", c.new_items_per_day},
          {"max_initial_age", c.max_initial_age},
          {"age_buckets", c.age_buckets},
          {"content_types", c.content_types},
          {"tasks", tasks},
          {"seed", c.seed}};
}

json to_json(const Cam2Config& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"shared_widths", c.shared_widths},
          {"head_widths", c.head_widths},
          {"causal_width", c.causal_width},
          {"causal_blocks", c.causal_blocks},
          {"embedding_dim", c.embedding_dim},
          {"causal_embedding_dim", c.causal_embedding_dim},
          {"num_tasks", c.num_tasks},
          {"topics", c.topics},
          {"task_weights", c.task_weights},
          {"conformity_weight", c.conformity_weight},
          {"relevance_weight", c.relevance_weight},
          {"thresh", c.thresh},
          {"squared_causal_loss", c.squared_causal_loss},
          {"joint_label_mix", c.joint_label_mix},
          {"anchor_task", c.anchor_task},
          {"embedding_init_scale", c.embedding_init_scale},
          {"seed", c.seed}};
}

json to_json(const TrainerConfig& c) {
  return {{"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"batch_size", c.batch_size},
          {"epochs_per_day", c.epochs_per_day},
          {"aggregation_weights", c.aggregation_weights},
          {"audit_first_batch", c.audit_first_batch}};
}

json to_json(const EvalConfig& c) {
  return {{"combine_weights", c.combine_weights},
          {"replay_candidates", c.replay_candidates},
          {"replay_k", c.replay_k},
          {"replay_seed", c.replay_seed},
          {"probe_samples", c.probe_samples},
          {"cohort_window_days", c.cohort_window_days}};
}

json to_json(const RunConfig& c) {
  return {{"datagen", to_json(c.datagen)},
          {"model", to_json(c.model)},
          {"trainer", to_json(c.trainer)},
          {"eval", to_json(c.eval)},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir}};
}

DatagenConfig datagen_from_json(const json& j) {
  const std::string s = "datagen";
  reject_unknown(j,
                 {"n_users", "n_items", "topics", "days", "zipf_s", "conformity_a",
                  "conformity_b", "exposure_eta", "mean_activity", "activity_shape",
                  "interest_concentration", "new_items_per_day", "max_initial_age",
                  "age_buckets", "content_types", "tasks", "seed"},
                 s);
  DatagenConfig c;
  read(j, "n_users", c.n_users, s);
  read(j, "n_items", c.n_items, s);
  read(j, "topics", c.topics, s);
  read(j, "days", c.days, s);
  read(j, "zipf_s", c.zipf_s, s);
  read(j, "conformity_a", c.conformity_a, s);
  read(j, "conformity_b", c.conformity_b, s);
  read(j, "exposure_eta", c.exposure_eta, s);
  read(j, "mean_activity", c.mean_activity, s);
  read(j, "activity_shape", c.activity_shape, s);
  read(j, "interest_concentration", c.interest_concentration, s);
  read(j, "new_items_per_day", c.new_items_per_day, s);
  read(j, "max_initial_age", c.max_initial_age, s);
  read(j, "age_buckets", c.age_buckets, s);
  read(j, "content_types", c.content_types, s);
  read(j, "seed", c.seed, s);
  if (j.contains("tasks")) {
    if (!j.at("tasks").is_array()) {
      throw ValidationError("datagen.tasks must be an array");
    }
    c.tasks.clear();
    for (const json& t : j.at("tasks")) {
      reject_unknown(t, {"alpha", "beta", "gamma"}, "datagen.tasks[]");
      TaskParams p;
      read(t, "alpha", p.alpha, "datagen.tasks[]");
      read(t, "beta", p.beta, "datagen.tasks[]");
      read(t, "gamma", p.gamma, "datagen.tasks[]");
      c.tasks.push_back(p);
    }
  }
  return c;
}

Cam2Config model_from_json(const json& j) {
  const std::string s = "model";
  reject_unknown(j,
                 {"variant", "shared_widths", "head_widths", "causal_width",
                  "causal_blocks", "embedding_dim", "causal_embedding_dim",
                  "num_tasks", "topics", "task_weights", "conformity_weight",
                  "relevance_weight", "thresh", "squared_causal_loss",
                  "joint_label_mix", "anchor_task", "embedding_init_scale", "seed"},
                 s);
  Cam2Config c;
  if (j.contains("variant")) {
    std::string v;
    read(j, "variant", v, s);
    c.variant = parse_variant(v);
  }
  read(j, "shared_widths", c.shared_widths, s);
  read(j, "head_widths", c.head_widths, s);
  read(j, "causal_width", c.causal_width, s);
  read(j, "causal_blocks", c.causal_blocks, s);
  read(j, "embedding_dim", c.embedding_dim, s);
  read(j, "causal_embedding_dim", c.causal_embedding_dim, s);
  read(j, "num_tasks", c.num_tasks, s);
  read(j, "topics", c.topics, s);
  read(j, "task_weights", c.task_weights, s);
  read(j, "conformity_weight", c.conformity_weight, s);
  read(j, "relevance_weight", c.relevance_weight, s);
  read(j, "thresh", c.thresh, s);
  read(j, "squared_causal_loss", c.squared_causal_loss, s);
  read(j, "joint_label_mix", c.joint_label_mix, s);
  read(j, "anchor_task", c.anchor_task, s);
  read(j, "embedding_init_scale", c.embedding_init_scale, s);
  read(j, "seed", c.seed, s);
  return c;
}

TrainerConfig trainer_from_json(const json& j) {
  const std::string s = "trainer";
  reject_unknown(j,
                 {"lr", "beta1", "beta2", "eps", "batch_size", "epochs_per_day",
                  "aggregation_weights", "audit_first_batch"},
                 s);
  TrainerConfig c;
  read(j, "lr", c.adam.lr, s);
  read(j, "beta1", c.adam.beta1, s);
  read(j, "beta2", c.adam.beta2, s);
  read(j, "eps", c.adam.eps, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "epochs_per_day", c.epochs_per_day, s);
  read(j, "aggregation_weights", c.aggregation_weights, s);
  read(j, "audit_first_batch", c.audit_first_batch, s);
  return c;
}

EvalConfig eval_from_json(const json& j) {
  const std::string s = "eval";
  reject_unknown(j,
                 {"combine_weights", "replay_candidates", "replay_k", "replay_seed",
                  "probe_samples", "cohort_window_days"},
                 s);
  EvalConfig c;
  read(j, "combine_weights", c.combine_weights, s);
  read(j, "replay_candidates", c.replay_candidates, s);
  read(j, "replay_k", c.replay_k, s);
  read(j, "replay_seed", c.replay_seed, s);
  read(j, "probe_samples", c.probe_samples, s);
  read(j, "cohort_window_days", c.cohort_window_days, s);
  return c;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"datagen", "model", "trainer", "eval", "seeds", "output_dir"},
                 "config");
  RunConfig c;
  if (j.contains("datagen")) c.datagen = datagen_from_json(j.at("datagen"));
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("trainer")) c.trainer = trainer_from_json(j.at("trainer"));
  if (j.contains("eval")) c.eval = eval_from_json(j.at("eval"));
  read(j, "seeds", c.seeds, "config");
  read(j, "output_dir", c.output_dir, "config");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const DatagenConfig& c) {
  return sha256_hex(to_json(c).dump());
}

std::string config_hash(const Cam2Config& model, const TrainerConfig& trainer) {
  return sha256_hex(json{{"model", to_json(model)}, {"trainer", to_json(trainer)}}.dump());
}

}  // namespace cam2
