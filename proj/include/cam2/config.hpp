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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cam2/model.hpp"
#include "cam2/nn/adam.hpp"
#include "cam2/world.hpp"

namespace cam2 {

struct TrainerConfig {
  nn::AdamConfig adam;
  std::size_t batch_size = 256;
  std::size_t epochs_per_day = 1;
  // Aggregated NE: unweighted mean of per-task NE unless weights are given.
  std::vector<double> aggregation_weights;
  bool audit_first_batch = true;

  void validate(std::size_t num_tasks) const;
  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct EvalConfig {
  std::vector<double> combine_weights = {1.0, 1.0, 1.0};
  std::size_t replay_candidates = 50;
  std::size_t replay_k = 10;
  std::uint64_t replay_seed = 20260;
  std::size_t probe_samples = 10000;
  int cohort_window_days = 7;

  void validate(std::size_t num_tasks) const;
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct RunConfig {
  DatagenConfig datagen;
  Cam2Config model;
  TrainerConfig trainer;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs";

  // Cross-section checks: task counts and topic widths must agree.
  void validate() const;
};

nlohmann::json to_json(const DatagenConfig& c);
nlohmann::json to_json(const Cam2Config& c);
nlohmann::json to_json(const TrainerConfig& c);
nlohmann::json to_json(const EvalConfig& c);
nlohmann::json to_json(const RunConfig& c);

// Missing keys keep their defaults; unknown keys raise ValidationError.
DatagenConfig datagen_from_json(const nlohmann::json& j);
Cam2Config model_from_json(const nlohmann::json& j);
TrainerConfig trainer_from_json(const nlohmann::json& j);
EvalConfig eval_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

// SHA-256 over the canonical JSON dump.
std::string config_hash(const DatagenConfig& c);
// Hash of everything that determines a trained model: model + trainer.
std::string config_hash(const Cam2Config& model, const TrainerConfig& trainer);

}  // namespace cam2
