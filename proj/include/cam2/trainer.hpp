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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cam2/config.hpp"
#include "cam2/dataset.hpp"
#include "cam2/model.hpp"
#include "cam2/nn/adam.hpp"

namespace cam2 {

struct TrainState {
  Cam2Model model;
  TrainerConfig trainer;
  nn::AdamState adam;
  int last_day = 0;
  std::uint64_t seed = 0;  // drives init and per-day shuffles
  std::string config_hash;
  std::string dataset_hash;  // datagen config hash of the training data
  bool audited = false;

  TrainState(Cam2Model m, TrainerConfig t, std::uint64_t s, std::string data_hash);
};

// model.seed is replaced by `seed`, so one RunConfig spans a seed list.
TrainState init_state(const Cam2Config& model, const TrainerConfig& trainer,
                      const Dataset& data, std::uint64_t seed);

// Deterministic row order of a day for a given epoch.
std::vector<std::size_t> batch_order(std::size_t rows, std::uint64_t seed, int day,
                                     std::size_t epoch);

struct DaySummary {
  int day = 0;
  std::size_t steps = 0;
  LossReport mean;  // example-weighted epoch mean of batch reports
};

// Throws SequencingError unless day == state.last_day + 1.
DaySummary train_day(TrainState& state, const Dataset& data, int day);

struct HoldoutMetrics {
  int day = 0;
  std::vector<double> ne;
  double ne_aggregated = 0.0;
  std::vector<double> base_rate;
  std::size_t examples = 0;
};

// Per-task NE of the model on one day, no gradient steps involved.
HoldoutMetrics evaluate_day(const Cam2Model& model, const Dataset& data, int day,
                            const std::vector<double>& aggregation_weights,
                            std::size_t batch_size = 1024);

struct MetricsRow {
  std::string variant;
  std::uint64_t seed = 0;
  int train_day = 0;
  int eval_day = 0;
  DaySummary train;
  HoldoutMetrics holdout;
  std::string config_hash;
};

struct ExperimentOptions {
  int stop_after_day = 0;  // 0 trains through day D-1
  std::function<void(const TrainState&, const MetricsRow&)> on_day_end;
  std::ostream* log = nullptr;
};

// Prequential loop from state.last_day + 1: train on d, score day d + 1.
std::vector<MetricsRow> run_experiment(TrainState& state, const Dataset& data,
                                       const ExperimentOptions& options = {});

// Mean over rows of the aggregated holdout NE.
double run_ne(const std::vector<MetricsRow>& rows);

std::string metrics_header(std::size_t num_tasks);
std::string metrics_line(const MetricsRow& row);
// Progress line printed after every day.
std::string progress_line(const MetricsRow& row);

std::string serialize_state(const TrainState& state);
TrainState deserialize_state(std::string_view bytes, const Schema& schema);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
// Throws ChecksumError if the file is corrupt.
TrainState load_checkpoint(const std::filesystem::path& path, const Schema& schema);
// As above, and refuses (MismatchError) a checkpoint trained under another
// model/trainer config or dataset.
TrainState load_checkpoint(const std::filesystem::path& path, const Schema& schema,
                           const std::string& expected_config_hash,
                           const std::string& expected_dataset_hash);

}  // namespace cam2
