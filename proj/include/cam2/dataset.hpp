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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cam2/model.hpp"
#include "cam2/schema.hpp"
#include "cam2/world.hpp"

namespace cam2 {

struct Example {
  int day = 0;
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::vector<double> raw;        // schema order, before normalisation
  PartitionedFeatures features;   // normalised with the day's stats
  double x = 0.5;
  std::vector<std::uint8_t> labels;
  double true_conformity = 0.0;
  double true_relevance = 0.0;
};

struct DayData {
  int day = 0;
  std::vector<Example> examples;
  NormStats norm;
};

struct Dataset {
  DatagenConfig config;
  std::string config_hash;
  Schema schema;
  World world;
  std::vector<DayData> days;  // days[i].day == i + 1

  std::size_t num_days() const { return days.size(); }
  // Throws DataError when the day is not part of the dataset.
  const DayData& day(int d) const;
  std::size_t num_events() const;
};

// Generates the world, simulates config.days days and derives features.
Dataset build_dataset(const DatagenConfig& config);

// Normalises raw rows in place into examples (per-day z-scoring).
void finalize_day(DayData& day, const Schema& schema);

// History fold over days [1, through_day].
Histories fold_history(const Dataset& data, int through_day);

// Writes day_XX.tsv, schema.tsv, world.json and manifest.json. Refuses a
// non-empty directory unless force is set.
void write_dataset(const Dataset& data, const std::filesystem::path& dir,
                   bool force);

// Verifies the manifest and every checksum before parsing. Throws
// ChecksumError on tampered files and MismatchError on hash disagreements.
Dataset load_dataset(const std::filesystem::path& dir);

std::string day_file_name(int day);
std::vector<std::string> day_file_columns(const Schema& schema,
                                          std::size_t num_tasks);

nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j, const DatagenConfig& config);

struct Batch {
  FeatureBatch features;
  Targets targets;
};

Batch make_batch(const Dataset& data, const DayData& day,
                 std::span<const std::size_t> rows);
Batch make_batch(const Dataset& data, const DayData& day);

}  // namespace cam2
