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

#include "cam2/dataset.hpp"
#include "cam2/model.hpp"

namespace cam2::testing {

// 3 topics, 2 tasks, a few hundred events per day.
inline DatagenConfig tiny_datagen(std::size_t days = 4) {
  DatagenConfig c;
  c.n_users = 60;
  c.n_items = 120;
  c.topics = 3;
  c.days = days;
  c.new_items_per_day = 5;
  c.mean_activity = 5.0;
  c.tasks = {{2.0, 8.0, -2.0}, {1.0, 6.0, -2.5}};
  c.seed = 29;
  return c;
}

// Widths <= 8, d_e = 4.
inline Cam2Config tiny_model(Variant v, std::uint64_t seed = 3) {
  Cam2Config c;
  c.variant = v;
  c.shared_widths = {8, 6};
  c.head_widths = {4, 1};
  c.causal_width = 5;
  c.causal_blocks = 1;
  c.embedding_dim = 2;
  c.causal_embedding_dim = 4;
  c.num_tasks = 2;
  c.topics = 3;
  c.task_weights = {1.0, 0.7};
  c.thresh = 0.6;
  c.embedding_init_scale = 1.0;  // keep the embedding paths live
  c.seed = seed;
  return c;
}

inline Batch first_rows(const Dataset& d, int day, std::size_t n) {
  std::vector<std::size_t> rows;
  const DayData& dd = d.day(day);
  for (std::size_t i = 0; i < n && i < dd.examples.size(); ++i) rows.push_back(i);
  return make_batch(d, dd, rows);
}

}  // namespace cam2::testing
