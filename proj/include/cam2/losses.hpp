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
#include <span>
#include <vector>

#include "cam2/nn/ops.hpp"

namespace cam2 {

// Predictions are kept inside [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

double clip_probability(double p);

struct LossWeights {
  std::vector<double> task;  // w_t
  double conformity = 0.3;   // w_C
  double relevance = 0.3;    // w_R

  // All weights >= 0 and at least one task weight > 0.
  void validate() const;
};

struct LossReport {
  std::vector<double> task;  // L_t
  double conformity = 0.0;   // L_C
  double relevance = 0.0;    // L_R
  double mixture = 0.0;      // BCE of the Pr(t) decomposition (diagnostic)
  double total = 0.0;        // sum_t w_t L_t + w_C L_C + w_R L_R
  std::size_t batch_size = 0;
  bool has_causal = false;
};

// Batch mean of | cbar - |u + i| | (squared residual when `squared`).
double conformity_loss(std::span<const double> cbar, std::span<const double> u,
                       std::span<const double> i, bool squared = false);

// Batch mean over rows of sum_x | rbar_x - u_x * i_x |. Each argument is
// [batch * k] row-major.
double relevance_loss(std::span<const double> rbar, std::span<const double> ux,
                      std::span<const double> ix, std::size_t k,
                      bool squared = false);

// Batch mean binary cross-entropy on clipped probabilities.
double task_loss(std::span<const double> p, std::span<const double> y);

// Weighted sum of the report's components. Throws ValidationError when the
// weight count differs from the task count.
double total_loss(const LossReport& report, const LossWeights& weights);

double mixture_decomposition(double p_conformity, double p_relevance, double w1,
                             double w2);

// Mean BCE of the predictions over the BCE of the constant base-rate
// predictor. Throws UndefinedMetricError unless both classes are present.
double normalized_cross_entropy(std::span<const double> predictions,
                                std::span<const double> labels);

namespace tape_loss {

// Differentiable counterparts of the functions above; targets are constants.
nn::Var conformity(nn::Var cbar, nn::Var u, nn::Var i, bool squared);
nn::Var relevance(nn::Var rbar, nn::Var ux, nn::Var ix, bool squared);
nn::Var task(nn::Var p, const nn::Tensor& y);

}  // namespace tape_loss

}  // namespace cam2
