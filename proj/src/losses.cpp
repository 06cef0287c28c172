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
#include "cam2/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cam2/error.hpp"

namespace cam2 {

double clip_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

void LossWeights::validate() const {
  bool any = false;
  for (double w : task) {
    if (!(w >= 0.0)) throw ValidationError("task loss weights must be >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw ValidationError("at least one task loss weight must be > 0");
  if (!(conformity >= 0.0) || !(relevance >= 0.0)) {
    throw ValidationError("causal loss weights must be >= 0");
  }
}

namespace {

double residual(double r, bool squared) {
  return squared ? r * r : std::fabs(r);
}

}  // namespace

double conformity_loss(std::span<const double> cbar, std::span<const double> u,
                       std::span<const double> i, bool squared) {
  if (cbar.size() != u.size() || cbar.size() != i.size() || cbar.empty()) {
    throw DimensionError("conformity_loss: mismatched or empty batch");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < cbar.size(); ++b) {
    acc += residual(cbar[b] - std::fabs(u[b] + i[b]), squared);
  }
  return acc / static_cast<double>(cbar.size());
}

double relevance_loss(std::span<const double> rbar, std::span<const double> ux,
                      std::span<const double> ix, std::size_t k, bool squared) {
  if (rbar.size() != ux.size() || rbar.size() != ix.size()) {
    throw DimensionError("relevance_loss: length mismatch " +
                         std::to_string(rbar.size()) + " / " +
                         std::to_string(ux.size()) + " / " +
                         std::to_string(ix.size()));
  }
  if (k == 0 || rbar.empty() || rbar.size() % k != 0) {
    throw DimensionError("relevance_loss: length not a multiple of k");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < rbar.size(); ++j) {
    acc += residual(rbar[j] - ux[j] * ix[j], squared);
  }
  return acc / static_cast<double>(rbar.size() / k);
}

double task_loss(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size() || p.empty()) {
    throw DimensionError("task_loss: mismatched or empty batch");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double q = clip_probability(p[b]);
    acc -= y[b] * std::log(q) + (1.0 - y[b]) * std::log1p(-q);
  }
  return acc / static_cast<double>(p.size());
}

double total_loss(const LossReport& report, const LossWeights& weights) {
  if (weights.task.size() != report.task.size()) {
    throw ValidationError("total_loss: " + std::to_string(weights.task.size()) +
                          " task weights for " +
                          std::to_string(report.task.size()) + " tasks");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < report.task.size(); ++t) {
    total += weights.task[t] * report.task[t];
  }
  if (report.has_causal) {
    total += weights.conformity * report.conformity +
             weights.relevance * report.relevance;
  }
  return total;
}

double mixture_decomposition(double p_conformity, double p_relevance, double w1,
                             double w2) {
  return w1 * p_conformity + w2 * p_relevance;
}

double normalized_cross_entropy(std::span<const double> predictions,
                                std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("normalized_cross_entropy: length mismatch");
  }
  double positives = 0.0;
  for (double y : labels) positives += y;
  const double n = static_cast<double>(labels.size());
  if (labels.empty() || positives <= 0.0 || positives >= n) {
    throw UndefinedMetricError(
        "normalized cross-entropy is undefined without both positive and "
        "negative labels");
  }
  const double base = positives / n;
  const double base_ce =
      -(base * std::log(base) + (1.0 - base) * std::log1p(-base));
  return task_loss(predictions, labels) / base_ce;
}

namespace tape_loss {

nn::Var conformity(nn::Var cbar, nn::Var u, nn::Var i, bool squared) {
  nn::Var r = nn::sub(cbar, nn::abs(nn::add(u, i)));
  return nn::mean(squared ? nn::square(r) : nn::abs(r));
}

nn::Var relevance(nn::Var rbar, nn::Var ux, nn::Var ix, bool squared) {
  nn::Var r = nn::sub(rbar, nn::mul(ux, ix));
  nn::Var per_row = nn::row_sum(squared ? nn::square(r) : nn::abs(r));
  return nn::mean(per_row);
}

nn::Var task(nn::Var p, const nn::Tensor& y) {
  return nn::binary_cross_entropy(p, y);
}

}  // namespace tape_loss

}  // namespace cam2
