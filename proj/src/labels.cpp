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
#include "cam2/labels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cam2/error.hpp"

namespace cam2 {

Threshold::Threshold(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError("thresh must lie in [0, 1], got " +
                          std::to_string(value));
  }
}

CausalLabels causal_labels(bool engaged, double x, Threshold thresh,
                           std::span<const std::uint8_t> item_topics) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw ValidationError("causal scalar X must lie in [0, 1], got " +
                          std::to_string(x));
  }
  CausalLabels out;
  const bool conform = x >= thresh.value();
  out.conformity = engaged && conform ? 1 : 0;
  out.relevance = engaged && !conform ? 1 : 0;
  out.per_interest.resize(item_topics.size());
  for (std::size_t k = 0; k < item_topics.size(); ++k) {
    out.per_interest[k] = out.relevance && item_topics[k] ? 1.0 : 0.0;
  }
  return out;
}

std::pair<double, double> mixture_weights(double conformity_logit,
                                          double relevance_logit) {
  const double m = std::max(conformity_logit, relevance_logit);
  const double a = std::exp(conformity_logit - m);
  const double b = std::exp(relevance_logit - m);
  return {a / (a + b), b / (a + b)};
}

}  // namespace cam2
