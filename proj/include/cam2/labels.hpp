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
#include <span>
#include <utility>
#include <vector>

namespace cam2 {

// Static split point on the causal scalar X.
class Threshold {
 public:
  explicit Threshold(double value);
  double value() const { return value_; }

 private:
  double value_;
};

struct CausalLabels {
  int conformity = 0;
  int relevance = 0;
  std::vector<double> per_interest;  // relevance masked by item topics

  friend bool operator==(const CausalLabels&, const CausalLabels&) = default;
};

// An engagement with X >= thresh is conformity-driven, one with X < thresh is
// relevance-driven; no engagement yields all zeros. Throws ValidationError when
// X is outside [0, 1].
CausalLabels causal_labels(bool engaged, double x, Threshold thresh,
                           std::span<const std::uint8_t> item_topics);

// (w1, w2) = softmax(conformity_logit, relevance_logit).
std::pair<double, double> mixture_weights(double conformity_logit,
                                          double relevance_logit);

}  // namespace cam2
