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

#include <span>
#include <string_view>
#include <vector>

#include "cam2/nn/tape.hpp"

namespace cam2::nn {

enum class Activation { kRelu, kSigmoid };

// Throws ValidationError on anything but "relu" / "sigmoid".
Activation parse_activation(std::string_view name);

// x[batch, in] * w[in, out] + b[out].
Var dense(Var x, Var w, Var b);
Var matmul(Var a, Var b);

Var activation(Var x, Activation kind);
Var relu(Var x);
Var sigmoid(Var x);

// x + w2 * relu(w1 * x + b1) + b2; inner layers must map d -> d.
Var residual_block(Var x, Var w1, Var b1, Var w2, Var b2);

Var stop_gradient(Var x);

// Gathers rows of `table` [vocab, dim]. Throws IndexError on a row outside
// [0, vocab).
Var embedding_lookup(Var table, std::span<const int> indices);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // element-wise
Var scale(Var a, double s);
// a * s where s holds a single element.
Var scale_by(Var a, Var s);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);  // [rows, cols] -> [rows, 1]
Var abs(Var a);
Var square(Var a);
// Gradient passes only where lo <= x <= hi.
Var clamp(Var a, double lo, double hi);
// Softmax over all elements of a single-row tensor.
Var softmax(Var a);

// Mean binary cross-entropy of probabilities p against constant targets.
Var binary_cross_entropy(Var p, const Tensor& targets);

}  // namespace cam2::nn
