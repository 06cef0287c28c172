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
#include <string>

#include "cam2/nn/ops.hpp"
#include "cam2/nn/parameter.hpp"

namespace cam2::nn {

// Fully connected layer. Weights are [in, out], initialised
// uniform(+-sqrt(6 / (in + out))); biases start at zero.
struct DenseLayer {
  Parameter* weights = nullptr;
  Parameter* bias = nullptr;

  std::size_t in() const { return weights->value.rows(); }
  std::size_t out() const { return weights->value.cols(); }
  Var forward(Tape& tape, Var x) const;
};

// x + fc2(relu(fc1(x))).
struct ResidualBlock {
  DenseLayer fc1;
  DenseLayer fc2;

  Var forward(Tape& tape, Var x) const;
};

struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  Parameter* rows = nullptr;

  Var lookup(Tape& tape, std::span<const int> indices) const;
};

// Each parameter draws its initial values from a stream derived from
// (seed, id), so identically named parameters initialise identically no
// matter what else the store contains.
DenseLayer make_dense(ParameterStore& store, const std::string& prefix,
                      std::size_t in, std::size_t out, std::uint64_t seed);
// Dense layer over [x, extra inputs]: the first `in` rows are drawn exactly as
// make_dense(in, out) would draw them; the `extra` rows use the Xavier range
// of the full fan-in times extra_scale (0 gives exact zeros).
DenseLayer make_widened_dense(ParameterStore& store, const std::string& prefix,
                              std::size_t in, std::size_t extra, std::size_t out,
                              std::uint64_t seed, double extra_scale);
ResidualBlock make_residual_block(ParameterStore& store,
                                  const std::string& prefix, std::size_t width,
                                  std::uint64_t seed);
EmbeddingTable make_embedding(ParameterStore& store, const std::string& prefix,
                              std::size_t vocab_size, std::size_t dim,
                              std::uint64_t seed);

}  // namespace cam2::nn
