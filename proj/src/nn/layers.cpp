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
#include "cam2/nn/layers.hpp"

#include <cmath>
#include <random>

#include "cam2/hash.hpp"

namespace cam2::nn {

Var DenseLayer::forward(Tape& tape, Var x) const {
  return dense(x, tape.parameter(*weights), tape.parameter(*bias));
}

Var ResidualBlock::forward(Tape& tape, Var x) const {
  return residual_block(x, tape.parameter(*fc1.weights),
                        tape.parameter(*fc1.bias), tape.parameter(*fc2.weights),
                        tape.parameter(*fc2.bias));
}

Var EmbeddingTable::lookup(Tape& tape, std::span<const int> indices) const {
  return embedding_lookup(tape.parameter(*rows), indices);
}

DenseLayer make_dense(ParameterStore& store, const std::string& prefix,
                      std::size_t in, std::size_t out, std::uint64_t seed) {
  const std::string wid = prefix + ".w";
  Tensor w = Tensor::matrix(in, out);
  if (in + out > 0) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::mt19937_64 rng(derive_seed_str(seed, wid));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : w.values()) v = u(rng);
  }
  DenseLayer layer;
  layer.weights = &store.add(wid, std::move(w));
  layer.bias = &store.add(prefix + ".b", Tensor::vector(std::vector<double>(out)));
  return layer;
}

DenseLayer make_widened_dense(ParameterStore& store, const std::string& prefix,
                              std::size_t in, std::size_t extra, std::size_t out,
                              std::uint64_t seed, double extra_scale) {
  DenseLayer base = make_dense(store, prefix, in, out, seed);
  if (extra == 0) return base;
  Tensor w = Tensor::matrix(in + extra, out);
  std::copy(base.weights->value.values().begin(), base.weights->value.values().end(),
            w.values().begin());
  if (extra_scale != 0.0) {
    const double limit = extra_scale * std::sqrt(6.0 / static_cast<double>(in + extra + out));
    std::mt19937_64 rng(derive_seed_str(seed, prefix + ".w.extra"));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = in * out; i < w.size(); ++i) w.values()[i] = u(rng);
  }
  base.weights->value = std::move(w);
  base.weights->grad = Tensor::matrix(in + extra, out);
  return base;
}

ResidualBlock make_residual_block(ParameterStore& store,
                                  const std::string& prefix, std::size_t width,
                                  std::uint64_t seed) {
  return {make_dense(store, prefix + ".fc1", width, width, seed),
          make_dense(store, prefix + ".fc2", width, width, seed)};
}

EmbeddingTable make_embedding(ParameterStore& store, const std::string& prefix,
                              std::size_t vocab_size, std::size_t dim,
                              std::uint64_t seed) {
  const std::string id = prefix + ".rows";
  Tensor rows = Tensor::matrix(vocab_size, dim);
  std::mt19937_64 rng(derive_seed_str(seed, id));
  std::normal_distribution<double> n(0.0, 0.01);
  for (double& v : rows.values()) v = n(rng);
  return {vocab_size, dim, &store.add(id, std::move(rows))};
}

}  // namespace cam2::nn
