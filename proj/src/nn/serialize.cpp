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
#include "cam2/nn/serialize.hpp"

namespace cam2::nn {

void ByteWriter::tensor(const Tensor& t) {
  u64(t.shape().size());
  for (std::size_t d : t.shape()) u64(d);
  for (double v : t.values()) f64(v);
}

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  need(n);
  std::string s(bytes_.substr(pos_, n));
  pos_ += n;
  return s;
}

Tensor ByteReader::tensor() {
  const std::uint64_t rank = u64();
  if (rank > 8) throw DataError("implausible tensor rank in payload");
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = u64();
    count *= d;
  }
  need(count * sizeof(double));
  std::vector<double> values(count);
  for (double& v : values) v = f64();
  return Tensor(std::move(shape), std::move(values));
}

void write_parameters(ByteWriter& w, const ParameterStore& params) {
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p->id);
    w.u8(p->trainable ? 1 : 0);
    w.tensor(p->value);
  }
}

void read_parameters_into(ByteReader& r, ParameterStore& params) {
  const std::uint64_t n = r.u64();
  if (n != params.size()) {
    throw MismatchError("checkpoint holds " + std::to_string(n) +
                        " parameters, model has " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    Parameter& p = params[i];
    const std::string id = r.str();
    if (id != p.id) {
      throw MismatchError("checkpoint parameter " + id + " where model expects " +
                          p.id);
    }
    p.trainable = r.u8() != 0;
    Tensor value = r.tensor();
    if (!value.same_shape(p.value)) {
      throw MismatchError("parameter " + id + " shape " + value.shape_string() +
                          " vs model " + p.value.shape_string());
    }
    p.value = std::move(value);
    p.zero_grad();
  }
}

void write_adam_state(ByteWriter& w, const AdamState& state) {
  w.u64(state.step);
  w.u64(state.first_moment.size());
  for (const auto& [id, m] : state.first_moment) {
    w.str(id);
    w.tensor(m);
    w.tensor(state.second_moment.at(id));
  }
}

AdamState read_adam_state(ByteReader& r) {
  AdamState s;
  s.step = r.u64();
  const std::uint64_t n = r.u64();
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = r.str();
    Tensor m = r.tensor();
    Tensor v = r.tensor();
    s.first_moment.emplace(id, std::move(m));
    s.second_moment.emplace(std::move(id), std::move(v));
  }
  return s;
}

}  // namespace cam2::nn
