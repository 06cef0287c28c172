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
#include "cam2/nn/tape.hpp"

#include "cam2/error.hpp"

namespace cam2::nn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = grad_enabled_ && p.trainable;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  bool any = false;
  for (std::size_t in : inputs) any = any || nodes_[in].requires_grad;
  n.requires_grad = grad_enabled_ && any;
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::barrier(Var input) {
  Node n;
  if (barriers_ < frozen_.size()) {
    if (!frozen_[barriers_].same_shape(nodes_[input.id].value)) {
      throw DimensionError("frozen barrier " + std::to_string(barriers_) + " has shape " +
                           frozen_[barriers_].shape_string() + ", input is " +
                           nodes_[input.id].value.shape_string());
    }
    n.value = frozen_[barriers_];
  } else {
    n.value = nodes_[input.id].value;
  }
  ++barriers_;
  nodes_.push_back(std::move(n));
  barrier_ids_.push_back(nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

void Tape::freeze_barriers(std::vector<Tensor> values) { frozen_ = std::move(values); }

std::vector<Tensor> Tape::barrier_values() const {
  std::vector<Tensor> out;
  out.reserve(barrier_ids_.size());
  for (std::size_t id : barrier_ids_) out.push_back(nodes_[id].value);
  return out;
}

Tensor& Tape::accum(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: loss recorded on another tape");
  if (value(loss.id).size() != 1) {
    throw DimensionError("backward: loss must be scalar, got shape " +
                         value(loss.id).shape_string());
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!nodes_[loss.id].requires_grad) return;
  accum(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param && n.has_grad) {
      auto g = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
    }
  }
}

}  // namespace cam2::nn
