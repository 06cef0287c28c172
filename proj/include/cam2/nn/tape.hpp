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
#include <functional>
#include <vector>

#include "cam2/nn/parameter.hpp"
#include "cam2/nn/tensor.hpp"

namespace cam2::nn {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order and
// backward() replays their local rules in strict reverse order. A node only
// keeps a backward rule when at least one input requires a gradient, so
// constants and everything downstream of a stop_gradient barrier carry no
// gradient at all.
class Tape {
 public:
  // Receives the tape and the id of the node whose rule is being replayed.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
  // Forward identity that blocks every gradient path through it.
  Var barrier(Var input);

  // Barriers emit these values, in creation order, instead of their inputs.
  // Lets a finite-difference check hold stop-gradient outputs constant the
  // way backward() does.
  void freeze_barriers(std::vector<Tensor> values);
  // Values emitted by the barriers recorded so far.
  std::vector<Tensor> barrier_values() const;

  // Populates Parameter::grad (accumulating) with dLoss/dParameter.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  // Gradient buffer of a node, allocated as zeros on first touch. Callers in
  // backward rules must check requires_grad() first.
  Tensor& accum(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  std::size_t barrier_count() const { return barriers_; }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> barrier_ids_;
  std::vector<Tensor> frozen_;
  std::size_t barriers_ = 0;
  bool grad_enabled_;
};

}  // namespace cam2::nn
