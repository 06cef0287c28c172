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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cam2/nn/tensor.hpp"

namespace cam2::nn {

struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;  // same shape as value
  bool trainable = true;

  Parameter(std::string id_, Tensor value_, bool trainable_ = true)
      : id(std::move(id_)),
        value(std::move(value_)),
        grad(value.shape()),
        trainable(trainable_) {}

  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters in creation order. References returned by add() stay valid
// for the store's lifetime.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string id, Tensor value, bool trainable = true);

  Parameter& get(const std::string& id);
  const Parameter& get(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  // Scalar count over parameters whose id starts with `prefix`.
  std::size_t scalar_count(const std::string& prefix) const;

  void zero_grads();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace cam2::nn
