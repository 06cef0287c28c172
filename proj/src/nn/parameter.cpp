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
#include "cam2/nn/parameter.hpp"

#include "cam2/error.hpp"

namespace cam2::nn {

Parameter& ParameterStore::add(std::string id, Tensor value, bool trainable) {
  if (index_.count(id)) throw ValidationError("duplicate parameter id: " + id);
  index_.emplace(id, params_.size());
  params_.push_back(
      std::make_unique<Parameter>(std::move(id), std::move(value), trainable));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw IndexError("unknown parameter id: " + id);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw IndexError("unknown parameter id: " + id);
  return *params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::size_t ParameterStore::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p->id.compare(0, prefix.size(), prefix) == 0) n += p->value.size();
  }
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace cam2::nn
