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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cam2/losses.hpp"
#include "cam2/nn/layers.hpp"
#include "cam2/nn/tape.hpp"
#include "cam2/schema.hpp"

namespace cam2 {

// Baseline is the plain multi-task ranker; the other four are the CAM2
// wirings compared in the ablation.
enum class Variant { kBaseline, kProposed, kTaskArch, kJointLoss, kAllFeats };

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::kBaseline, Variant::kProposed, Variant::kTaskArch,
    Variant::kJointLoss, Variant::kAllFeats};

std::string_view to_string(Variant v);
// Case-insensitive; throws ValidationError listing the five variant names.
Variant parse_variant(std::string_view name);
bool has_causal_modules(Variant v);
// Whether task heads see the causal embeddings through a stop-gradient.
bool decoupled(Variant v);

struct Cam2Config {
  Variant variant = Variant::kProposed;
  std::vector<std::size_t> shared_widths = {128, 64};
  std::vector<std::size_t> head_widths = {32, 1};  // last entry is the output
  std::size_t causal_width = 32;
  std::size_t causal_blocks = 2;
  std::size_t embedding_dim = 4;
  std::size_t causal_embedding_dim = 16;  // d_e; 0 disables the concat
  std::size_t num_tasks = 3;
  std::size_t topics = 8;  // k, width of the per-interest heads
  std::vector<double> task_weights = {1.0, 1.0, 1.0};
  double conformity_weight = 0.3;
  double relevance_weight = 0.3;
  double thresh = 0.6;
  bool squared_causal_loss = false;
  // JointLoss: share of the causal losses replaced by BCE on the anchor label.
  double joint_label_mix = 0.5;
  std::size_t anchor_task = 0;
  // Scale of the task-head weights reading e_C/e_R relative to Xavier. Small
  // values start the widened heads close to the Baseline function; exactly 0
  // would cut JointLoss task gradients off the causal modules at step one.
  double embedding_init_scale = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
  LossWeights loss_weights() const;

  friend bool operator==(const Cam2Config&, const Cam2Config&) = default;
};

// Features of a batch, split by bucket. Categorical indices are stored
// column-major: statistical_cat[position][row].
struct FeatureBatch {
  std::size_t size = 0;
  std::string schema_hash;
  nn::Tensor statistical_dense;  // [size, dense_width(statistical)]
  nn::Tensor attribute_dense;    // [size, dense_width(attribute)]
  std::vector<std::vector<int>> statistical_cat;
  std::vector<std::vector<int>> attribute_cat;

  static FeatureBatch from_rows(const Schema& schema,
                                const std::vector<const PartitionedFeatures*>& rows);
};

// Supervision for one batch.
struct Targets {
  nn::Tensor labels;  // [size, num_tasks], binary
  std::vector<double> x;  // causal scalar per row
  nn::Tensor topics;  // [size, k], raw item topic flags
};

struct ForwardOutputs {
  std::vector<nn::Var> task_probs;  // each [size, 1], clipped
  bool has_causal = false;
  nn::Var user_conformity;   // u_hat [size, 1]
  nn::Var item_conformity;   // i_hat [size, 1]
  nn::Var user_interest;     // u_x [size, k]
  nn::Var item_interest;     // i_x [size, k]
  nn::Var conformity_embedding;  // e_C [size, d_e]
  nn::Var relevance_embedding;   // e_R [size, d_e]
  nn::Var shared_output;
};

struct LossVars {
  std::vector<nn::Var> task;
  std::optional<nn::Var> conformity;
  std::optional<nn::Var> relevance;
  std::optional<nn::Var> mixture;
  nn::Var total;      // sum_t w_t L_t + w_C L_C + w_R L_R
  nn::Var objective;  // total + mixture (mixture only reaches its logits)
  LossReport report;
};

enum class ParamGroup { kSharedBottom, kTaskHeads, kConformity, kRelevance, kMixture };
inline constexpr std::size_t kParamGroupCount = 5;
std::string_view to_string(ParamGroup g);
ParamGroup param_group(std::string_view parameter_id);

class Cam2Model {
 public:
  // Throws ValidationError for invalid configs or variant/schema
  // incompatibilities (such as an empty feature group feeding a causal tower).
  Cam2Model(const Cam2Config& config, const Schema& schema);

  Cam2Model(Cam2Model&&) = default;
  Cam2Model& operator=(Cam2Model&&) = default;

  const Cam2Config& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  const std::string& schema_hash() const { return schema_hash_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }
  std::size_t group_scalar_count(ParamGroup g) const;

  // Throws MismatchError when the batch was built under another schema.
  ForwardOutputs forward(nn::Tape& tape, const FeatureBatch& batch) const;
  LossVars losses(nn::Tape& tape, const ForwardOutputs& out,
                  const Targets& targets) const;

  // Per-task probabilities, row-major [size, num_tasks], no gradients.
  std::vector<double> predict(const FeatureBatch& batch) const;

  struct Embeddings {
    nn::Tensor conformity;  // [size, d_e]
    nn::Tensor relevance;
  };
  Embeddings embeddings(const FeatureBatch& batch) const;

 private:
  struct Tower {
    FeatureGroup inputs;
    std::vector<nn::EmbeddingTable> embeddings;
    nn::DenseLayer input_layer;
    std::vector<nn::ResidualBlock> blocks;
    // Linear map of the last block to d_e / 2 that the head reads; absent
    // when d_e == 0.
    std::optional<nn::DenseLayer> projection;
    nn::DenseLayer head;

    // Returns (penultimate activations, sigmoid head output).
    std::pair<nn::Var, nn::Var> forward(nn::Tape& tape,
                                        const FeatureBatch& batch) const;
  };
  struct CausalModule {
    Tower user;
    Tower item;
  };

  Tower make_tower(const std::string& prefix, FeatureGroup inputs,
                   std::size_t head_out);
  static nn::Var gather_inputs(nn::Tape& tape, const FeatureBatch& batch,
                               const FeatureGroup& group,
                               const std::vector<nn::EmbeddingTable>& tables);

  Cam2Config config_;
  std::string schema_hash_;
  nn::ParameterStore params_;
  FeatureGroup shared_inputs_;
  std::vector<nn::EmbeddingTable> shared_embeddings_;
  std::vector<nn::DenseLayer> shared_layers_;
  std::vector<std::vector<nn::DenseLayer>> heads_;
  std::optional<CausalModule> conformity_;
  std::optional<CausalModule> relevance_;
  nn::Parameter* mixture_logits_ = nullptr;
};

// Which loss components put nonzero gradient on which parameter group.
struct ProvenanceReport {
  std::vector<std::string> components;  // "task0".., "conformity", ...
  std::map<std::string, std::array<double, kParamGroupCount>> grad_norm;
  // Provenance bit per (component, group): true iff any gradient entry in
  // the group is nonzero.
  std::map<std::string, std::array<bool, kParamGroupCount>> nonzero;

  bool touches(const std::string& component, ParamGroup g) const;
};

// Runs one forward and a separate backward per loss component. Parameter
// gradients are left zeroed.
ProvenanceReport gradient_provenance(Cam2Model& model, const FeatureBatch& batch,
                                     const Targets& targets);

// Throws Error when the report breaks the variant's decoupling contract.
void check_decoupling(const ProvenanceReport& report, Variant variant);

}  // namespace cam2
