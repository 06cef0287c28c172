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
#include "cam2/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "cam2/error.hpp"
#include "cam2/labels.hpp"

namespace cam2 {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline:
      return "Baseline";
    case Variant::kProposed:
      return "Proposed";
    case Variant::kTaskArch:
      return "TaskArch";
    case Variant::kJointLoss:
      return "JointLoss";
    case Variant::kAllFeats:
      return "AllFeats";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (Variant v : kAllVariants) {
    std::string candidate(to_string(v));
    std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (candidate == lower) return v;
  }
  throw ValidationError("unknown variant '" + std::string(name) +
                        "'; expected one of: baseline, proposed, taskarch, "
                        "jointloss, allfeats");
}

bool has_causal_modules(Variant v) { return v != Variant::kBaseline; }

bool decoupled(Variant v) {
  return v == Variant::kProposed || v == Variant::kTaskArch ||
         v == Variant::kAllFeats;
}

void Cam2Config::validate() const {
  auto positive = [](const std::vector<std::size_t>& w, const char* what) {
    if (w.empty()) throw ValidationError(std::string(what) + " must not be empty");
    for (std::size_t x : w) {
      if (x < 1) throw ValidationError(std::string(what) + " entries must be >= 1");
    }
  };
  positive(shared_widths, "shared_widths");
  positive(head_widths, "head_widths");
  if (head_widths.back() != 1) {
    throw ValidationError("head_widths must end with an output width of 1");
  }
  if (causal_width < 1 || embedding_dim < 1) {
    throw ValidationError("causal_width and embedding_dim must be >= 1");
  }
  if (num_tasks < 1) throw ValidationError("num_tasks must be >= 1");
  if (topics < 1) throw ValidationError("topics must be >= 1");
  if (task_weights.size() != num_tasks) {
    throw ValidationError("task_weights has " + std::to_string(task_weights.size()) +
                          " entries for " + std::to_string(num_tasks) + " tasks");
  }
  loss_weights().validate();
  Threshold{thresh};
  if (!(joint_label_mix >= 0.0 && joint_label_mix <= 1.0)) {
    throw ValidationError("joint_label_mix must lie in [0, 1]");
  }
  if (!(embedding_init_scale >= 0.0)) {
    throw ValidationError("embedding_init_scale must be >= 0");
  }
  if (causal_embedding_dim % 2 != 0) {
    throw ValidationError("causal_embedding_dim must be even (half per tower)");
  }
  if (anchor_task >= num_tasks) {
    throw ValidationError("anchor_task out of range");
  }
}

LossWeights Cam2Config::loss_weights() const {
  LossWeights w;
  w.task = task_weights;
  // Baseline carries no causal modules, so their weights are forced to 0.
  w.conformity = has_causal_modules(variant) ? conformity_weight : 0.0;
  w.relevance = has_causal_modules(variant) ? relevance_weight : 0.0;
  return w;
}

FeatureBatch FeatureBatch::from_rows(
    const Schema& schema, const std::vector<const PartitionedFeatures*>& rows) {
  FeatureBatch b;
  b.size = rows.size();
  b.schema_hash = schema.hash();
  const std::size_t sd = schema.dense_width(Bucket::kStatistical);
  const std::size_t ad = schema.dense_width(Bucket::kAttribute);
  b.statistical_dense = nn::Tensor::matrix(b.size, sd);
  b.attribute_dense = nn::Tensor::matrix(b.size, ad);
  b.statistical_cat.assign(schema.categorical_count(Bucket::kStatistical),
                           std::vector<int>(b.size));
  b.attribute_cat.assign(schema.categorical_count(Bucket::kAttribute),
                         std::vector<int>(b.size));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const PartitionedFeatures& f = *rows[r];
    if (f.statistical.dense.size() != sd || f.attribute.dense.size() != ad ||
        f.statistical.categorical.size() != b.statistical_cat.size() ||
        f.attribute.categorical.size() != b.attribute_cat.size()) {
      throw MismatchError("feature row does not match schema layout");
    }
    std::copy(f.statistical.dense.begin(), f.statistical.dense.end(),
              b.statistical_dense.data() + r * sd);
    std::copy(f.attribute.dense.begin(), f.attribute.dense.end(),
              b.attribute_dense.data() + r * ad);
    for (std::size_t c = 0; c < b.statistical_cat.size(); ++c) {
      b.statistical_cat[c][r] = f.statistical.categorical[c];
    }
    for (std::size_t c = 0; c < b.attribute_cat.size(); ++c) {
      b.attribute_cat[c][r] = f.attribute.categorical[c];
    }
  }
  return b;
}

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kSharedBottom:
      return "shared_bottom";
    case ParamGroup::kTaskHeads:
      return "task_heads";
    case ParamGroup::kConformity:
      return "conformity_module";
    case ParamGroup::kRelevance:
      return "relevance_module";
    case ParamGroup::kMixture:
      return "mixture_logits";
  }
  return "?";
}

ParamGroup param_group(std::string_view id) {
  if (id.starts_with("shared.")) return ParamGroup::kSharedBottom;
  if (id.starts_with("task")) return ParamGroup::kTaskHeads;
  if (id.starts_with("conformity.")) return ParamGroup::kConformity;
  if (id.starts_with("relevance.")) return ParamGroup::kRelevance;
  if (id.starts_with("mixture.")) return ParamGroup::kMixture;
  throw Error("parameter outside every group: " + std::string(id));
}

namespace {

std::size_t input_width(const FeatureGroup& g, std::size_t emb_dim) {
  return g.dense.size() + g.categorical.size() * emb_dim;
}

std::uint64_t seed_of(const Cam2Config& c) { return c.seed; }

}  // namespace

Cam2Model::Tower Cam2Model::make_tower(const std::string& prefix,
                                       FeatureGroup inputs,
                                       std::size_t head_out) {
  if (inputs.empty()) {
    throw ValidationError("variant " + std::string(to_string(config_.variant)) +
                          " needs features for tower " + prefix +
                          ", but the schema declares none");
  }
  Tower t;
  const std::uint64_t seed = seed_of(config_);
  for (const auto& c : inputs.categorical) {
    t.embeddings.push_back(nn::make_embedding(params_, prefix + ".emb." + c.name,
                                              c.vocab_size,
                                              config_.embedding_dim, seed));
  }
  const std::size_t w = config_.causal_width;
  t.input_layer = nn::make_dense(params_, prefix + ".in",
                                 input_width(inputs, config_.embedding_dim), w, seed);
  for (std::size_t b = 0; b < config_.causal_blocks; ++b) {
    t.blocks.push_back(nn::make_residual_block(
        params_, prefix + ".block" + std::to_string(b), w, seed));
  }
  const std::size_t half = config_.causal_embedding_dim / 2;
  if (half > 0) t.projection = nn::make_dense(params_, prefix + ".proj", w, half, seed);
  t.head = nn::make_dense(params_, prefix + ".head", half > 0 ? half : w, head_out, seed);
  t.inputs = std::move(inputs);
  return t;
}

Cam2Model::Cam2Model(const Cam2Config& config, const Schema& schema)
    : config_(config), schema_hash_(schema.hash()) {
  config_.validate();
  const std::uint64_t seed = seed_of(config_);
  const std::size_t de = config_.causal_embedding_dim;

  shared_inputs_ = schema.all();
  if (shared_inputs_.empty()) throw ValidationError("schema declares no features");
  for (const auto& c : shared_inputs_.categorical) {
    shared_embeddings_.push_back(nn::make_embedding(
        params_, "shared.emb." + c.name, c.vocab_size, config_.embedding_dim, seed));
  }
  std::size_t width = input_width(shared_inputs_, config_.embedding_dim);
  for (std::size_t l = 0; l < config_.shared_widths.size(); ++l) {
    shared_layers_.push_back(nn::make_dense(params_, "shared.fc" + std::to_string(l),
                                            width, config_.shared_widths[l], seed));
    width = config_.shared_widths[l];
  }

  const bool causal = has_causal_modules(config_.variant);
  const bool at_bottom = causal && config_.variant != Variant::kTaskArch;
  const bool at_final = causal && config_.variant == Variant::kTaskArch;
  const std::size_t extra = 2 * de;
  for (std::size_t t = 0; t < config_.num_tasks; ++t) {
    std::vector<nn::DenseLayer> layers;
    std::size_t in = width;
    const std::size_t depth = config_.head_widths.size();
    for (std::size_t l = 0; l < depth; ++l) {
      const bool widened = (l == 0 && at_bottom) || (l + 1 == depth && at_final);
      const std::string id = "task" + std::to_string(t) + ".fc" + std::to_string(l);
      layers.push_back(nn::make_widened_dense(params_, id, in, widened ? extra : 0,
                                              config_.head_widths[l], seed,
                                              config_.embedding_init_scale));
      in = config_.head_widths[l];
    }
    heads_.push_back(std::move(layers));
  }

  if (causal) {
    const bool all = config_.variant == Variant::kAllFeats;
    auto module = [&](const std::string& name, Bucket bucket, std::size_t head_out) {
      CausalModule m{
          make_tower(name + ".user",
                     all ? schema.all() : schema.group(bucket, Entity::kUser),
                     head_out),
          make_tower(name + ".item",
                     all ? schema.all() : schema.group(bucket, Entity::kItem),
                     head_out),
      };
      return m;
    };
    conformity_ = module("conformity", Bucket::kStatistical, 1);
    relevance_ = module("relevance", Bucket::kAttribute, config_.topics);
    mixture_logits_ =
        &params_.add("mixture.logits", nn::Tensor::vector({0.0, 0.0}));
  }
}

std::size_t Cam2Model::group_scalar_count(ParamGroup g) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (param_group(p->id) == g) n += p->value.size();
  }
  return n;
}

nn::Var Cam2Model::gather_inputs(nn::Tape& tape, const FeatureBatch& batch,
                                 const FeatureGroup& group,
                                 const std::vector<nn::EmbeddingTable>& tables) {
  std::vector<nn::Var> parts;
  if (!group.dense.empty()) {
    nn::Tensor dense = nn::Tensor::matrix(batch.size, group.dense.size());
    const std::size_t sw = batch.statistical_dense.cols();
    const std::size_t aw = batch.attribute_dense.cols();
    for (std::size_t r = 0; r < batch.size; ++r) {
      for (std::size_t c = 0; c < group.dense.size(); ++c) {
        const auto& col = group.dense[c];
        dense.at(r, c) = col.bucket == Bucket::kStatistical
                             ? batch.statistical_dense[r * sw + col.column]
                             : batch.attribute_dense[r * aw + col.column];
      }
    }
    parts.push_back(tape.constant(std::move(dense)));
  }
  for (std::size_t c = 0; c < group.categorical.size(); ++c) {
    const auto& cat = group.categorical[c];
    const auto& ids = cat.bucket == Bucket::kStatistical
                          ? batch.statistical_cat[cat.position]
                          : batch.attribute_cat[cat.position];
    parts.push_back(tables[c].lookup(tape, ids));
  }
  return parts.size() == 1 ? parts.front() : nn::concat_cols(parts);
}

std::pair<nn::Var, nn::Var> Cam2Model::Tower::forward(
    nn::Tape& tape, const FeatureBatch& batch) const {
  nn::Var h = nn::relu(
      input_layer.forward(tape, gather_inputs(tape, batch, inputs, embeddings)));
  for (const auto& block : blocks) h = block.forward(tape, h);
  if (projection) h = nn::sigmoid(projection->forward(tape, h));
  return {h, nn::sigmoid(head.forward(tape, h))};
}

ForwardOutputs Cam2Model::forward(nn::Tape& tape, const FeatureBatch& batch) const {
  if (batch.schema_hash != schema_hash_) {
    throw MismatchError("feature batch schema " + batch.schema_hash +
                        " does not match model schema " + schema_hash_);
  }
  ForwardOutputs out;
  nn::Var h = gather_inputs(tape, batch, shared_inputs_, shared_embeddings_);
  for (const auto& layer : shared_layers_) h = nn::relu(layer.forward(tape, h));
  out.shared_output = h;

  std::vector<nn::Var> extras;
  if (conformity_) {
    out.has_causal = true;
    auto run = [&](const CausalModule& m, nn::Var& user_head, nn::Var& item_head,
                   nn::Var& embedding) {
      auto [hu, pu] = m.user.forward(tape, batch);
      auto [hi, pi] = m.item.forward(tape, batch);
      user_head = pu;
      item_head = pi;
      if (m.user.projection) embedding = nn::concat_cols({hu, hi});
    };
    run(*conformity_, out.user_conformity, out.item_conformity,
        out.conformity_embedding);
    run(*relevance_, out.user_interest, out.item_interest, out.relevance_embedding);
    if (config_.causal_embedding_dim > 0) {
      if (decoupled(config_.variant)) {
        extras = {nn::stop_gradient(out.conformity_embedding),
                  nn::stop_gradient(out.relevance_embedding)};
      } else {
        extras = {out.conformity_embedding, out.relevance_embedding};
      }
    }
  }

  const bool at_final = config_.variant == Variant::kTaskArch;
  for (const auto& layers : heads_) {
    nn::Var x = h;
    if (!extras.empty() && !at_final) {
      x = nn::concat_cols({h, extras[0], extras[1]});
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const bool last = l + 1 == layers.size();
      if (last && at_final && !extras.empty()) {
        x = nn::concat_cols({x, extras[0], extras[1]});
      }
      x = layers[l].forward(tape, x);
      x = last ? nn::sigmoid(x) : nn::relu(x);
    }
    out.task_probs.push_back(nn::clamp(x, kProbFloor, 1.0 - kProbFloor));
  }
  return out;
}

LossVars Cam2Model::losses(nn::Tape& tape, const ForwardOutputs& out,
                           const Targets& targets) const {
  const std::size_t n = targets.labels.rows();
  const std::size_t T = config_.num_tasks;
  if (targets.labels.cols() != T || targets.x.size() != n) {
    throw DimensionError("targets do not match batch size / task count");
  }
  LossVars lv;
  const LossWeights w = config_.loss_weights();
  lv.report.batch_size = n;

  std::vector<nn::Tensor> y(T, nn::Tensor::matrix(n, 1));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < T; ++t) y[t][r] = targets.labels.at(r, t);
  }
  nn::Var total;
  for (std::size_t t = 0; t < T; ++t) {
    nn::Var lt = tape_loss::task(out.task_probs[t], y[t]);
    lv.task.push_back(lt);
    lv.report.task.push_back(lt.value()[0]);
    nn::Var term = nn::scale(lt, w.task[t]);
    total = t == 0 ? term : nn::add(total, term);
  }

  if (out.has_causal) {
    const std::size_t k = config_.topics;
    if (targets.topics.rows() != n || targets.topics.cols() != k) {
      throw DimensionError("targets.topics must be [batch, topics]");
    }
    const Threshold thresh(config_.thresh);
    nn::Tensor cbar = nn::Tensor::matrix(n, 1);
    nn::Tensor rbar = nn::Tensor::matrix(n, k);
    nn::Tensor topic_share = nn::Tensor::matrix(n, k);
    std::vector<std::uint8_t> flags(k);
    for (std::size_t r = 0; r < n; ++r) {
      double count = 0.0;
      for (std::size_t x = 0; x < k; ++x) {
        flags[x] = targets.topics.at(r, x) > 0.5 ? 1 : 0;
        count += flags[x];
      }
      const CausalLabels cl =
          causal_labels(targets.labels.at(r, config_.anchor_task) > 0.5,
                        targets.x[r], thresh, flags);
      cbar[r] = cl.conformity;
      for (std::size_t x = 0; x < k; ++x) {
        rbar.at(r, x) = cl.per_interest[x];
        topic_share.at(r, x) = count > 0.0 ? flags[x] / count : 0.0;
      }
    }
    const bool squared = config_.squared_causal_loss;
    nn::Var lc = tape_loss::conformity(tape.constant(cbar), out.user_conformity,
                                       out.item_conformity, squared);
    nn::Var lr = tape_loss::relevance(tape.constant(rbar), out.user_interest,
                                      out.item_interest, squared);

    // Pr(t | conformity) and Pr(t | relevance) read off the causal heads.
    nn::Var p_conf = nn::clamp(nn::add(out.user_conformity, out.item_conformity),
                               kProbFloor, 1.0 - kProbFloor);
    nn::Var p_rel = nn::clamp(
        nn::row_sum(nn::mul(nn::mul(out.user_interest, out.item_interest),
                            tape.constant(topic_share))),
        kProbFloor, 1.0 - kProbFloor);
    const nn::Tensor& anchor = y[config_.anchor_task];

    if (config_.variant == Variant::kJointLoss) {
      const double m = config_.joint_label_mix;
      lc = nn::add(nn::scale(lc, 1.0 - m),
                   nn::scale(tape_loss::task(p_conf, anchor), m));
      lr = nn::add(nn::scale(lr, 1.0 - m),
                   nn::scale(tape_loss::task(p_rel, anchor), m));
    }
    lv.conformity = lc;
    lv.relevance = lr;
    lv.report.has_causal = true;
    lv.report.conformity = lc.value()[0];
    lv.report.relevance = lr.value()[0];
    total = nn::add(total, nn::add(nn::scale(lc, w.conformity),
                                   nn::scale(lr, w.relevance)));

    nn::Var mix = nn::softmax(tape.parameter(*mixture_logits_));
    nn::Var p_mix = nn::add(
        nn::scale_by(nn::stop_gradient(p_conf), nn::slice_cols(mix, 0, 1)),
        nn::scale_by(nn::stop_gradient(p_rel), nn::slice_cols(mix, 1, 2)));
    nn::Var lm = tape_loss::task(nn::clamp(p_mix, kProbFloor, 1.0 - kProbFloor),
                                 anchor);
    lv.mixture = lm;
    lv.report.mixture = lm.value()[0];
  }
  lv.total = total;
  lv.report.total = total.value()[0];
  lv.objective = lv.mixture ? nn::add(total, *lv.mixture) : total;
  return lv;
}

std::vector<double> Cam2Model::predict(const FeatureBatch& batch) const {
  nn::Tape tape(false);
  const ForwardOutputs out = forward(tape, batch);
  const std::size_t T = out.task_probs.size();
  std::vector<double> p(batch.size * T);
  for (std::size_t t = 0; t < T; ++t) {
    const nn::Tensor& v = out.task_probs[t].value();
    for (std::size_t r = 0; r < batch.size; ++r) p[r * T + t] = v[r];
  }
  return p;
}

Cam2Model::Embeddings Cam2Model::embeddings(const FeatureBatch& batch) const {
  if (!conformity_) {
    throw ValidationError("variant " + std::string(to_string(config_.variant)) +
                          " has no causal embeddings");
  }
  if (config_.causal_embedding_dim == 0) {
    throw ValidationError("causal_embedding_dim is 0; no embeddings to read");
  }
  nn::Tape tape(false);
  const ForwardOutputs out = forward(tape, batch);
  return {out.conformity_embedding.value(), out.relevance_embedding.value()};
}

bool ProvenanceReport::touches(const std::string& component, ParamGroup g) const {
  return nonzero.at(component)[static_cast<std::size_t>(g)];
}

ProvenanceReport gradient_provenance(Cam2Model& model, const FeatureBatch& batch,
                                     const Targets& targets) {
  nn::Tape tape;
  const ForwardOutputs out = model.forward(tape, batch);
  const LossVars lv = model.losses(tape, out, targets);

  std::vector<std::pair<std::string, nn::Var>> components;
  for (std::size_t t = 0; t < lv.task.size(); ++t) {
    components.emplace_back("task" + std::to_string(t), lv.task[t]);
  }
  if (lv.conformity) components.emplace_back("conformity", *lv.conformity);
  if (lv.relevance) components.emplace_back("relevance", *lv.relevance);
  if (lv.mixture) components.emplace_back("mixture", *lv.mixture);

  ProvenanceReport report;
  auto& params = model.parameters();
  for (const auto& [name, loss] : components) {
    params.zero_grads();
    tape.backward(loss);
    std::array<double, kParamGroupCount> sq{};
    std::array<bool, kParamGroupCount> any{};
    for (const auto& p : params) {
      const auto g = static_cast<std::size_t>(param_group(p->id));
      for (double v : p->grad.values()) {
        sq[g] += v * v;
        any[g] = any[g] || v != 0.0;
      }
    }
    for (double& s : sq) s = std::sqrt(s);
    report.components.push_back(name);
    report.grad_norm[name] = sq;
    report.nonzero[name] = any;
  }
  params.zero_grads();
  return report;
}

void check_decoupling(const ProvenanceReport& report, Variant variant) {
  auto fail = [&](const std::string& what) {
    throw Error("gradient provenance violates the " +
                std::string(to_string(variant)) + " contract: " + what);
  };
  for (const std::string& c : report.components) {
    const bool is_task = c.starts_with("task");
    for (std::size_t g = 0; g < kParamGroupCount; ++g) {
      const auto group = static_cast<ParamGroup>(g);
      const bool hit = report.nonzero.at(c)[g];
      if (is_task) {
        const bool causal_group =
            group == ParamGroup::kConformity || group == ParamGroup::kRelevance;
        if (group == ParamGroup::kMixture && hit) fail(c + " reaches mixture logits");
        if (causal_group && decoupled(variant) && hit) {
          fail(c + " reaches " + std::string(to_string(group)));
        }
      } else {
        const ParamGroup own = c == "conformity" ? ParamGroup::kConformity
                               : c == "relevance" ? ParamGroup::kRelevance
                                                  : ParamGroup::kMixture;
        if (group != own && hit) {
          fail(c + " loss reaches " + std::string(to_string(group)));
        }
      }
    }
  }
  if (variant == Variant::kJointLoss) {
    double norm = 0.0;
    for (const std::string& c : report.components) {
      if (!c.starts_with("task")) continue;
      norm += report.grad_norm.at(c)[static_cast<std::size_t>(ParamGroup::kConformity)];
      norm += report.grad_norm.at(c)[static_cast<std::size_t>(ParamGroup::kRelevance)];
    }
    if (!(norm > 1e-12)) fail("task losses do not reach the causal modules");
  }
}

}  // namespace cam2
