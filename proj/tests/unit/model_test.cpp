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
#include <cmath>

#include <gtest/gtest.h>

#include "cam2/error.hpp"
#include "cam2/model.hpp"
#include "fd.hpp"
#include "fixtures.hpp"

namespace cam2 {
namespace {

using testing::first_rows;
using testing::tiny_datagen;
using testing::tiny_model;

std::size_t dense(std::size_t in, std::size_t out) { return in * out + out; }

class ModelTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { data_ = new Dataset(build_dataset(tiny_datagen())); }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }
  static Dataset* data_;
};
Dataset* ModelTest::data_ = nullptr;

TEST(Variant, Names) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(parse_variant("proposed"), Variant::kProposed);
  EXPECT_EQ(parse_variant("AllFeats"), Variant::kAllFeats);
  EXPECT_THROW(parse_variant("baselin"), ValidationError);
  EXPECT_FALSE(has_causal_modules(Variant::kBaseline));
  EXPECT_TRUE(decoupled(Variant::kTaskArch));
  EXPECT_FALSE(decoupled(Variant::kJointLoss));
}

TEST(Config, Validation) {
  Cam2Config c;
  c.head_widths = {32, 2};
  EXPECT_THROW(c.validate(), ValidationError);
  c = Cam2Config{};
  c.shared_widths = {0};
  EXPECT_THROW(c.validate(), ValidationError);
  c = Cam2Config{};
  c.task_weights = {1, 1};
  EXPECT_THROW(c.validate(), ValidationError);
  c = Cam2Config{};
  c.conformity_weight = -1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = Cam2Config{};
  c.causal_embedding_dim = 5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = Cam2Config{};
  c.thresh = 2;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(Cam2Config{}.validate());
}

TEST_F(ModelTest, ParameterCountsClosedForm) {
  const Schema& s = data_->schema;
  const std::size_t E = 2, w = 5, k = 3, T = 2, de = 4, h0 = 4;
  const std::size_t block = 2 * dense(w, w);
  // dense columns: 5 statistical + 3 interests + 3 topics + quality.
  ASSERT_EQ(s.all().dense.size(), 12u);
  const std::size_t shared_expected = (6 + 4) * E + dense(12 + 2 * E, 8) + dense(8, 6);
  const std::size_t heads = T * (dense(6, h0) + dense(h0, 1));
  const std::size_t baseline = shared_expected + heads;

  auto tower = [&](std::size_t dense_in, std::size_t cat_vocab, std::size_t cats,
                   std::size_t out) {
    return cat_vocab * E + dense(dense_in + cats * E, w) + block + dense(w, de / 2) +
           dense(de / 2, out);
  };
  const std::size_t conf = tower(2, 0, 0, 1) + tower(3, 0, 0, 1);
  const std::size_t rel = tower(3, 6, 1, k) + tower(4, 4, 1, k);
  const std::size_t conf_all = tower(12, 10, 2, 1) * 2;
  const std::size_t rel_all = tower(12, 10, 2, k) * 2;

  EXPECT_EQ(Cam2Model(tiny_model(Variant::kBaseline), s).parameters().scalar_count(),
            baseline);
  const Cam2Model proposed(tiny_model(Variant::kProposed), s);
  EXPECT_EQ(proposed.parameters().scalar_count(), baseline + conf + rel + T * 2 * de * h0 + 2);
  EXPECT_EQ(proposed.group_scalar_count(ParamGroup::kConformity), conf);
  EXPECT_EQ(proposed.group_scalar_count(ParamGroup::kRelevance), rel);
  EXPECT_EQ(proposed.group_scalar_count(ParamGroup::kMixture), 2u);
  EXPECT_EQ(Cam2Model(tiny_model(Variant::kJointLoss), s).parameters().scalar_count(),
            proposed.parameters().scalar_count());
  EXPECT_EQ(Cam2Model(tiny_model(Variant::kTaskArch), s).parameters().scalar_count(),
            baseline + conf + rel + T * 2 * de * 1 + 2);
  EXPECT_EQ(Cam2Model(tiny_model(Variant::kAllFeats), s).parameters().scalar_count(),
            baseline + conf_all + rel_all + T * 2 * de * h0 + 2);
  const Cam2Model base(tiny_model(Variant::kBaseline), s);
  EXPECT_EQ(base.group_scalar_count(ParamGroup::kConformity), 0u);
  EXPECT_EQ(base.group_scalar_count(ParamGroup::kRelevance), 0u);
}

TEST_F(ModelTest, SameSeedSameParameters) {
  const Cam2Model a(tiny_model(Variant::kProposed, 5), data_->schema);
  const Cam2Model b(tiny_model(Variant::kProposed, 5), data_->schema);
  const Cam2Model c(tiny_model(Variant::kProposed, 6), data_->schema);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
    any_diff |= !(a.parameters()[i].value == c.parameters()[i].value);
  }
  EXPECT_TRUE(any_diff);
}

TEST_F(ModelTest, BaselineAndProposedShareBottomActivations) {
  const Batch b = first_rows(*data_, 3, 40);
  const Cam2Model base(tiny_model(Variant::kBaseline), data_->schema);
  const Cam2Model prop(tiny_model(Variant::kProposed), data_->schema);
  nn::Tape t1(false), t2(false);
  EXPECT_EQ(base.forward(t1, b.features).shared_output.value(),
            prop.forward(t2, b.features).shared_output.value());
}

TEST_F(ModelTest, ZeroEmbeddingDimMatchesBaseline) {
  const Batch b = first_rows(*data_, 3, 40);
  Cam2Config cfg = tiny_model(Variant::kProposed);
  cfg.causal_embedding_dim = 0;
  const Cam2Model prop(cfg, data_->schema);
  const Cam2Model base(tiny_model(Variant::kBaseline), data_->schema);
  EXPECT_EQ(prop.predict(b.features), base.predict(b.features));
  EXPECT_THROW(prop.embeddings(b.features), ValidationError);
}

TEST_F(ModelTest, EmbeddingsAreConsumed) {
  const Batch b = first_rows(*data_, 3, 40);
  for (Variant v : {Variant::kProposed, Variant::kTaskArch, Variant::kJointLoss,
                    Variant::kAllFeats}) {
    Cam2Model m(tiny_model(v), data_->schema);
    const std::vector<double> before = m.predict(b.features);
    for (const char* tower : {"conformity.user", "conformity.item", "relevance.user",
                              "relevance.item"}) {
      m.parameters().get(std::string(tower) + ".proj.w").value.fill(0.0);
      m.parameters().get(std::string(tower) + ".proj.b").value.fill(0.0);
    }
    const Cam2Model::Embeddings e = m.embeddings(b.features);
    for (double x : e.conformity.values()) EXPECT_EQ(x, 0.5);  // sigmoid(0)
    for (double x : e.relevance.values()) EXPECT_EQ(x, 0.5);
    EXPECT_NE(m.predict(b.features), before) << to_string(v);
  }
}

TEST_F(ModelTest, OutputsWithinBounds) {
  const Batch b = first_rows(*data_, 3, 60);
  for (Variant v : kAllVariants) {
    Cam2Model m(tiny_model(v), data_->schema);
    for (auto& p : m.parameters()) {
      for (double& x : p->value.values()) x *= 25.0;  // push the sigmoids into saturation
    }
    for (double p : m.predict(b.features)) {
      EXPECT_GE(p, 1e-7);
      EXPECT_LE(p, 1 - 1e-7);
    }
    nn::Tape t(false);
    const ForwardOutputs out = m.forward(t, b.features);
    if (!out.has_causal) continue;
    for (const nn::Var* head : {&out.user_conformity, &out.item_conformity,
                                &out.user_interest, &out.item_interest}) {
      for (double x : head->value().values()) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
    }
    EXPECT_TRUE(out.conformity_embedding.value().all_finite());
  }
}

TEST_F(ModelTest, SchemaHashRefused) {
  Batch b = first_rows(*data_, 2, 5);
  const Cam2Model m(tiny_model(Variant::kBaseline), data_->schema);
  b.features.schema_hash = "feed";
  EXPECT_THROW(m.predict(b.features), MismatchError);
}

TEST_F(ModelTest, MissingFeatureGroupRejected) {
  const Schema only_attr = validate_schema({
      {"u", Encoding::kDense, Bucket::kAttribute, Entity::kUser, 3, 0},
      {"i", Encoding::kDense, Bucket::kAttribute, Entity::kItem, 3, 0},
  });
  EXPECT_NO_THROW(Cam2Model(tiny_model(Variant::kBaseline), only_attr));
  EXPECT_NO_THROW(Cam2Model(tiny_model(Variant::kAllFeats), only_attr));
  EXPECT_THROW(Cam2Model(tiny_model(Variant::kProposed), only_attr), ValidationError);
}

TEST_F(ModelTest, ProvenanceProposed) {
  const Batch b = first_rows(*data_, 3, 64);
  for (Variant v : {Variant::kProposed, Variant::kTaskArch, Variant::kAllFeats}) {
    Cam2Model m(tiny_model(v), data_->schema);
    const ProvenanceReport r = gradient_provenance(m, b.features, b.targets);
    for (std::size_t t = 0; t < 2; ++t) {
      const std::string c = "task" + std::to_string(t);
      EXPECT_EQ(r.grad_norm.at(c)[static_cast<int>(ParamGroup::kConformity)], 0.0);
      EXPECT_EQ(r.grad_norm.at(c)[static_cast<int>(ParamGroup::kRelevance)], 0.0);
      EXPECT_FALSE(r.touches(c, ParamGroup::kMixture));
      EXPECT_TRUE(r.touches(c, ParamGroup::kSharedBottom));
      EXPECT_TRUE(r.touches(c, ParamGroup::kTaskHeads));
    }
    EXPECT_TRUE(r.touches("conformity", ParamGroup::kConformity));
    EXPECT_TRUE(r.touches("relevance", ParamGroup::kRelevance));
    for (ParamGroup g : {ParamGroup::kSharedBottom, ParamGroup::kTaskHeads,
                         ParamGroup::kRelevance, ParamGroup::kMixture}) {
      EXPECT_FALSE(r.touches("conformity", g)) << to_string(g);
    }
    for (ParamGroup g : {ParamGroup::kSharedBottom, ParamGroup::kTaskHeads,
                         ParamGroup::kConformity, ParamGroup::kMixture}) {
      EXPECT_FALSE(r.touches("relevance", g)) << to_string(g);
    }
    EXPECT_TRUE(r.touches("mixture", ParamGroup::kMixture));
    EXPECT_NO_THROW(check_decoupling(r, v));
  }
}

TEST_F(ModelTest, ProvenanceJointLoss) {
  const Batch b = first_rows(*data_, 3, 64);
  Cam2Model m(tiny_model(Variant::kJointLoss), data_->schema);
  const ProvenanceReport r = gradient_provenance(m, b.features, b.targets);
  double norm = 0.0;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& g = r.grad_norm.at("task" + std::to_string(t));
    norm += g[static_cast<int>(ParamGroup::kConformity)] +
            g[static_cast<int>(ParamGroup::kRelevance)];
    EXPECT_GT(g[static_cast<int>(ParamGroup::kConformity)], 1e-12);
    EXPECT_GT(g[static_cast<int>(ParamGroup::kRelevance)], 1e-12);
  }
  EXPECT_GT(norm, 1e-12);
  EXPECT_NO_THROW(check_decoupling(r, Variant::kJointLoss));
  EXPECT_THROW(check_decoupling(r, Variant::kProposed), Error);
}

TEST_F(ModelTest, TotalLossGradientMatchesFiniteDifferences) {
  const Batch b = first_rows(*data_, 3, 24);
  for (Variant v : kAllVariants) {
    Cam2Model m(tiny_model(v), data_->schema);
    testing::jitter(m.parameters(), 0.1, 7);
    const auto r = testing::finite_difference_check(m.parameters(), [&](nn::Tape& t) {
      const ForwardOutputs out = m.forward(t, b.features);
      return m.losses(t, out, b.targets).total;
    });
    EXPECT_EQ(r.failed, 0u) << to_string(v) << ": " << r.first_failure;
    EXPECT_EQ(r.checked, m.parameters().scalar_count());
  }
}

TEST_F(ModelTest, LossReportMatchesScalarRecomputation) {
  const Batch b = first_rows(*data_, 3, 50);
  Cam2Model m(tiny_model(Variant::kProposed), data_->schema);
  nn::Tape t(false);
  const ForwardOutputs out = m.forward(t, b.features);
  const LossVars lv = m.losses(t, out, b.targets);
  EXPECT_NEAR(total_loss(lv.report, m.config().loss_weights()), lv.report.total, 1e-12);
  EXPECT_NEAR(lv.objective.value()[0], lv.report.total + lv.report.mixture, 1e-12);
  EXPECT_EQ(lv.report.batch_size, 50u);

  Cam2Model base(tiny_model(Variant::kBaseline), data_->schema);
  nn::Tape tb(false);
  const LossVars lb = base.losses(tb, base.forward(tb, b.features), b.targets);
  EXPECT_FALSE(lb.report.has_causal);
  EXPECT_FALSE(lb.conformity.has_value());
  EXPECT_NEAR(lb.report.total, lb.report.task[0] + 0.7 * lb.report.task[1], 1e-12);
}

}  // namespace
}  // namespace cam2
