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
#include <random>

#include <gtest/gtest.h>

#include "cam2/error.hpp"
#include "cam2/nn/adam.hpp"
#include "cam2/nn/layers.hpp"
#include "cam2/nn/ops.hpp"
#include "cam2/nn/serialize.hpp"
#include "fd.hpp"

namespace cam2::nn {
namespace {

using cam2::testing::finite_difference_check;

Tensor randn(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Dense, IdentityWeights) {
  Tape tape;
  Var x = tape.constant(Tensor::from_rows({{1, 2}}));
  Var w = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var b = tape.constant(Tensor::vector({0, 0}));
  EXPECT_EQ(dense(x, w, b).value().storage(), (std::vector<double>{1, 2}));
}

TEST(Dense, ZeroWeightsPassBias) {
  Tape tape;
  Var x = tape.constant(Tensor::from_rows({{5, 7}}));
  Var w = tape.constant(Tensor::matrix(2, 3));
  Var b = tape.constant(Tensor::vector({1, 2, 3}));
  EXPECT_EQ(dense(x, w, b).value().storage(), (std::vector<double>{1, 2, 3}));
}

TEST(Dense, ShapeErrorNamesBothShapes) {
  Tape tape;
  Var x = tape.constant(Tensor::matrix(1, 2));
  Var w = tape.constant(Tensor::matrix(3, 4));
  Var b = tape.constant(Tensor::vector(std::vector<double>(4)));
  try {
    dense(x, w, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1, 2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3, 4]"), std::string::npos) << msg;
  }
}

TEST(Dense, WeightGradientMatchesFiniteDifferences) {
  ParameterStore ps;
  Parameter& w = ps.add("w", randn(2, 3, 1));
  Parameter& b = ps.add("b", Tensor::vector({0.1, -0.2, 0.3}));
  const Tensor x = Tensor::from_rows({{1, 2}});
  const auto r = finite_difference_check(
      ps, [&](Tape& t) { return sum(dense(t.constant(x), t.parameter(w), t.parameter(b))); },
      1e-5, 0.0, 1e-6);
  EXPECT_EQ(r.failed, 0u) << r.first_failure;
  // d sum / d w[i][j] = x[i].
  EXPECT_NEAR(w.grad.at(0, 2), 1.0, 1e-12);
  EXPECT_NEAR(w.grad.at(1, 0), 2.0, 1e-12);
}

TEST(Activation, Values) {
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value()[0], 0.5);
  EXPECT_EQ(relu(tape.constant(Tensor::vector({-1, 0, 3}))).value().storage(),
            (std::vector<double>{0, 0, 3}));
  EXPECT_EQ(parse_activation("relu"), Activation::kRelu);
  EXPECT_THROW(parse_activation("tanh"), ValidationError);
}

TEST(Activation, SigmoidGradientAtZero) {
  ParameterStore ps;
  Parameter& x = ps.add("x", Tensor::scalar(0.0));
  Tape tape;
  tape.backward(sum(sigmoid(tape.parameter(x))));
  EXPECT_EQ(x.grad[0], 0.25);
  const double h = 1e-5;
  const double fd = (1.0 / (1.0 + std::exp(-h)) - 1.0 / (1.0 + std::exp(h))) / (2 * h);
  EXPECT_NEAR(x.grad[0], fd, 1e-8);
}

TEST(Activation, SigmoidStaysFiniteAtExtremes) {
  Tape tape;
  const Tensor& v = sigmoid(tape.constant(Tensor::vector({-800, 800}))).value();
  EXPECT_TRUE(v.all_finite());
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 1.0);
}

TEST(Residual, ZeroBlockIsIdentity) {
  Tape tape;
  const Tensor x = randn(3, 4, 2);
  Var z = tape.constant(Tensor::matrix(4, 4));
  Var zb = tape.constant(Tensor::vector(std::vector<double>(4)));
  EXPECT_EQ(residual_block(tape.constant(x), z, zb, z, zb).value(), x);
}

TEST(Residual, ScalarExample) {
  Tape tape;
  Var out = residual_block(tape.constant(Tensor::from_rows({{1}})),
                           tape.constant(Tensor::from_rows({{1}})),
                           tape.constant(Tensor::vector({0})),
                           tape.constant(Tensor::from_rows({{2}})),
                           tape.constant(Tensor::vector({0})));
  EXPECT_EQ(out.value()[0], 3.0);
}

TEST(Residual, WidthMismatchThrows) {
  Tape tape;
  Var x = tape.constant(Tensor::matrix(1, 3));
  Var w1 = tape.constant(Tensor::matrix(3, 2));
  Var b1 = tape.constant(Tensor::vector(std::vector<double>(2)));
  Var w2 = tape.constant(Tensor::matrix(2, 2));
  EXPECT_THROW(residual_block(x, w1, b1, w2, b1), DimensionError);
}

TEST(Residual, InputJacobianMatchesFiniteDifferences) {
  ParameterStore ps;
  Parameter& x = ps.add("x", randn(2, 3, 3));
  const Tensor w1 = randn(3, 3, 4), w2 = randn(3, 3, 5);
  const Tensor b1 = Tensor::vector({0.1, 0.2, -0.1}), b2 = Tensor::vector({0, 0.3, 0});
  const Tensor probe = randn(2, 3, 6);
  const auto r = finite_difference_check(ps, [&](Tape& t) {
    Var y = residual_block(t.parameter(x), t.constant(w1), t.constant(b1), t.constant(w2),
                           t.constant(b2));
    return sum(mul(y, t.constant(probe)));
  }, 1e-5, 1e-5, 1e-9);
  EXPECT_EQ(r.failed, 0u) << r.first_failure;
}

TEST(StopGradient, ForwardIdentityAndZeroGradient) {
  ParameterStore ps;
  Parameter& x = ps.add("x", Tensor::vector({1, 2, 3}));
  Tape tape;
  Var s = stop_gradient(tape.parameter(x));
  EXPECT_EQ(s.value().storage(), (std::vector<double>{1, 2, 3}));
  tape.backward(sum(s));
  EXPECT_EQ(x.grad.storage(), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(tape.barrier_count(), 1u);
}

TEST(StopGradient, ProductThroughBarrier) {
  ParameterStore ps;
  Parameter& x = ps.add("x", Tensor::vector({2}));
  Tape tape;
  Var v = tape.parameter(x);
  tape.backward(sum(mul(v, stop_gradient(v))));
  EXPECT_EQ(x.grad[0], 2.0);  // not 4
}

TEST(StopGradient, FrozenBarriersReplayRecordedValues) {
  Tape first;
  Var a = first.constant(Tensor::vector({1, 2}));
  stop_gradient(a);
  const std::vector<Tensor> seen = first.barrier_values();
  ASSERT_EQ(seen.size(), 1u);
  Tape second;
  second.freeze_barriers(seen);
  Var b = second.constant(Tensor::vector({5, 6}));
  const Tensor frozen = stop_gradient(b).value();
  const Tensor passed = stop_gradient(b).value();  // past the frozen list
  EXPECT_EQ(frozen, seen[0]);
  EXPECT_EQ(passed, b.value());
  Tape bad;
  bad.freeze_barriers(seen);
  EXPECT_THROW(stop_gradient(bad.constant(Tensor::vector({1}))), DimensionError);
}

TEST(StopGradient, OnlyBlocksPathsThroughTheBarrier) {
  ParameterStore ps;
  Parameter& a = ps.add("a", randn(1, 3, 7));
  Parameter& b = ps.add("b", randn(1, 3, 8));
  auto loss = [&](Tape& t, bool barrier) {
    Var va = t.parameter(a);
    Var vb = t.parameter(b);
    Var through = barrier ? stop_gradient(vb) : vb;
    return add(sum(mul(va, through)), sum(square(vb)));
  };
  ps.zero_grads();
  {
    Tape t;
    t.backward(loss(t, false));
  }
  const Tensor ga = a.grad, gb = b.grad;
  ps.zero_grads();
  {
    Tape t;
    t.backward(loss(t, true));
  }
  // a's gradient does not traverse the barrier; b loses only the a-path.
  EXPECT_EQ(a.grad, ga);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(b.grad[i], gb[i] - a.value[i]);
    EXPECT_EQ(b.grad[i], 2.0 * b.value[i]);
  }
}

TEST(Embedding, LookupAndAccumulation) {
  ParameterStore ps;
  Parameter& rows = ps.add("rows", Tensor::from_rows({{1, 1}, {2, 2}, {3, 3}}));
  {
    Tape tape;
    const std::vector<int> idx = {1};
    EXPECT_EQ(embedding_lookup(tape.parameter(rows), idx).value().storage(),
              (std::vector<double>{2, 2}));
  }
  Tape tape;
  const std::vector<int> idx = {0, 0};
  tape.backward(sum(embedding_lookup(tape.parameter(rows), idx)));
  EXPECT_EQ(rows.grad.storage(), (std::vector<double>{2, 2, 0, 0, 0, 0}));
}

TEST(Embedding, OutOfRangeNamesIndex) {
  ParameterStore ps;
  Parameter& rows = ps.add("rows", Tensor::matrix(3, 2));
  Tape tape;
  const std::vector<int> idx = {0, 7};
  try {
    embedding_lookup(tape.parameter(rows), idx);
    FAIL() << "expected IndexError";
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
  const std::vector<int> neg = {-1};
  EXPECT_THROW(embedding_lookup(tape.parameter(rows), neg), IndexError);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  ParameterStore ps;
  Parameter& w = ps.add("w", randn(2, 2, 9));
  Tape tape;
  tape.parameter(w);
  tape.backward(tape.constant(Tensor::scalar(3.0)));
  EXPECT_EQ(w.grad, Tensor::matrix(2, 2));
}

TEST(Backward, BceGradientAtZero) {
  ParameterStore ps;
  Parameter& w = ps.add("w", Tensor::from_rows({{0.0}}));
  Tape tape;
  Var p = sigmoid(matmul(tape.constant(Tensor::from_rows({{1.0}})), tape.parameter(w)));
  tape.backward(binary_cross_entropy(p, Tensor::from_rows({{1.0}})));
  EXPECT_NEAR(w.grad[0], -0.5, 1e-12);
}

TEST(Backward, NonScalarLossThrows) {
  Tape tape;
  EXPECT_THROW(tape.backward(tape.constant(Tensor::vector({1, 2}))), DimensionError);
}

TEST(Backward, ComposedGraphMatchesFiniteDifferences) {
  ParameterStore ps;
  DenseLayer l1 = make_dense(ps, "l1", 3, 4, 11);
  ResidualBlock rb = make_residual_block(ps, "rb", 4, 11);
  DenseLayer l2 = make_dense(ps, "l2", 4, 2, 11);
  EmbeddingTable emb = make_embedding(ps, "emb", 5, 2, 11);
  for (auto& p : ps) {
    for (double& v : p->value.values()) v += 0.05;  // move biases off zero
  }
  const Tensor x = randn(4, 3, 12);
  const std::vector<int> idx = {0, 3, 3, 1};
  const Tensor y = Tensor::from_rows({{1, 0}, {0, 0}, {1, 1}, {0, 1}});
  const auto r = finite_difference_check(ps, [&](Tape& t) {
    Var h = relu(l1.forward(t, t.constant(x)));
    h = rb.forward(t, h);
    Var e = emb.lookup(t, idx);
    Var logits = add(l2.forward(t, h), concat_cols({slice_cols(e, 0, 1), slice_cols(e, 1, 2)}));
    Var p = clamp(sigmoid(logits), 1e-7, 1 - 1e-7);
    return add(binary_cross_entropy(p, y), scale(mean(abs(sub(p, t.constant(y)))), 0.3));
  });
  EXPECT_EQ(r.failed, 0u) << r.first_failure;
  EXPECT_GT(r.checked, 50u);
}

TEST(Ops, SoftmaxAndScaleBy) {
  ParameterStore ps;
  Parameter& l = ps.add("l", Tensor::vector({std::log(3.0), 0.0}));
  Tape tape;
  Var w = softmax(tape.parameter(l));
  EXPECT_NEAR(w.value()[0], 0.75, 1e-15);
  EXPECT_NEAR(w.value()[1], 0.25, 1e-15);
  const auto r = finite_difference_check(ps, [&](Tape& t) {
    Var s = softmax(t.parameter(l));
    return sum(scale_by(t.constant(Tensor::vector({2, 5})), slice_cols(s, 0, 1)));
  });
  EXPECT_EQ(r.failed, 0u) << r.first_failure;
}

TEST(Adam, FirstStepHandComputed) {
  ParameterStore ps;
  Parameter& p = ps.add("p", Tensor::scalar(1.0));
  p.grad[0] = 1.0;
  AdamState st;
  adam_step(ps, {0.1, 0.9, 0.999, 1e-8}, st);
  // m_hat = v_hat = 1, step = -0.1 / (1 + 1e-8).
  EXPECT_NEAR(p.value[0] - 1.0, -0.09999999900000009, 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameterAndDecaysMoments) {
  ParameterStore ps;
  Parameter& p = ps.add("p", Tensor::scalar(1.0));
  AdamState st;
  p.grad[0] = 1.0;
  adam_step(ps, {}, st);
  const double after_first = p.value[0];
  const double m = st.first_moment.at("p")[0];
  const double v = st.second_moment.at("p")[0];
  p.grad[0] = 0.0;
  AdamState zero_state;
  ParameterStore fresh;
  Parameter& q = fresh.add("q", Tensor::scalar(4.0));
  adam_step(fresh, {}, zero_state);
  EXPECT_EQ(q.value[0], 4.0);
  adam_step(ps, {}, st);
  EXPECT_EQ(st.first_moment.at("p")[0], 0.9 * m);
  EXPECT_EQ(st.second_moment.at("p")[0], 0.999 * v);
  EXPECT_NE(p.value[0], after_first);  // momentum keeps moving it
}

TEST(Adam, DeterministicSteps) {
  auto run = [] {
    ParameterStore ps;
    make_dense(ps, "d", 3, 2, 5);
    AdamState st;
    for (int s = 0; s < 3; ++s) {
      for (auto& p : ps) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] = std::sin(i + s + p->value[i]);
      }
      adam_step(ps, {}, st);
    }
    std::vector<double> out;
    for (auto& p : ps) out.insert(out.end(), p->value.storage().begin(), p->value.storage().end());
    return std::make_pair(out, st);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_TRUE(a.second == b.second);
}

TEST(Init, XavierRangeZeroBiasAndSeededById) {
  ParameterStore a, b;
  make_dense(a, "x", 10, 6, 3);
  make_dense(b, "other", 2, 2, 3);
  make_dense(b, "x", 10, 6, 3);
  EXPECT_EQ(a.get("x.w").value, b.get("x.w").value);
  const double limit = std::sqrt(6.0 / 16.0);
  for (double v : a.get("x.w").value.values()) EXPECT_LE(std::abs(v), limit);
  for (double v : a.get("x.b").value.values()) EXPECT_EQ(v, 0.0);
  ParameterStore c;
  make_embedding(c, "e", 1000, 10, 3);
  double s2 = 0.0;
  for (double v : c.get("e.rows").value.values()) s2 += v * v;
  EXPECT_NEAR(std::sqrt(s2 / 10000.0), 0.01, 0.0005);
}

TEST(Init, WidenedDenseKeepsBaseRows) {
  ParameterStore a, b;
  make_dense(a, "h", 4, 3, 9);
  make_widened_dense(b, "h", 4, 2, 3, 9, 0.0);
  const Tensor& base = a.get("h.w").value;
  const Tensor& wide = b.get("h.w").value;
  ASSERT_EQ(wide.rows(), 6u);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(wide.at(r, c), base.at(r, c));
  }
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(wide.at(5, c), 0.0);
  EXPECT_EQ(b.get("h.w").grad.shape(), wide.shape());
}

TEST(Serialize, ParametersAndAdamRoundTripBitExact) {
  ParameterStore ps;
  make_dense(ps, "d", 3, 2, 5);
  make_embedding(ps, "e", 4, 2, 5);
  AdamState st;
  for (auto& p : ps) p->grad.fill(0.3);
  adam_step(ps, {}, st);
  ByteWriter w;
  write_parameters(w, ps);
  write_adam_state(w, st);
  ParameterStore other;
  make_dense(other, "d", 3, 2, 99);
  make_embedding(other, "e", 4, 2, 99);
  ByteReader r(w.bytes());
  read_parameters_into(r, other);
  const AdamState back = read_adam_state(r);
  EXPECT_TRUE(r.done());
  EXPECT_TRUE(back == st);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].value, other[i].value);
}

TEST(Serialize, ShapeMismatchAndTruncation) {
  ParameterStore ps;
  make_dense(ps, "d", 3, 2, 5);
  ByteWriter w;
  write_parameters(w, ps);
  ParameterStore wrong;
  make_dense(wrong, "d", 3, 3, 5);
  ByteReader r(w.bytes());
  EXPECT_THROW(read_parameters_into(r, wrong), MismatchError);
  const std::string cut = w.bytes().substr(0, w.bytes().size() - 3);
  ByteReader rc(cut);
  ParameterStore same;
  make_dense(same, "d", 3, 2, 5);
  EXPECT_THROW(read_parameters_into(rc, same), DataError);
}

}  // namespace
}  // namespace cam2::nn
