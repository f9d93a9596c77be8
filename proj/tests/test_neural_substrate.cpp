// Copyright 2026 The EmergeLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "emergelab/autodiff.hpp"
#include "emergelab/optim.hpp"
#include "grad_cases.hpp"
#include "test_support.hpp"

namespace emergelab::nn {
namespace {

using testing::RandomTensor;

TEST(GradCheck, EveryOpOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& p : testing::GradProblems(seed)) {
      const GradCheckReport r = GradCheck(p.fn, p.inputs);
      EXPECT_LT(r.max_relative_error, 1e-4) << p.name << " seed " << seed;
      EXPECT_GT(r.entries, 0u);
    }
  }
}

TEST(GradCheck, FullAgentPasses) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& r : {testing::SenderPassCheck(seed, 3),
                          testing::ReceiverPassCheck(seed, 3)}) {
      EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
      EXPECT_LT(r.max_kink_error, 1e-3) << "seed " << seed;
      EXPECT_LE(r.kinks * 10, r.entries);
    }
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // An op with a deliberately wrong backward must fail the check.
  GraphFunction bad = [](Graph& g, const std::vector<Var>& v) {
    Tensor out = v[0].value();
    for (double& x : out.values()) x = x * x;
    Var sq = g.Record(out, {v[0]}, [x = v[0]](Graph& gg, Var o) {
      Tensor& gx = gg.grad(x);
      const Tensor& go = gg.grad_or_zero(o);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];  // not 2x
    });
    return Sum(sq);
  };
  Rng rng(1);
  EXPECT_GT(GradCheck(bad, {RandomTensor({4}, rng)}).max_relative_error, 0.1);
}

TEST(Conv2d, ShapeArithmetic) {
  Graph g;
  Rng rng(2);
  Var x = g.Constant(RandomTensor({16, 16, 3}, rng));
  Var k = g.Constant(RandomTensor({3, 3, 3, 32}, rng));
  EXPECT_EQ(Conv2d(x, k).shape(), (Shape{14, 14, 32}));
  Var xb = g.Constant(RandomTensor({2, 16, 16, 3}, rng));
  EXPECT_EQ(Conv2d(xb, k).shape(), (Shape{2, 14, 14, 32}));
  EXPECT_THROW(Conv2d(x, g.Constant(RandomTensor({3, 3, 2, 4}, rng))),
               ShapeError);
}

TEST(Conv2d, IdentityKernel) {
  Graph g;
  Rng rng(3);
  Tensor in = RandomTensor({5, 4, 1}, rng);
  Var y = Conv2d(g.Constant(in), g.Constant(Tensor({1, 1, 1, 1}, {1.0})));
  EXPECT_EQ(y.value().vector(), in.vector());
}

TEST(MaxPool, WindowMaxAndFirstOccurrenceRouting) {
  Graph g;
  // 2x2 single-channel window with a tie: gradient goes to the first.
  Var x = g.Input(Tensor({2, 2, 1}, {3.0, 3.0, 1.0, 2.0}));
  Var y = MaxPool2x2(x);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y.value()[0], 3.0);
  g.Backward(Sum(y));
  EXPECT_EQ(x.grad().vector(), (std::vector<double>{1.0, 0.0, 0.0, 0.0}));
  // Odd trailing rows and columns are dropped.
  Graph g2;
  Rng rng(4);
  EXPECT_EQ(MaxPool2x2(g2.Constant(RandomTensor({5, 7, 2}, rng))).shape(),
            (Shape{2, 3, 2}));
}

TEST(Dense, IdentityWeights) {
  Graph g;
  Tensor eye({3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Tensor x({2, 3}, {1, -2, 3, 0.5, 0, -1});
  Var y = Dense(g.Constant(x), g.Constant(eye), g.Constant(Tensor({3}, 0.0)));
  EXPECT_EQ(y.value().vector(), x.vector());
  EXPECT_EQ(Relu(g.Constant(x)).value().vector(),
            (std::vector<double>{1, 0, 3, 0.5, 0, 0}));
}

TEST(Softmax, SumsToOneAndUniformOnZeros) {
  Graph g;
  Var u = Softmax(g.Constant(Tensor({4}, 0.0)));
  for (double v : u.value().values()) EXPECT_DOUBLE_EQ(v, 0.25);
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Var p = Softmax(g.Constant(RandomTensor({3, 7}, rng, 30.0)));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (double v : p.value().row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  // Large logits stay finite.
  Var big = Softmax(g.Constant(Tensor({3}, {1000.0, 999.0, -1000.0})));
  EXPECT_TRUE(big.value().AllFinite());
}

TEST(Embedding, GradientOnlyReachesTheLookedUpRow) {
  Graph g;
  Rng rng(6);
  Var table = g.Input(RandomTensor({5, 3}, rng));
  g.Backward(Sum(EmbeddingLookup(table, 2)));
  const Tensor& gr = table.grad();
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(gr[r * 3 + c], r == 2 ? 1.0 : 0.0);
    }
  }
  Graph g2;
  EXPECT_THROW(EmbeddingLookup(g2.Constant(Tensor({5, 3})), 5),
               std::out_of_range);
}

GruVars ZeroGru(Graph& g, std::size_t in, std::size_t hid) {
  auto z = [&](Shape s) { return g.Constant(Tensor(s, 0.0)); };
  return {z({in, hid}), z({hid, hid}), z({hid}), z({in, hid}), z({hid, hid}),
          z({hid}),     z({in, hid}), z({hid, hid}), z({hid})};
}

TEST(Gru, ZeroParametersHalveTheState) {
  Graph g;
  Rng rng(7);
  Tensor h = RandomTensor({4}, rng);
  Var out = GruStep(g.Constant(RandomTensor({3}, rng)), g.Constant(h),
                    ZeroGru(g, 3, 4));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.value()[i], 0.5 * h[i]);
}

TEST(Gru, ZeroInputAndStateStayZero) {
  Graph g;
  Rng rng(8);
  GruParams p = GruParams::Create(3, 4, "gru", rng);
  GruVars v = GruVars::Bind(g, p);
  Var out = GruStep(g.Constant(Tensor({3}, 0.0)), g.Constant(Tensor({4}, 0.0)), v);
  for (double x : out.value().values()) EXPECT_EQ(x, 0.0);
}

TEST(Gru, MatchesHandComputedStep) {
  // Scalar GRU with known weights.
  Graph g;
  auto c = [&](double v, Shape s) { return g.Constant(Tensor(s, v)); };
  GruVars p{c(0.5, {1, 1}), c(-0.3, {1, 1}), c(0.1, {1}),
            c(0.2, {1, 1}), c(0.4, {1, 1}),  c(-0.2, {1}),
            c(0.7, {1, 1}), c(-0.6, {1, 1}), c(0.05, {1})};
  const double x = 0.8, h = -0.4;
  auto sig = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
  const double z = sig(0.5 * x - 0.3 * h + 0.1);
  const double r = sig(0.2 * x + 0.4 * h - 0.2);
  const double ht = std::tanh(0.7 * x - 0.6 * (r * h) + 0.05);
  const double expect = (1 - z) * h + z * ht;
  Var out = GruStep(c(x, {1}), c(h, {1}), p);
  EXPECT_NEAR(out.value()[0], expect, 1e-15);
}

TEST(CrossEntropy, ClampsAtFloor) {
  Graph g;
  Var ce = CrossEntropy(g.Constant(Tensor({2}, {1.0, 0.0})),
                        Tensor({2}, {0.0, 1.0}));
  EXPECT_NEAR(ce.value().item(), -std::log(1e-12), 1e-9);
}

TEST(Sampling, DegenerateAndBalanced) {
  Rng rng(9);
  const double one[] = {1.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(SampleCategorical(one, rng), 0u);
  const double half[] = {0.5, 0.5};
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += SampleCategorical(half, rng) == 0;
  EXPECT_GE(zeros, 49000);
  EXPECT_LE(zeros, 51000);
  const double p[] = {0.2, 0.5, 0.3};
  EXPECT_EQ(Argmax(p), 1u);
  const double tie[] = {0.4, 0.4, 0.2};
  EXPECT_EQ(Argmax(tie), 0u);
}

TEST(Sampling, DeterministicGivenStream) {
  const double p[] = {0.1, 0.2, 0.3, 0.4};
  Rng a(10), b(10);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(SampleCategorical(p, a), SampleCategorical(p, b));
  }
}

TEST(Optim, SgdStep) {
  Parameter p("w", Tensor({1}, {1.0}));
  p.grad[0] = 0.5;
  std::vector<Parameter*> ps = {&p};
  SgdStep(ps, 0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 0.95);
  p.grad[0] = 0.0;
  SgdStep(ps, 0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 0.95);
}

TEST(Optim, AdamFirstStepClosedForm) {
  Parameter p("w", Tensor({1}, {1.0}));
  p.grad[0] = 1.0;
  std::vector<Parameter*> ps = {&p};
  AdamState st;
  AdamStep(ps, st, 0.001);
  // m_hat = v_hat = 1: step = lr * 1 / (1 + eps).
  EXPECT_NEAR(p.value[0], 1.0 - 0.001 / (1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value[0], 0.9990, 1e-6);
  EXPECT_EQ(st.step, 1);
  ASSERT_EQ(st.m.size(), 1u);
  EXPECT_EQ(st.m[0].shape(), p.value.shape());
  EXPECT_EQ(st.v[0].shape(), p.value.shape());
}

TEST(Optim, NonTrainableParametersUntouched) {
  Parameter a("a", Tensor({2}, {1.0, 2.0}));
  Parameter b("b", Tensor({2}, {3.0, 4.0}));
  b.trainable = false;
  a.grad.Fill(1.0);
  b.grad.Fill(1.0);
  std::vector<Parameter*> ps = {&a, &b};
  AdamState st;
  AdamStep(ps, st, 0.1);
  SgdStep(ps, 0.1);
  EXPECT_EQ(b.value.vector(), (std::vector<double>{3.0, 4.0}));
  EXPECT_NE(a.value.vector(), (std::vector<double>{1.0, 2.0}));
}

TEST(Graph, FrozenParametersGetNoGradient) {
  Graph g;
  Parameter w("w", Tensor({2, 2}, {1, 2, 3, 4}));
  w.trainable = false;
  Var x = g.Input(Tensor({2}, {1.0, 1.0}));
  Var y = Sum(MatMul(x, g.Param(w)));
  EXPECT_FALSE(g.requires_grad(g.Param(w)));
  g.Backward(y);
  EXPECT_EQ(x.grad().vector(), (std::vector<double>{3.0, 7.0}));
  for (double v : w.grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(Graph, ForwardIsDeterministic) {
  Rng r1(11), r2(11);
  const auto a = testing::GradProblems(3);
  const auto b = testing::GradProblems(3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    Graph g1, g2;
    std::vector<Var> v1, v2;
    for (const auto& t : a[i].inputs) v1.push_back(g1.Constant(t));
    for (const auto& t : b[i].inputs) v2.push_back(g2.Constant(t));
    EXPECT_EQ(a[i].fn(g1, v1).value().item(), b[i].fn(g2, v2).value().item());
  }
}

TEST(Checkpoint, RoundTripAndValidation) {
  const auto dir = testing::ScratchDir("ckpt");
  Rng rng(12);
  Parameter a("a", RandomTensor({2, 3}, rng));
  Parameter b("b", RandomTensor({4}, rng));
  const std::vector<const Parameter*> cps = {&a, &b};
  const std::string path = (dir / "p.bin").string();
  SaveParameters(path, cps);
  Parameter a2("a", Tensor({2, 3})), b2("b", Tensor({4}));
  std::vector<Parameter*> ps = {&b2, &a2};
  LoadParameters(path, ps);
  EXPECT_EQ(a2.value, a.value);
  EXPECT_EQ(b2.value, b.value);
  const auto all = ReadParameters(path);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].name, "a");
  // Shape mismatch and a missing name are rejected.
  Parameter wrong("a", Tensor({3, 2}));
  std::vector<Parameter*> bad = {&wrong};
  EXPECT_THROW(LoadParameters(path, bad), ShapeError);
  Parameter missing("c", Tensor({1}));
  std::vector<Parameter*> bad2 = {&missing};
  EXPECT_THROW(LoadParameters(path, bad2), FormatError);
  // Truncation.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() - 5);
  }
  EXPECT_THROW(ReadParameters(path), FormatError);
}

}  // namespace
}  // namespace emergelab::nn
