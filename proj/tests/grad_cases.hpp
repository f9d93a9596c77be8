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

// Finite-difference problems covering every differentiable op, and a
// parameter-level check of complete sender and receiver forward passes.
// Each problem reduces an op's output to a scalar through a fixed random
// projection so that every output entry contributes to the gradient.

#ifndef EMERGELAB_TESTS_GRAD_CASES_HPP_
#define EMERGELAB_TESTS_GRAD_CASES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "emergelab/agents.hpp"
#include "emergelab/autodiff.hpp"

namespace emergelab::testing {

struct GradProblem {
  std::string name;
  std::vector<nn::Tensor> inputs;
  nn::GraphFunction fn;
};

inline nn::Tensor RandomTensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * StandardNormal(rng);
  return t;
}

inline nn::Tensor RandomDistribution(nn::Shape shape, Rng& rng) {
  nn::Tensor t(shape);
  const std::size_t cols = shape.back();
  for (std::size_t r = 0; r < t.size() / cols; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      t[r * cols + c] = 0.1 + UniformUnit(rng);
      s += t[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] /= s;
  }
  return t;
}

// Scalar sum(out * w) with w drawn once for the problem.
inline nn::Var Project(nn::Var out, const nn::Tensor& w) {
  return nn::Sum(nn::MulConst(out, w));
}

inline std::vector<GradProblem> GradProblems(std::uint64_t seed) {
  using nn::Graph;
  using nn::Shape;
  using nn::Tensor;
  using nn::Var;
  using V = std::vector<Var>;
  Rng rng(seed);
  std::vector<GradProblem> out;
  auto add = [&](std::string name, std::vector<Tensor> inputs, Shape out_shape,
                 std::function<Var(Graph&, const V&)> body) {
    Tensor w = RandomTensor(out_shape, rng);
    out.push_back({std::move(name), std::move(inputs),
                   [body, w](Graph& g, const V& v) {
                     return Project(body(g, v), w);
                   }});
  };
  add("add", {RandomTensor({3, 4}, rng), RandomTensor({3, 4}, rng)}, {3, 4},
      [](Graph&, const V& v) { return nn::Add(v[0], v[1]); });
  add("sub", {RandomTensor({3, 4}, rng), RandomTensor({3, 4}, rng)}, {3, 4},
      [](Graph&, const V& v) { return nn::Sub(v[0], v[1]); });
  add("mul", {RandomTensor({3, 4}, rng), RandomTensor({3, 4}, rng)}, {3, 4},
      [](Graph&, const V& v) { return nn::Mul(v[0], v[1]); });
  {
    Tensor c = RandomTensor({3, 4}, rng);
    add("mul_const", {RandomTensor({3, 4}, rng)}, {3, 4},
        [c](Graph&, const V& v) { return nn::MulConst(v[0], c); });
  }
  add("scale", {RandomTensor({5}, rng)}, {5},
      [](Graph&, const V& v) { return nn::Scale(v[0], -1.7); });
  add("add_scalar", {RandomTensor({5}, rng)}, {5},
      [](Graph&, const V& v) { return nn::AddScalar(v[0], 0.3); });
  add("relu", {RandomTensor({4, 5}, rng)}, {4, 5},
      [](Graph&, const V& v) { return nn::Relu(v[0]); });
  add("sigmoid", {RandomTensor({4, 5}, rng, 2.0)}, {4, 5},
      [](Graph&, const V& v) { return nn::Sigmoid(v[0]); });
  add("tanh", {RandomTensor({4, 5}, rng)}, {4, 5},
      [](Graph&, const V& v) { return nn::Tanh(v[0]); });
  add("matmul", {RandomTensor({3, 4}, rng), RandomTensor({4, 5}, rng)}, {3, 5},
      [](Graph&, const V& v) { return nn::MatMul(v[0], v[1]); });
  add("matmul_vector", {RandomTensor({4}, rng), RandomTensor({4, 5}, rng)},
      {5}, [](Graph&, const V& v) { return nn::MatMul(v[0], v[1]); });
  add("dense",
      {RandomTensor({3, 4}, rng), RandomTensor({4, 2}, rng),
       RandomTensor({2}, rng)},
      {3, 2}, [](Graph&, const V& v) { return nn::Dense(v[0], v[1], v[2]); });
  add("conv2d",
      {RandomTensor({5, 5, 2}, rng), RandomTensor({3, 3, 2, 3}, rng, 0.5)},
      {3, 3, 3}, [](Graph&, const V& v) { return nn::Conv2d(v[0], v[1]); });
  add("conv2d_batched_bias",
      {RandomTensor({2, 5, 6, 2}, rng), RandomTensor({3, 3, 2, 3}, rng, 0.5),
       RandomTensor({3}, rng)},
      {2, 3, 4, 3},
      [](Graph&, const V& v) { return nn::Conv2d(v[0], v[1], v[2]); });
  add("maxpool2x2", {RandomTensor({2, 5, 4, 3}, rng)}, {2, 2, 2, 3},
      [](Graph&, const V& v) { return nn::MaxPool2x2(v[0]); });
  add("reshape", {RandomTensor({2, 6}, rng)}, {3, 4},
      [](Graph&, const V& v) { return nn::Reshape(v[0], {3, 4}); });
  add("softmax", {RandomTensor({3, 5}, rng)}, {3, 5},
      [](Graph&, const V& v) { return nn::Softmax(v[0]); });
  add("log_softmax", {RandomTensor({3, 5}, rng)}, {3, 5},
      [](Graph&, const V& v) { return nn::LogSoftmax(v[0]); });
  add("sum_rows", {RandomTensor({3, 5}, rng)}, {3},
      [](Graph&, const V& v) { return nn::SumRows(v[0]); });
  add("sum", {RandomTensor({3, 5}, rng)}, {},
      [](Graph&, const V& v) { return nn::Sum(v[0]); });
  add("mean", {RandomTensor({3, 5}, rng)}, {},
      [](Graph&, const V& v) { return nn::Mean(v[0]); });
  add("gather", {RandomTensor({3, 5}, rng)}, {3}, [](Graph&, const V& v) {
    static const int idx[] = {1, 4, 0};
    return nn::Gather(v[0], idx);
  });
  add("embedding", {RandomTensor({6, 4}, rng)}, {4, 4}, [](Graph&, const V& v) {
    static const int sym[] = {1, 3, 1, 5};
    return nn::Embedding(v[0], sym);
  });
  add("embedding_lookup", {RandomTensor({6, 4}, rng)}, {4},
      [](Graph&, const V& v) { return nn::EmbeddingLookup(v[0], 2); });
  add("batched_dot", {RandomTensor({2, 3, 4}, rng), RandomTensor({2, 4}, rng)},
      {2, 3}, [](Graph&, const V& v) { return nn::BatchedDot(v[0], v[1]); });
  {
    Tensor target = RandomDistribution({3, 5}, rng);
    add("cross_entropy", {RandomTensor({3, 5}, rng)}, {3},
        [target](Graph&, const V& v) {
          return nn::CrossEntropy(nn::Softmax(v[0]), target);
        });
  }
  {
    Tensor target = RandomDistribution({5}, rng);
    add("cross_entropy_vector", {RandomTensor({5}, rng)}, {},
        [target](Graph&, const V& v) {
          return nn::CrossEntropy(nn::Softmax(v[0]), target);
        });
  }
  {
    Tensor target = RandomDistribution({3, 5}, rng);
    add("softmax_cross_entropy", {RandomTensor({3, 5}, rng)}, {3},
        [target](Graph&, const V& v) {
          return nn::SoftmaxCrossEntropy(v[0], target);
        });
  }
  add("softmax_entropy", {RandomTensor({3, 5}, rng)}, {3},
      [](Graph&, const V& v) { return nn::SoftmaxEntropy(v[0]); });
  {
    // Three GRU steps; inputs are x1..x3, h0 and the nine gate tensors.
    std::vector<Tensor> in;
    for (int t = 0; t < 3; ++t) in.push_back(RandomTensor({2, 3}, rng));
    in.push_back(RandomTensor({2, 4}, rng, 0.5));
    for (int gate = 0; gate < 3; ++gate) {
      in.push_back(RandomTensor({3, 4}, rng, 0.5));
      in.push_back(RandomTensor({4, 4}, rng, 0.5));
      in.push_back(RandomTensor({4}, rng, 0.5));
    }
    add("gru_bptt_3_steps", in, {2, 4}, [](Graph&, const V& v) {
      nn::GruVars p{v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12]};
      Var h = v[3];
      for (int t = 0; t < 3; ++t) h = nn::GruStep(v[t], h, p);
      return h;
    });
  }
  return out;
}

struct ParamCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
  // Probes that straddled a ReLU or max-pool switch. Those are replaced by
  // a fresh probe; the analytic value must still match one side.
  std::size_t kinks = 0;
  double max_kink_error = 0.0;
};

// Perturbs `probes` randomly chosen entries of every trainable parameter
// and compares the central difference of loss() with the gradient left by
// backward(). The relative-error floor defaults to 1e-5: at step 1e-5 the
// central difference of a loss of magnitude ~10 carries ~1e-10 absolute
// roundoff, so entries below the floor are compared in absolute terms.
// A probe is non-smooth when its one-sided differences disagree by more
// than 1e-3 relative.
inline ParamCheckReport CheckParameterGradients(
    std::vector<nn::Parameter*> params, const std::function<double()>& loss,
    const std::function<void()>& backward, Rng& rng, int probes,
    double step = 1e-5, double floor = 1e-5) {
  for (nn::Parameter* p : params) p->ZeroGrad();
  backward();
  const double base = loss();
  ParamCheckReport report;
  for (nn::Parameter* p : params) {
    if (!p->trainable) continue;
    int done = 0;
    for (int attempt = 0; done < probes && attempt < 10 * probes; ++attempt) {
      const std::size_t i = UniformIndex(rng, p->value.size());
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double up = loss();
      p->value[i] = orig - step;
      const double down = loss();
      p->value[i] = orig;
      const double fwd = (up - base) / step;
      const double bwd = (base - down) / step;
      const double numeric = (up - down) / (2.0 * step);
      const double a = p->grad[i];
      const double scale = std::max({std::abs(fwd), std::abs(bwd), floor});
      if (std::abs(fwd - bwd) > 1e-3 * scale) {
        ++report.kinks;
        const double side = std::min(std::abs(a - fwd), std::abs(a - bwd));
        report.max_kink_error = std::max(report.max_kink_error, side / scale);
        continue;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      report.max_relative_error =
          std::max(report.max_relative_error, std::abs(a - numeric) / denom);
      ++report.entries;
      ++done;
    }
  }
  for (nn::Parameter* p : params) p->ZeroGrad();
  return report;
}

// Full sender pass (vision, f1, GRU, f2) on a small image batch: the loss
// is the log-probability of fixed messages. Step entropies are left out
// since greedy decoding makes them piecewise in the parameters.
inline ParamCheckReport SenderPassCheck(std::uint64_t seed, int probes) {
  Rng rng(seed);
  const ImageSize size{10, 10};
  Agent agent = Agent::Create(Role::kSender, size, 4, rng);
  nn::Tensor images = RandomTensor({2, 10, 10, 3}, rng, 0.3);
  for (double& v : images.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
  const std::vector<std::vector<int>> messages = {{0, 3, 1}, {2, 2, 0}};
  auto build = [&](nn::Graph& g) {
    auto vis = agent.vision.Forward(g, g.Constant(images));
    return nn::Sum(SenderLogProb(g, agent, vis.representation, messages));
  };
  return CheckParameterGradients(
      agent.parameters(),
      [&] {
        nn::Graph g(false);
        return build(g).value().item();
      },
      [&] {
        nn::Graph g;
        g.Backward(build(g));
      },
      rng, probes);
}

// Full receiver pass (vision on candidates, f1, GRU over the message,
// dot-product scores): the loss is the log-probability of a fixed choice
// plus the selection entropy.
inline ParamCheckReport ReceiverPassCheck(std::uint64_t seed, int probes) {
  Rng rng(seed);
  const ImageSize size{10, 10};
  Agent agent = Agent::Create(Role::kReceiver, size, 4, rng);
  nn::Tensor images = RandomTensor({6, 10, 10, 3}, rng, 0.3);
  for (double& v : images.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
  const std::vector<std::vector<int>> messages = {{1, 0, 3}, {2, 1, 1}};
  auto build = [&](nn::Graph& g) {
    auto vis = agent.vision.Forward(g, g.Constant(images));
    nn::Var cands = nn::Reshape(vis.representation, {2, 3, kRepresentationDim});
    Rng local(1);
    ReceiverOutput ro = ReceiverForward(g, agent, messages, cands,
                                        DecodeMode::kGreedy, local);
    // CrossEntropy against a one-hot target is -log p(chosen).
    nn::Var nll = nn::Sum(nn::CrossEntropy(
        ro.probs, nn::Tensor({2, 3}, {0, 0, 1, 1, 0, 0})));
    return nn::Add(nn::Scale(nll, -1.0), nn::Scale(nn::Sum(ro.entropy), 0.1));
  };
  return CheckParameterGradients(
      agent.parameters(),
      [&] {
        nn::Graph g(false);
        return build(g).value().item();
      },
      [&] {
        nn::Graph g;
        g.Backward(build(g));
      },
      rng, probes);
}

}  // namespace emergelab::testing

#endif  // EMERGELAB_TESTS_GRAD_CASES_HPP_
