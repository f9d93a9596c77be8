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

// Reverse-mode differentiation over a per-pass tape.
//
// A Graph records every op output as a node. Nodes whose ancestors contain
// no trainable parameter (and no input explicitly marked as requiring a
// gradient) carry no backward closure, so frozen sub-networks cost only
// their forward pass. Graph::Backward(loss) seeds d(loss)/d(loss) = 1 and
// walks the tape in reverse, accumulating into Parameter::grad.
//
// Batched layouts: images are [B, H, W, C], dense activations [B, F].
// Most ops also accept the unbatched rank (one fewer leading dimension).

#ifndef EMERGELAB_AUTODIFF_HPP_
#define EMERGELAB_AUTODIFF_HPP_

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "emergelab/common.hpp"
#include "emergelab/tensor.hpp"

namespace emergelab::nn {

class Graph;

class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  // Gradient after Graph::Backward; zeros if none reached this node.
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  // Called with the node's own output handle; reads grad(out).
  using BackwardFn = std::function<void(Graph&, Var out)>;

  Graph() = default;
  // With gradients disabled every parameter binds as a constant and no
  // backward closures are kept (inference mode).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  // Differentiable input not tied to a parameter (used by gradient checks).
  Var Input(Tensor value);
  // Leaf bound to a parameter; requires a gradient iff p.trainable.
  Var Param(Parameter& p);

  // Appends an op output. The backward closure is dropped when no parent
  // requires a gradient.
  Var Record(Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  // Mutable gradient buffer, allocated as zeros on first access.
  Tensor& grad(Var v);
  const Tensor& grad_or_zero(Var v);

  // loss must hold exactly one value.
  void Backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// --- elementwise ---------------------------------------------------------

Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
// Elementwise product with a constant tensor of the same shape.
Var MulConst(Var a, const Tensor& c);
Var Scale(Var a, double c);
Var AddScalar(Var a, double c);
Var Relu(Var x);
Var Sigmoid(Var x);
Var Tanh(Var x);

// --- linear --------------------------------------------------------------

// x [B, In] or [In], w [In, Out] -> [B, Out] or [Out].
Var MatMul(Var x, Var w);
// MatMul plus bias [Out].
Var Dense(Var x, Var w, Var b);
// Valid, stride-1 cross-correlation. x [B, H, W, Cin] or [H, W, Cin],
// kernels [k, k, Cin, Cout], bias [Cout] (optional: pass an invalid Var).
Var Conv2d(Var x, Var kernels, Var bias = Var());
// 2x2 / stride 2. Odd trailing rows/columns are dropped. The gradient goes
// to the first maximum in row-major window order.
Var MaxPool2x2(Var x);
Var Reshape(Var x, Shape shape);

// --- reductions and normalisation ---------------------------------------

// Over the last dimension, with max subtraction.
Var Softmax(Var logits);
Var LogSoftmax(Var logits);
// [B, C] -> [B]
Var SumRows(Var x);
Var Sum(Var x);
Var Mean(Var x);
// x [B, C], one index per row -> [B].
Var Gather(Var x, std::span<const int> index);
// Rows of table [V, D] for each symbol -> [N, D].
Var Embedding(Var table, std::span<const int> symbols);
// Single-symbol lookup -> [D].
Var EmbeddingLookup(Var table, int symbol);
// candidates [B, K, D], query [B, D] -> scores [B, K].
Var BatchedDot(Var candidates, Var query);

// -sum_c target_c log p_c with log clamped below at log(1e-12). probs and
// target are [C] (-> scalar) or [B, C] (-> [B]).
Var CrossEntropy(Var probs, const Tensor& target);
// Same loss computed from logits through log-softmax.
Var SoftmaxCrossEntropy(Var logits, const Tensor& target);
// Entropy (nats) of softmax(logits) per row -> [B].
Var SoftmaxEntropy(Var logits);

// --- recurrent ----------------------------------------------------------

struct GruParams {
  Parameter w_z, u_z, b_z;
  Parameter w_r, u_r, b_r;
  Parameter w_h, u_h, b_h;

  // Uniform +-1/sqrt(fan_in) matrices, zero biases.
  static GruParams Create(std::size_t input_dim, std::size_t hidden_dim,
                          const std::string& prefix, Rng& rng);
  std::vector<Parameter*> parameters();
};

struct GruVars {
  Var w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h;
  static GruVars Bind(Graph& g, GruParams& p);
};

// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
// h~ = tanh(Wh x + Uh (r . h) + bh), h' = (1 - z) . h + z . h~.
// Weights are stored [in, out] so that x W applies them to row vectors.
Var GruStep(Var x, Var h, const GruVars& p);

// --- non-differentiable helpers ------------------------------------------

std::size_t SampleCategorical(std::span<const double> probs, Rng& rng);
// Ties resolve to the lowest index.
std::size_t Argmax(std::span<const double> probs);

// --- gradient checking ---------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
};

using GraphFunction = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares analytic gradients of a scalar-valued fn with central finite
// differences. Relative error is |a - n| / max(|a|, |n|, floor); the floor
// keeps entries whose true gradient is ~0 from dividing roundoff by zero.
GradCheckReport GradCheck(const GraphFunction& fn,
                          const std::vector<Tensor>& inputs,
                          double step = 1e-5, double floor = 1e-6);

}  // namespace emergelab::nn

#endif  // EMERGELAB_AUTODIFF_HPP_
