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

#include "emergelab/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace emergelab::nn {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat AsMat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
}
MapMat AsMat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + ShapeString(a.shape()) +
                     " vs " + ShapeString(b.shape()));
  }
}

void AddInto(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Rows x columns view of a tensor whose last dimension is the feature axis.
std::pair<std::size_t, std::size_t> RowsCols(const Tensor& t) {
  if (t.rank() == 0) return {1, 1};
  const std::size_t cols = t.shape().back();
  return {cols == 0 ? 0 : t.size() / cols, cols};
}

}  // namespace

// --- Var / Graph ---------------------------------------------------------

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad_or_zero(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Var Graph::Constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::Input(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::Param(Parameter& p) {
  if (!p.trainable || !grad_enabled_) return Constant(p.value);
  Parameter* ptr = &p;
  nodes_.push_back(Node{p.value, Tensor(), true, [ptr](Graph& g, Var out) {
                          if (ptr->grad.shape() != ptr->value.shape()) {
                            ptr->ZeroGrad();
                          }
                          AddInto(ptr->grad, g.grad(out));
                        }});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::Record(Tensor value, std::initializer_list<Var> parents,
                  BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.valid() && requires_grad(p)) needs = true;
  }
  nodes_.push_back(Node{std::move(value), Tensor(), needs,
                        needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Graph::grad(Var v) {
  Node& n = nodes_.at(v.id());
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

const Tensor& Graph::grad_or_zero(Var v) { return grad(v); }

void Graph::Backward(Var loss) {
  if (loss.graph_ != this) throw std::invalid_argument("Backward: foreign Var");
  if (value(loss).size() != 1) {
    throw ShapeError("Backward: loss must be a single value, got " +
                     ShapeString(value(loss).shape()));
  }
  grad(loss)[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, Var(this, i));
  }
}

// --- elementwise ---------------------------------------------------------

Var Add(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Add");
  Tensor out = a.value();
  AddInto(out, b.value());
  return a.graph().Record(std::move(out), {a, b}, [a, b](Graph& g, Var o) {
    if (a.requires_grad()) AddInto(g.grad(a), g.grad(o));
    if (b.requires_grad()) AddInto(g.grad(b), g.grad(o));
  });
}

Var Sub(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph().Record(std::move(out), {a, b}, [a, b](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    if (a.requires_grad()) AddInto(g.grad(a), go);
    if (b.requires_grad()) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var Mul(Var a, Var b) {
  RequireSameShape(a.value(), b.value(), "Mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph().Record(std::move(out), {a, b}, [a, b](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    if (a.requires_grad()) {
      Tensor& ga = g.grad(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = g.grad(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

Var MulConst(Var a, const Tensor& c) {
  RequireSameShape(a.value(), c, "MulConst");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return a.graph().Record(std::move(out), {a}, [a, c](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c[i];
  });
}

Var Scale(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return a.graph().Record(std::move(out), {a}, [a, c](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
  });
}

Var AddScalar(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  return a.graph().Record(std::move(out), {a}, [a](Graph& g, Var o) {
    AddInto(g.grad(a), g.grad(o));
  });
}

Var Relu(Var x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return x.graph().Record(std::move(out), {x}, [x](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    const Tensor& xv = x.value();
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += go[i];
    }
  });
}

Var Sigmoid(Var x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  }
  return x.graph().Record(std::move(out), {x}, [x](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    const Tensor& ov = o.value();
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) {
      gx[i] += go[i] * ov[i] * (1.0 - ov[i]);
    }
  });
}

Var Tanh(Var x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return x.graph().Record(std::move(out), {x}, [x](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    const Tensor& ov = o.value();
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) {
      gx[i] += go[i] * (1.0 - ov[i] * ov[i]);
    }
  });
}

// --- linear --------------------------------------------------------------

namespace {

struct MatMulDims {
  std::size_t rows, in, out;
  Shape out_shape;
};

MatMulDims CheckMatMul(const Tensor& x, const Tensor& w, const char* op) {
  if (w.rank() != 2 || (x.rank() != 1 && x.rank() != 2) ||
      x.shape().back() != w.dim(0)) {
    throw ShapeError(std::string(op) + ": x " + ShapeString(x.shape()) +
                     " w " + ShapeString(w.shape()));
  }
  MatMulDims d;
  d.in = w.dim(0);
  d.out = w.dim(1);
  d.rows = x.rank() == 1 ? 1 : x.dim(0);
  d.out_shape = x.rank() == 1 ? Shape{d.out} : Shape{d.rows, d.out};
  return d;
}

void MatMulBackward(Graph& g, Var o, Var x, Var w, const MatMulDims& d) {
  const Tensor& go = g.grad(o);
  const auto G = AsMat(go, d.rows, d.out);
  if (x.requires_grad()) {
    auto gx = AsMat(g.grad(x), d.rows, d.in);
    gx.noalias() += G * AsMat(w.value(), d.in, d.out).transpose();
  }
  if (w.requires_grad()) {
    auto gw = AsMat(g.grad(w), d.in, d.out);
    gw.noalias() += AsMat(x.value(), d.rows, d.in).transpose() * G;
  }
}

}  // namespace

Var MatMul(Var x, Var w) {
  const MatMulDims d = CheckMatMul(x.value(), w.value(), "MatMul");
  Tensor out(d.out_shape);
  AsMat(out, d.rows, d.out).noalias() =
      AsMat(x.value(), d.rows, d.in) * AsMat(w.value(), d.in, d.out);
  return x.graph().Record(std::move(out), {x, w}, [x, w, d](Graph& g, Var o) {
    MatMulBackward(g, o, x, w, d);
  });
}

Var Dense(Var x, Var w, Var b) {
  const MatMulDims d = CheckMatMul(x.value(), w.value(), "Dense");
  if (b.value().rank() != 1 || b.value().dim(0) != d.out) {
    throw ShapeError("Dense: bias " + ShapeString(b.value().shape()));
  }
  Tensor out(d.out_shape);
  auto O = AsMat(out, d.rows, d.out);
  O.noalias() = AsMat(x.value(), d.rows, d.in) * AsMat(w.value(), d.in, d.out);
  O.rowwise() += AsMat(b.value(), 1, d.out).row(0);
  return x.graph().Record(
      std::move(out), {x, w, b}, [x, w, b, d](Graph& g, Var o) {
        MatMulBackward(g, o, x, w, d);
        if (b.requires_grad()) {
          auto gb = AsMat(g.grad(b), 1, d.out);
          gb += AsMat(g.grad(o), d.rows, d.out).colwise().sum();
        }
      });
}

Var Conv2d(Var x, Var kernels, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  const bool batched = xv.rank() == 4;
  if ((xv.rank() != 3 && xv.rank() != 4) || kv.rank() != 4) {
    throw ShapeError("Conv2d: input " + ShapeString(xv.shape()) + " kernels " +
                     ShapeString(kv.shape()));
  }
  const std::size_t B = batched ? xv.dim(0) : 1;
  const std::size_t H = xv.dim(batched ? 1 : 0);
  const std::size_t W = xv.dim(batched ? 2 : 1);
  const std::size_t C = xv.dim(batched ? 3 : 2);
  const std::size_t kh = kv.dim(0), kw = kv.dim(1), O = kv.dim(3);
  if (kv.dim(2) != C || kh > H || kw > W) {
    throw ShapeError("Conv2d: input " + ShapeString(xv.shape()) + " kernels " +
                     ShapeString(kv.shape()));
  }
  if (bias.valid() &&
      (bias.value().rank() != 1 || bias.value().dim(0) != O)) {
    throw ShapeError("Conv2d: bias " + ShapeString(bias.value().shape()));
  }
  const std::size_t Ho = H - kh + 1, Wo = W - kw + 1;
  const std::size_t patch = kh * kw * C;
  const std::size_t rows = B * Ho * Wo;

  // im2col: one row per output position, columns ordered (dy, dx, c) to
  // match the kernel memory layout.
  auto cols = std::make_shared<Tensor>(Shape{rows, patch});
  {
    double* dst = cols->data();
    const double* src = xv.data();
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t xx = 0; xx < Wo; ++xx) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            const double* line = src + ((b * H + y + dy) * W + xx) * C;
            std::copy(line, line + kw * C, dst);
            dst += kw * C;
          }
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{B, Ho, Wo, O} : Shape{Ho, Wo, O};
  Tensor out(out_shape);
  auto Out = AsMat(out, rows, O);
  Out.noalias() = AsMat(*cols, rows, patch) * AsMat(kv, patch, O);
  if (bias.valid()) Out.rowwise() += AsMat(bias.value(), 1, O).row(0);

  return x.graph().Record(
      std::move(out), {x, kernels, bias},
      [=](Graph& g, Var o) {
        const auto G = AsMat(g.grad(o), rows, O);
        if (kernels.requires_grad()) {
          AsMat(g.grad(kernels), patch, O).noalias() +=
              AsMat(*cols, rows, patch).transpose() * G;
        }
        if (bias.valid() && bias.requires_grad()) {
          AsMat(g.grad(bias), 1, O) += G.colwise().sum();
        }
        if (x.requires_grad()) {
          RowMat dcols = G * AsMat(kernels.value(), patch, O).transpose();
          double* gx = g.grad(x).data();
          const double* src = dcols.data();
          for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t y = 0; y < Ho; ++y) {
              for (std::size_t xx = 0; xx < Wo; ++xx) {
                for (std::size_t dy = 0; dy < kh; ++dy) {
                  double* line = gx + ((b * H + y + dy) * W + xx) * C;
                  for (std::size_t k = 0; k < kw * C; ++k) line[k] += src[k];
                  src += kw * C;
                }
              }
            }
          }
        }
      });
}

Var MaxPool2x2(Var x) {
  const Tensor& xv = x.value();
  const bool batched = xv.rank() == 4;
  if (xv.rank() != 3 && xv.rank() != 4) {
    throw ShapeError("MaxPool2x2: input " + ShapeString(xv.shape()));
  }
  const std::size_t B = batched ? xv.dim(0) : 1;
  const std::size_t H = xv.dim(batched ? 1 : 0);
  const std::size_t W = xv.dim(batched ? 2 : 1);
  const std::size_t C = xv.dim(batched ? 3 : 2);
  const std::size_t Ho = H / 2, Wo = W / 2;
  Shape out_shape = batched ? Shape{B, Ho, Wo, C} : Shape{Ho, Wo, C};
  Tensor out(out_shape);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t xx = 0; xx < Wo; ++xx) {
        for (std::size_t c = 0; c < C; ++c, ++o) {
          std::size_t best = ((b * H + 2 * y) * W + 2 * xx) * C + c;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  ((b * H + 2 * y + dy) * W + 2 * xx + dx) * C + c;
              if (xv[idx] > xv[best]) best = idx;
            }
          }
          out[o] = xv[best];
          (*argmax)[o] = best;
        }
      }
    }
  }
  return x.graph().Record(std::move(out), {x}, [x, argmax](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[(*argmax)[i]] += go[i];
  });
}

Var Reshape(Var x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  return x.graph().Record(std::move(out), {x}, [x](Graph& g, Var o) {
    AddInto(g.grad(x), g.grad(o));
  });
}

// --- reductions ---------------------------------------------------------

namespace {

void SoftmaxRows(const Tensor& logits, Tensor& probs) {
  const auto [rows, cols] = RowsCols(logits);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * cols;
    double* p = probs.data() + r * cols;
    const double m = *std::max_element(z, z + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(z[c] - m);
      s += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= s;
  }
}

void LogSoftmaxRows(const Tensor& logits, Tensor& out) {
  const auto [rows, cols] = RowsCols(logits);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * cols;
    double* l = out.data() + r * cols;
    const double m = *std::max_element(z, z + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(z[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) l[c] = z[c] - lse;
  }
}

Shape RowShape(const Tensor& t) {
  if (t.rank() <= 1) return Shape{};
  return Shape(t.shape().begin(), t.shape().end() - 1);
}

}  // namespace

Var Softmax(Var logits) {
  Tensor out(logits.value().shape());
  SoftmaxRows(logits.value(), out);
  return logits.graph().Record(std::move(out), {logits},
                               [logits](Graph& g, Var o) {
    const Tensor& p = o.value();
    const Tensor& go = g.grad(o);
    Tensor& gx = g.grad(logits);
    const auto [rows, cols] = RowsCols(p);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        dot += go[r * cols + c] * p[r * cols + c];
      }
      for (std::size_t c = 0; c < cols; ++c) {
        gx[r * cols + c] += p[r * cols + c] * (go[r * cols + c] - dot);
      }
    }
  });
}

Var LogSoftmax(Var logits) {
  Tensor out(logits.value().shape());
  LogSoftmaxRows(logits.value(), out);
  return logits.graph().Record(std::move(out), {logits},
                               [logits](Graph& g, Var o) {
    const Tensor& l = o.value();
    const Tensor& go = g.grad(o);
    Tensor& gx = g.grad(logits);
    const auto [rows, cols] = RowsCols(l);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += go[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        gx[r * cols + c] += go[r * cols + c] - std::exp(l[r * cols + c]) * s;
      }
    }
  });
}

Var SumRows(Var x) {
  const auto [rows, cols] = RowsCols(x.value());
  Tensor out(RowShape(x.value()));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x.value()[r * cols + c];
    out[r] = s;
  }
  return x.graph().Record(std::move(out), {x},
                          [x, rows = rows, cols = cols](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& gx = g.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += go[r];
    }
  });
}

Var Sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.graph().Record(Tensor::Scalar(s), {x}, [x](Graph& g, Var o) {
    const double go = g.grad(o)[0];
    Tensor& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

Var Mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return Scale(Sum(x), 1.0 / n);
}

Var Gather(Var x, std::span<const int> index) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.dim(0) != index.size()) {
    throw ShapeError("Gather: input " + ShapeString(xv.shape()) + " with " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t cols = xv.dim(1);
  std::vector<int> idx(index.begin(), index.end());
  Tensor out(Shape{idx.size()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= cols) {
      throw std::out_of_range("Gather: index out of range");
    }
    out[r] = xv[r * cols + idx[r]];
  }
  return x.graph().Record(std::move(out), {x},
                          [x, idx, cols](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& gx = g.grad(x);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      gx[r * cols + idx[r]] += go[r];
    }
  });
}

Var Embedding(Var table, std::span<const int> symbols) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) {
    throw ShapeError("Embedding: table " + ShapeString(tv.shape()));
  }
  const std::size_t V = tv.dim(0), D = tv.dim(1);
  std::vector<int> syms(symbols.begin(), symbols.end());
  Tensor out(Shape{syms.size(), D});
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (syms[i] < 0 || static_cast<std::size_t>(syms[i]) >= V) {
      throw std::out_of_range("Embedding: symbol " + std::to_string(syms[i]) +
                              " outside vocabulary of " + std::to_string(V));
    }
    std::copy_n(tv.data() + syms[i] * D, D, out.data() + i * D);
  }
  return table.graph().Record(std::move(out), {table},
                              [table, syms, D](Graph& g, Var o) {
    const Tensor& go = g.grad(o);
    Tensor& gt = g.grad(table);
    for (std::size_t i = 0; i < syms.size(); ++i) {
      for (std::size_t d = 0; d < D; ++d) {
        gt[syms[i] * D + d] += go[i * D + d];
      }
    }
  });
}

Var EmbeddingLookup(Var table, int symbol) {
  const int syms[1] = {symbol};
  Var rows = Embedding(table, syms);
  return Reshape(rows, Shape{table.value().dim(1)});
}

Var BatchedDot(Var candidates, Var query) {
  const Tensor& cv = candidates.value();
  const Tensor& qv = query.value();
  if (cv.rank() != 3 || qv.rank() != 2 || cv.dim(0) != qv.dim(0) ||
      cv.dim(2) != qv.dim(1)) {
    throw ShapeError("BatchedDot: candidates " + ShapeString(cv.shape()) +
                     " query " + ShapeString(qv.shape()));
  }
  const std::size_t B = cv.dim(0), K = cv.dim(1), D = cv.dim(2);
  Tensor out(Shape{B, K});
  for (std::size_t b = 0; b < B; ++b) {
    const double* q = qv.data() + b * D;
    for (std::size_t k = 0; k < K; ++k) {
      const double* c = cv.data() + (b * K + k) * D;
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += c[d] * q[d];
      out[b * K + k] = s;
    }
  }
  return candidates.graph().Record(
      std::move(out), {candidates, query},
      [candidates, query, B, K, D](Graph& g, Var o) {
        const Tensor& go = g.grad(o);
        const Tensor& cv = candidates.value();
        const Tensor& qv = query.value();
        if (candidates.requires_grad()) {
          Tensor& gc = g.grad(candidates);
          for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
              const double s = go[b * K + k];
              for (std::size_t d = 0; d < D; ++d) {
                gc[(b * K + k) * D + d] += s * qv[b * D + d];
              }
            }
          }
        }
        if (query.requires_grad()) {
          Tensor& gq = g.grad(query);
          for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
              const double s = go[b * K + k];
              for (std::size_t d = 0; d < D; ++d) {
                gq[b * D + d] += s * cv[(b * K + k) * D + d];
              }
            }
          }
        }
      });
}

Var CrossEntropy(Var probs, const Tensor& target) {
  const Tensor& pv = probs.value();
  RequireSameShape(pv, target, "CrossEntropy");
  constexpr double kFloor = 1e-12;
  const auto [rows, cols] = RowsCols(pv);
  Tensor out(RowShape(pv));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      if (target[i] != 0.0) s -= target[i] * std::log(std::max(pv[i], kFloor));
    }
    out[r] = s;
  }
  return probs.graph().Record(
      std::move(out), {probs},
      [probs, target, rows = rows, cols = cols](Graph& g, Var o) {
        const Tensor& go = g.grad(o);
        const Tensor& pv = probs.value();
        Tensor& gp = g.grad(probs);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            if (pv[i] > kFloor) gp[i] -= go[r] * target[i] / pv[i];
          }
        }
      });
}

Var SoftmaxCrossEntropy(Var logits, const Tensor& target) {
  const Tensor& zv = logits.value();
  RequireSameShape(zv, target, "SoftmaxCrossEntropy");
  const auto [rows, cols] = RowsCols(zv);
  Tensor logp(zv.shape());
  LogSoftmaxRows(zv, logp);
  Tensor out(RowShape(zv));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      s -= target[r * cols + c] * logp[r * cols + c];
    }
    out[r] = s;
  }
  return logits.graph().Record(
      std::move(out), {logits},
      [logits, target, logp = std::move(logp), rows = rows,
       cols = cols](Graph& g, Var o) {
        const Tensor& go = g.grad(o);
        Tensor& gz = g.grad(logits);
        for (std::size_t r = 0; r < rows; ++r) {
          double tsum = 0.0;
          for (std::size_t c = 0; c < cols; ++c) tsum += target[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            gz[i] += go[r] * (std::exp(logp[i]) * tsum - target[i]);
          }
        }
      });
}

Var SoftmaxEntropy(Var logits) {
  const Tensor& zv = logits.value();
  const auto [rows, cols] = RowsCols(zv);
  Tensor logp(zv.shape());
  LogSoftmaxRows(zv, logp);
  Tensor out(RowShape(zv));
  for (std::size_t r = 0; r < rows; ++r) {
    double h = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double l = logp[r * cols + c];
      h -= std::exp(l) * l;
    }
    out[r] = h;
  }
  return logits.graph().Record(
      std::move(out), {logits},
      [logits, logp = std::move(logp), rows = rows, cols = cols](Graph& g,
                                                                 Var o) {
        const Tensor& go = g.grad(o);
        const Tensor& hv = o.value();
        Tensor& gz = g.grad(logits);
        // dH/dz_j = -p_j (log p_j + H)
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            gz[i] -= go[r] * std::exp(logp[i]) * (logp[i] + hv[r]);
          }
        }
      });
}

// --- recurrent ----------------------------------------------------------

namespace {

Tensor UniformInit(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (2.0 * UniformUnit(rng) - 1.0) * bound;
  return t;
}

}  // namespace

GruParams GruParams::Create(std::size_t input_dim, std::size_t hidden_dim,
                            const std::string& prefix, Rng& rng) {
  const double bx = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  GruParams p;
  auto mat = [&](const char* name, std::size_t in, double bound) {
    return Parameter(prefix + name, UniformInit({in, hidden_dim}, bound, rng));
  };
  auto vec = [&](const char* name) {
    return Parameter(prefix + name, Tensor(Shape{hidden_dim}, 0.0));
  };
  p.w_z = mat("w_z", input_dim, bx);
  p.u_z = mat("u_z", hidden_dim, bh);
  p.b_z = vec("b_z");
  p.w_r = mat("w_r", input_dim, bx);
  p.u_r = mat("u_r", hidden_dim, bh);
  p.b_r = vec("b_r");
  p.w_h = mat("w_h", input_dim, bx);
  p.u_h = mat("u_h", hidden_dim, bh);
  p.b_h = vec("b_h");
  return p;
}

std::vector<Parameter*> GruParams::parameters() {
  return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
}

GruVars GruVars::Bind(Graph& g, GruParams& p) {
  return {g.Param(p.w_z), g.Param(p.u_z), g.Param(p.b_z),
          g.Param(p.w_r), g.Param(p.u_r), g.Param(p.b_r),
          g.Param(p.w_h), g.Param(p.u_h), g.Param(p.b_h)};
}

Var GruStep(Var x, Var h, const GruVars& p) {
  Var z = Sigmoid(Add(Dense(x, p.w_z, p.b_z), MatMul(h, p.u_z)));
  Var r = Sigmoid(Add(Dense(x, p.w_r, p.b_r), MatMul(h, p.u_r)));
  Var candidate = Tanh(Add(Dense(x, p.w_h, p.b_h), MatMul(Mul(r, h), p.u_h)));
  // (1 - z) h + z h~  ==  h + z (h~ - h)
  return Add(h, Mul(z, Sub(candidate, h)));
}

// --- sampling ------------------------------------------------------------

std::size_t SampleCategorical(std::span<const double> probs, Rng& rng) {
  const double u = UniformUnit(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

std::size_t Argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

// --- gradient check ------------------------------------------------------

GradCheckReport GradCheck(const GraphFunction& fn,
                          const std::vector<Tensor>& inputs, double step,
                          double floor) {
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.Input(t));
    Var loss = fn(g, vars);
    g.Backward(loss);
    for (Var v : vars) analytic.push_back(v.grad());
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : xs) vars.push_back(g.Constant(t));
    return fn(g, vars).value().item();
  };

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + step;
      const double up = evaluate(probe);
      probe[k][i] = orig - step;
      const double down = evaluate(probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      report.max_relative_error =
          std::max(report.max_relative_error, abs_err / denom);
      ++report.entries;
    }
  }
  return report;
}

}  // namespace emergelab::nn
