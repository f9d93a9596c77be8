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

#include "emergelab/agents.hpp"

#include <algorithm>
#include <cmath>

namespace emergelab {

using nn::Graph;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

Parameter UniformParam(std::string name, Shape shape, std::size_t fan_in,
                       Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = (2.0 * UniformUnit(rng) - 1.0) * bound;
  return Parameter(std::move(name), std::move(t));
}

Parameter ZeroParam(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor(std::move(shape), 0.0));
}

constexpr std::size_t kChunk = 256;

// Spatial size after conv3, pool, conv3.
std::size_t FlatDim(ImageSize size) {
  const int h = (size.height - 2) / 2 - 2;
  const int w = (size.width - 2) / 2 - 2;
  if (h < 1 || w < 1) {
    throw ShapeError("image size too small for the vision module");
  }
  return static_cast<std::size_t>(h * w) * kConvChannels;
}

}  // namespace

Tensor StackImages(const Dataset& dataset, std::span<const std::size_t> items) {
  const ImageSize size = dataset.image_size();
  const std::size_t per = static_cast<std::size_t>(size.height) * size.width * 3;
  Tensor out(Shape{items.size(), static_cast<std::size_t>(size.height),
                   static_cast<std::size_t>(size.width), 3});
  for (std::size_t b = 0; b < items.size(); ++b) {
    const auto& px = dataset.item(items[b]).image.pixels();
    std::copy(px.begin(), px.end(), out.data() + b * per);
  }
  return out;
}

// --- VisionModule --------------------------------------------------------

VisionModule VisionModule::Create(ImageSize size, Rng& rng) {
  VisionModule m;
  m.size_ = size;
  const std::size_t flat = FlatDim(size);
  m.conv1_w_ = UniformParam("vision.conv1.w", {3, 3, 3, kConvChannels}, 27, rng);
  m.conv1_b_ = ZeroParam("vision.conv1.b", {kConvChannels});
  m.conv2_w_ = UniformParam("vision.conv2.w",
                            {3, 3, kConvChannels, kConvChannels},
                            9 * kConvChannels, rng);
  m.conv2_b_ = ZeroParam("vision.conv2.b", {kConvChannels});
  m.fc1_w_ = UniformParam("vision.fc1.w", {flat, kRepresentationDim}, flat, rng);
  m.fc1_b_ = ZeroParam("vision.fc1.b", {kRepresentationDim});
  m.fc2_w_ = UniformParam("vision.fc2.w",
                          {kRepresentationDim, kRepresentationDim},
                          kRepresentationDim, rng);
  m.fc2_b_ = ZeroParam("vision.fc2.b", {kRepresentationDim});
  m.head_w_ = UniformParam("vision.head.w",
                           {kRepresentationDim, kNumClasses},
                           kRepresentationDim, rng);
  m.head_b_ = ZeroParam("vision.head.b", {kNumClasses});
  return m;
}

VisionModule::Output VisionModule::Forward(Graph& g, Var images) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != static_cast<std::size_t>(size_.height) ||
      s[2] != static_cast<std::size_t>(size_.width) || s[3] != 3) {
    throw ShapeError("VisionModule: expected [B, " +
                     std::to_string(size_.height) + ", " +
                     std::to_string(size_.width) + ", 3], got " +
                     nn::ShapeString(s));
  }
  const std::size_t batch = s[0];
  Var x = nn::AddScalar(images, -0.5);
  x = nn::Relu(nn::Conv2d(x, g.Param(conv1_w_), g.Param(conv1_b_)));
  x = nn::MaxPool2x2(x);
  x = nn::Relu(nn::Conv2d(x, g.Param(conv2_w_), g.Param(conv2_b_)));
  x = nn::Reshape(x, {batch, fc1_w_.value.dim(0)});
  x = nn::Relu(nn::Dense(x, g.Param(fc1_w_), g.Param(fc1_b_)));
  Var rep = nn::Relu(nn::Dense(x, g.Param(fc2_w_), g.Param(fc2_b_)));
  Var logits = nn::Dense(rep, g.Param(head_w_), g.Param(head_b_));
  return {rep, logits};
}

Tensor VisionModule::Represent(const Dataset& dataset,
                               std::span<const std::size_t> items) {
  Tensor out(Shape{items.size(), kRepresentationDim});
  for (std::size_t start = 0; start < items.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, items.size() - start);
    Graph g(false);
    Output o = Forward(g, g.Constant(StackImages(dataset, items.subspan(start, n))));
    const Tensor& r = o.representation.value();
    std::copy(r.data(), r.data() + r.size(),
              out.data() + start * kRepresentationDim);
  }
  return out;
}

Tensor VisionModule::Classify(const Dataset& dataset,
                              std::span<const std::size_t> items) {
  Tensor out(Shape{items.size(), static_cast<std::size_t>(kNumClasses)});
  for (std::size_t start = 0; start < items.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, items.size() - start);
    Graph g(false);
    Output o = Forward(g, g.Constant(StackImages(dataset, items.subspan(start, n))));
    const Tensor& p = nn::Softmax(o.logits).value();
    std::copy(p.data(), p.data() + p.size(),
              out.data() + start * kNumClasses);
  }
  return out;
}

std::vector<Parameter*> VisionModule::parameters() {
  return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &fc1_w_,
          &fc1_b_,   &fc2_w_,   &fc2_b_,   &head_w_,  &head_b_};
}

std::vector<const Parameter*> VisionModule::parameters() const {
  return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &fc1_w_,
          &fc1_b_,   &fc2_w_,   &fc2_b_,   &head_w_,  &head_b_};
}

void VisionModule::SetTrainable(bool trainable) {
  for (Parameter* p : parameters()) p->trainable = trainable;
}

// --- Agent ---------------------------------------------------------------

std::string RoleName(Role role) {
  switch (role) {
    case Role::kSender: return "sender";
    case Role::kReceiver: return "receiver";
    case Role::kFlexible: return "flexible";
  }
  return "?";
}

Agent Agent::WithVision(Role role, const VisionModule& vision, int vocab_size,
                        Rng& rng) {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  Agent a;
  a.role = role;
  a.vocab_size = vocab_size;
  a.vision = vision;
  const auto v = static_cast<std::size_t>(vocab_size);
  a.f1_w = UniformParam("f1.w", {kRepresentationDim, kHiddenDim},
                        kRepresentationDim, rng);
  a.f1_b = ZeroParam("f1.b", {kHiddenDim});
  Tensor emb(Shape{v, kHiddenDim});
  for (double& x : emb.values()) x = 0.1 * StandardNormal(rng);
  a.embedding = Parameter("embedding", std::move(emb));
  a.gru = nn::GruParams::Create(kHiddenDim, kHiddenDim, "gru.", rng);
  if (a.can_send()) {
    a.f2_w = UniformParam("f2.w", {kHiddenDim, v}, kHiddenDim, rng);
    a.f2_b = ZeroParam("f2.b", {v});
  }
  return a;
}

Agent Agent::Create(Role role, ImageSize size, int vocab_size, Rng& rng) {
  VisionModule vision = VisionModule::Create(size, rng);
  return WithVision(role, vision, vocab_size, rng);
}

std::vector<Parameter*> Agent::parameters() {
  std::vector<Parameter*> out = vision.parameters();
  for (Parameter* p : language_parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Agent::parameters() const {
  auto* self = const_cast<Agent*>(this);
  std::vector<const Parameter*> out;
  for (Parameter* p : self->parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Agent::language_parameters() {
  std::vector<Parameter*> out = {&f1_w, &f1_b, &embedding};
  for (Parameter* p : gru.parameters()) out.push_back(p);
  if (can_send()) {
    out.push_back(&f2_w);
    out.push_back(&f2_b);
  }
  return out;
}

void Agent::SetLanguageTrainable(bool trainable) {
  for (Parameter* p : language_parameters()) p->trainable = trainable;
}

// --- forward passes ------------------------------------------------------

namespace {

void CheckRepresentation(const Var& rep, const char* what) {
  const Shape& s = rep.shape();
  if (s.size() != 2 || s[1] != kRepresentationDim) {
    throw ShapeError(std::string(what) + ": expected [B, 16], got " +
                     nn::ShapeString(s));
  }
}

std::vector<int> Column(const std::vector<std::vector<int>>& messages,
                        std::size_t t, int vocab) {
  std::vector<int> col(messages.size());
  for (std::size_t b = 0; b < messages.size(); ++b) {
    const int s = messages[b].at(t);
    if (s < 0 || s >= vocab) {
      throw std::out_of_range("message symbol " + std::to_string(s) +
                              " outside vocabulary");
    }
    col[b] = s;
  }
  return col;
}

}  // namespace

SenderOutput SenderForward(Graph& g, Agent& agent, Var representation,
                           int message_length, DecodeMode mode, Rng& rng) {
  if (!agent.can_send()) {
    throw std::invalid_argument("SenderForward: agent has no f2 layer");
  }
  if (message_length < 1) throw ConfigError("message_length must be >= 1");
  CheckRepresentation(representation, "SenderForward");
  const std::size_t batch = representation.shape()[0];
  const auto v = static_cast<std::size_t>(agent.vocab_size);

  const nn::GruVars gru = nn::GruVars::Bind(g, agent.gru);
  Var f2_w = g.Param(agent.f2_w);
  Var f2_b = g.Param(agent.f2_b);
  Var table = g.Param(agent.embedding);
  Var h = nn::Dense(representation, g.Param(agent.f1_w), g.Param(agent.f1_b));
  Var x = g.Constant(Tensor(Shape{batch, kHiddenDim}, 0.0));

  SenderOutput out;
  out.messages.assign(batch, std::vector<int>(message_length));
  out.step_log_probs.assign(batch, std::vector<double>(message_length));
  out.step_entropies.assign(batch, std::vector<double>(message_length));
  for (int t = 0; t < message_length; ++t) {
    h = nn::GruStep(x, h, gru);
    Var logits = nn::Dense(h, f2_w, f2_b);
    Var log_probs = nn::LogSoftmax(logits);
    const Tensor& lp = log_probs.value();
    std::vector<int> symbols(batch);
    std::vector<double> probs(v);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < v; ++j) probs[j] = std::exp(lp[b * v + j]);
      symbols[b] = static_cast<int>(mode == DecodeMode::kGreedy
                                        ? nn::Argmax(probs)
                                        : nn::SampleCategorical(probs, rng));
      out.messages[b][t] = symbols[b];
    }
    Var step_lp = nn::Gather(log_probs, symbols);
    Var step_h = nn::SoftmaxEntropy(logits);
    for (std::size_t b = 0; b < batch; ++b) {
      out.step_log_probs[b][t] = step_lp.value()[b];
      out.step_entropies[b][t] = step_h.value()[b];
    }
    out.log_prob = t == 0 ? step_lp : nn::Add(out.log_prob, step_lp);
    out.entropy = t == 0 ? step_h : nn::Add(out.entropy, step_h);
    if (t + 1 < message_length) x = nn::Embedding(table, symbols);
  }
  return out;
}

Var SenderLogProb(Graph& g, Agent& agent, Var representation,
                  const std::vector<std::vector<int>>& messages) {
  if (!agent.can_send()) {
    throw std::invalid_argument("SenderLogProb: agent has no f2 layer");
  }
  CheckRepresentation(representation, "SenderLogProb");
  const std::size_t batch = representation.shape()[0];
  if (messages.size() != batch || batch == 0) {
    throw ShapeError("SenderLogProb: one message per row required");
  }
  const std::size_t length = messages[0].size();
  const nn::GruVars gru = nn::GruVars::Bind(g, agent.gru);
  Var f2_w = g.Param(agent.f2_w);
  Var f2_b = g.Param(agent.f2_b);
  Var table = g.Param(agent.embedding);
  Var h = nn::Dense(representation, g.Param(agent.f1_w), g.Param(agent.f1_b));
  Var x = g.Constant(Tensor(Shape{batch, kHiddenDim}, 0.0));
  Var total;
  for (std::size_t t = 0; t < length; ++t) {
    h = nn::GruStep(x, h, gru);
    const std::vector<int> symbols = Column(messages, t, agent.vocab_size);
    Var lp = nn::Gather(nn::LogSoftmax(nn::Dense(h, f2_w, f2_b)), symbols);
    total = t == 0 ? lp : nn::Add(total, lp);
    x = nn::Embedding(table, symbols);
  }
  return total;
}

ReceiverOutput ReceiverForward(Graph& g, Agent& agent,
                               const std::vector<std::vector<int>>& messages,
                               Var candidates, DecodeMode mode, Rng& rng) {
  if (!agent.can_receive()) {
    throw std::invalid_argument("ReceiverForward: agent is a fixed sender");
  }
  const Shape& cs = candidates.shape();
  if (cs.size() != 3 || cs[2] != kRepresentationDim || cs[1] == 0) {
    throw ShapeError("ReceiverForward: expected candidates [B, K, 16], got " +
                     nn::ShapeString(cs));
  }
  const std::size_t batch = cs[0];
  const std::size_t k = cs[1];
  if (messages.size() != batch) {
    throw ShapeError("ReceiverForward: one message per row required");
  }
  const nn::GruVars gru = nn::GruVars::Bind(g, agent.gru);
  Var table = g.Param(agent.embedding);
  Var h = g.Constant(Tensor(Shape{batch, kHiddenDim}, 0.0));
  const std::size_t length = batch == 0 ? 0 : messages[0].size();
  for (std::size_t t = 0; t < length; ++t) {
    h = nn::GruStep(nn::Embedding(table, Column(messages, t, agent.vocab_size)),
                    h, gru);
  }
  Var flat = nn::Reshape(candidates, {batch * k, kRepresentationDim});
  Var emb = nn::Dense(flat, g.Param(agent.f1_w), g.Param(agent.f1_b));
  Var scores = nn::BatchedDot(nn::Reshape(emb, {batch, k, kHiddenDim}), h);

  ReceiverOutput out;
  out.probs = nn::Softmax(scores);
  const Tensor& p = out.probs.value();
  out.selections.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::span<const double> row(p.data() + b * k, k);
    out.selections[b] = static_cast<int>(mode == DecodeMode::kGreedy
                                             ? nn::Argmax(row)
                                             : nn::SampleCategorical(row, rng));
  }
  out.log_prob = nn::Gather(nn::LogSoftmax(scores), out.selections);
  out.entropy = nn::SoftmaxEntropy(scores);
  return out;
}

SenderResult SendImage(Agent& agent, const Image& image, int message_length,
                       DecodeMode mode, Rng& rng) {
  if (image.size() != agent.vision.image_size()) {
    throw ShapeError("SendImage: image size does not match the vision module");
  }
  Graph g(false);
  Tensor t(Shape{1, static_cast<std::size_t>(image.height()),
                 static_cast<std::size_t>(image.width()), 3},
           image.pixels());
  Var rep = agent.vision.Forward(g, g.Constant(std::move(t))).representation;
  SenderOutput o = SenderForward(g, agent, rep, message_length, mode, rng);
  return {o.messages[0], o.step_log_probs[0], o.step_entropies[0]};
}

ReceiverResult ReceiveImages(Agent& agent, const std::vector<int>& message,
                             const std::vector<Image>& candidates,
                             DecodeMode mode, Rng& rng) {
  if (candidates.empty()) {
    throw std::invalid_argument("ReceiveImages: no candidates");
  }
  const ImageSize size = agent.vision.image_size();
  const std::size_t per = static_cast<std::size_t>(size.height) * size.width * 3;
  Tensor t(Shape{candidates.size(), static_cast<std::size_t>(size.height),
                 static_cast<std::size_t>(size.width), 3});
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != size) {
      throw ShapeError("ReceiveImages: candidate size mismatch");
    }
    std::copy(candidates[i].pixels().begin(), candidates[i].pixels().end(),
              t.data() + i * per);
  }
  Graph g(false);
  Var rep = agent.vision.Forward(g, g.Constant(std::move(t))).representation;
  Var cands = nn::Reshape(rep, {1, candidates.size(), kRepresentationDim});
  ReceiverOutput o = ReceiverForward(g, agent, {message}, cands, mode, rng);
  ReceiverResult r;
  r.selection = o.selections[0];
  r.log_prob = o.log_prob.value()[0];
  r.entropy = o.entropy.value()[0];
  r.probs = o.probs.value().vector();
  return r;
}

}  // namespace emergelab
