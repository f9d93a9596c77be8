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

// Vision module and sender / receiver / flexible-role agents.
//
// Vision: inputs shifted to [-0.5, 0.5], conv 3x3x32, ReLU, 2x2 max-pool,
// conv 3x3x32, ReLU, flatten, dense 16 + ReLU, dense 16 + ReLU, dense 64
// classifier head. The output of the second 16-unit layer is the object
// representation.
//
// Language: the sender maps the representation through f1 (16 -> 128) to
// its initial GRU state, feeds a zero start vector and then the embedding
// of each emitted symbol, and reads symbol distributions from f2
// (128 -> |V|). The receiver runs its GRU from a zero state over the
// message embeddings and scores candidate i by f1(v(i)) . h_L.

#ifndef EMERGELAB_AGENTS_HPP_
#define EMERGELAB_AGENTS_HPP_

#include <span>
#include <string>
#include <vector>

#include "emergelab/autodiff.hpp"
#include "emergelab/shapes_world.hpp"
#include "emergelab/smoothing.hpp"

namespace emergelab {

inline constexpr std::size_t kRepresentationDim = 16;
inline constexpr std::size_t kHiddenDim = 128;
inline constexpr std::size_t kConvChannels = 32;

// Stacks dataset images into [B, H, W, 3].
nn::Tensor StackImages(const Dataset& dataset,
                       std::span<const std::size_t> items);

class VisionModule {
 public:
  struct Output {
    nn::Var representation;  // [B, 16]
    nn::Var logits;          // [B, 64]
  };

  VisionModule() = default;
  static VisionModule Create(ImageSize size, Rng& rng);

  ImageSize image_size() const { return size_; }

  Output Forward(nn::Graph& g, nn::Var images);
  // Inference-only representations [N, 16] of the given items, computed in
  // chunks without recording gradients.
  nn::Tensor Represent(const Dataset& dataset,
                       std::span<const std::size_t> items);
  // Inference-only class probabilities [N, 64].
  nn::Tensor Classify(const Dataset& dataset,
                      std::span<const std::size_t> items);

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  void SetTrainable(bool trainable);

 private:
  ImageSize size_;
  nn::Parameter conv1_w_, conv1_b_;
  nn::Parameter conv2_w_, conv2_b_;
  nn::Parameter fc1_w_, fc1_b_;
  nn::Parameter fc2_w_, fc2_b_;
  nn::Parameter head_w_, head_b_;
};

enum class Role { kSender, kReceiver, kFlexible };

std::string RoleName(Role role);

struct Agent {
  Role role = Role::kSender;
  int vocab_size = 4;
  VisionModule vision;
  // Targets for the classification loss kept during joint training.
  SmoothingSpec vision_spec;
  nn::Parameter f1_w, f1_b;
  nn::Parameter embedding;
  nn::GruParams gru;
  // Present for kSender and kFlexible only.
  nn::Parameter f2_w, f2_b;

  static Agent Create(Role role, ImageSize size, int vocab_size, Rng& rng);
  // Same as Create but with a copy of an existing (pretrained) vision module.
  static Agent WithVision(Role role, const VisionModule& vision,
                          int vocab_size, Rng& rng);

  bool can_send() const { return role != Role::kReceiver; }
  bool can_receive() const { return role != Role::kSender; }

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::vector<nn::Parameter*> language_parameters();
  void SetLanguageTrainable(bool trainable);
};

enum class DecodeMode { kSample, kGreedy };

struct SenderOutput {
  std::vector<std::vector<int>> messages;  // [B][L]
  nn::Var log_prob;                        // [B], summed over steps
  nn::Var entropy;                         // [B], summed over steps
  std::vector<std::vector<double>> step_log_probs;  // [B][L]
  std::vector<std::vector<double>> step_entropies;  // [B][L]
};

// representation [B, 16]. Throws std::invalid_argument if the agent has no
// f2 layer.
SenderOutput SenderForward(nn::Graph& g, Agent& agent,
                           nn::Var representation, int message_length,
                           DecodeMode mode, Rng& rng);

// Log-probabilities [B] of given messages under the sender policy.
nn::Var SenderLogProb(nn::Graph& g, Agent& agent, nn::Var representation,
                      const std::vector<std::vector<int>>& messages);

struct ReceiverOutput {
  std::vector<int> selections;  // candidate position per row
  nn::Var probs;                // [B, K]
  nn::Var log_prob;             // [B], of the selection
  nn::Var entropy;              // [B]
};

// candidates [B, K, 16]; messages [B][L] with symbols in the vocabulary.
ReceiverOutput ReceiverForward(nn::Graph& g, Agent& agent,
                               const std::vector<std::vector<int>>& messages,
                               nn::Var candidates, DecodeMode mode, Rng& rng);

// Single-example conveniences operating on images.
struct SenderResult {
  std::vector<int> message;
  std::vector<double> step_log_probs;
  std::vector<double> step_entropies;
};
SenderResult SendImage(Agent& agent, const Image& image, int message_length,
                       DecodeMode mode, Rng& rng);

struct ReceiverResult {
  int selection = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> probs;
};
ReceiverResult ReceiveImages(Agent& agent, const std::vector<int>& message,
                             const std::vector<Image>& candidates,
                             DecodeMode mode, Rng& rng);

}  // namespace emergelab

#endif  // EMERGELAB_AGENTS_HPP_
