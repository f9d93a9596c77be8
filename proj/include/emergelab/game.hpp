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

// Reference game rounds: a target object, an image of it for the sender and
// k+1 candidate images for the receiver, one of which shows the target.

#ifndef EMERGELAB_GAME_HPP_
#define EMERGELAB_GAME_HPP_

#include <array>
#include <vector>

#include "emergelab/shapes_world.hpp"

namespace emergelab {

struct GameConfig {
  int vocab_size = 4;
  int message_length = 3;
  int distractors = 2;
  // Indexed by Attribute. An irrelevant attribute may differ between the
  // sender's and the receiver's target.
  std::array<bool, 3> relevant = {true, true, true};

  void Validate() const;
  int candidates() const { return distractors + 1; }
  bool is_relevant(Attribute a) const {
    return relevant[static_cast<int>(a)];
  }
  // "all", "color-irrelevant", "scale-irrelevant", "shape-irrelevant".
  std::string VariantName() const;
};

// Throws ConfigError for unknown names.
std::array<bool, 3> RelevanceForVariant(const std::string& variant);

enum class Split { kTrain, kTest };

struct GameRound {
  int target_class = 0;
  std::size_t sender_item = 0;
  int receiver_target_class = 0;
  std::vector<std::size_t> candidate_items;
  std::vector<int> candidate_classes;
  std::size_t target_position = 0;
};

// True when the classes agree on every relevant attribute.
bool MatchesOnRelevant(int class_a, int class_b, const GameConfig& config);

// Uniform target class, then SampleRoundForItem with a uniform item.
GameRound SampleRound(const Dataset& dataset, const GameConfig& config,
                      Split split, Rng& rng);

// Round whose sender image is a given dataset item. The receiver's target
// class keeps the relevant attributes and redraws irrelevant ones; the k
// distractor classes are distinct and each differs from the target in at
// least one relevant attribute. Instances are drawn independently.
GameRound SampleRoundForItem(const Dataset& dataset, const GameConfig& config,
                             Split split, std::size_t sender_item, Rng& rng);

// 1 iff the selected class matches the target on every relevant attribute.
int Reward(int selected_class, const GameRound& round,
           const GameConfig& config);

}  // namespace emergelab

#endif  // EMERGELAB_GAME_HPP_
