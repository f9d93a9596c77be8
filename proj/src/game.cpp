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

#include "emergelab/game.hpp"

#include <algorithm>

namespace emergelab {

void GameConfig::Validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (message_length < 1) throw ConfigError("message_length must be >= 1");
  if (distractors < 1) throw ConfigError("distractors must be >= 1");
  int n_relevant = 0;
  for (bool r : relevant) n_relevant += r ? 1 : 0;
  if (n_relevant == 0) throw ConfigError("at least one attribute must be relevant");
  // Distinct distractor classes must exist.
  int n_values = 1;
  for (bool r : relevant) n_values *= r ? kValuesPerAttribute : 1;
  const int valid = (n_values - 1) * (kNumClasses / n_values);
  if (distractors > valid) {
    throw ConfigError("too many distractors for the relevance mask");
  }
}

std::string GameConfig::VariantName() const {
  for (Attribute a : kAllAttributes) {
    if (!is_relevant(a)) return AttributeName(a) + "-irrelevant";
  }
  return "all";
}

std::array<bool, 3> RelevanceForVariant(const std::string& variant) {
  if (variant == "all") return {true, true, true};
  if (variant == "color-irrelevant") return {false, true, true};
  if (variant == "scale-irrelevant") return {true, false, true};
  if (variant == "shape-irrelevant") return {true, true, false};
  throw ConfigError("unknown game variant '" + variant + "'");
}

bool MatchesOnRelevant(int class_a, int class_b, const GameConfig& config) {
  const ObjectClass a = AttributesOf(class_a);
  const ObjectClass b = AttributesOf(class_b);
  for (Attribute attr : kAllAttributes) {
    if (config.is_relevant(attr) && a.Value(attr) != b.Value(attr)) {
      return false;
    }
  }
  return true;
}

namespace {

const std::vector<std::size_t>& SplitOfClass(const Dataset& ds, Split split,
                                             int class_id) {
  const auto& v = split == Split::kTrain ? ds.TrainOfClass(class_id)
                                         : ds.TestOfClass(class_id);
  if (v.empty()) {
    throw std::invalid_argument("dataset split has no items of class " +
                                std::to_string(class_id));
  }
  return v;
}

}  // namespace

GameRound SampleRound(const Dataset& dataset, const GameConfig& config,
                      Split split, Rng& rng) {
  const int target = static_cast<int>(UniformIndex(rng, kNumClasses));
  const auto& members = SplitOfClass(dataset, split, target);
  const std::size_t item = members[UniformIndex(rng, members.size())];
  return SampleRoundForItem(dataset, config, split, item, rng);
}

GameRound SampleRoundForItem(const Dataset& dataset, const GameConfig& config,
                             Split split, std::size_t sender_item, Rng& rng) {
  GameRound round;
  round.sender_item = sender_item;
  round.target_class = dataset.item(sender_item).class_id;

  const ObjectClass t = AttributesOf(round.target_class);
  int values[3] = {t.color, t.scale, t.shape};
  for (Attribute a : kAllAttributes) {
    if (!config.is_relevant(a)) {
      values[static_cast<int>(a)] =
          static_cast<int>(UniformIndex(rng, kValuesPerAttribute));
    }
  }
  round.receiver_target_class = ClassIdOf(values[0], values[1], values[2]);

  std::vector<int> pool;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!MatchesOnRelevant(c, round.target_class, config)) pool.push_back(c);
  }
  const auto k = static_cast<std::size_t>(config.distractors);
  if (pool.size() < k) throw ConfigError("not enough distractor classes");
  // Partial Fisher-Yates: the first k entries become the distractors.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + UniformIndex(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }

  round.target_position = UniformIndex(rng, k + 1);
  round.candidate_classes.resize(k + 1);
  round.candidate_items.resize(k + 1);
  std::size_t d = 0;
  for (std::size_t slot = 0; slot <= k; ++slot) {
    const int cls = slot == round.target_position ? round.receiver_target_class
                                                  : pool[d++];
    const auto& members = SplitOfClass(dataset, split, cls);
    round.candidate_classes[slot] = cls;
    round.candidate_items[slot] = members[UniformIndex(rng, members.size())];
  }
  return round;
}

int Reward(int selected_class, const GameRound& round,
           const GameConfig& config) {
  return MatchesOnRelevant(selected_class, round.target_class, config) ? 1 : 0;
}

}  // namespace emergelab
