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

// Vision pretraining on smoothed targets and REINFORCE training of agent
// pairs in the reference game.
//
// Per round the sender loss is -r sum_t log pi_S(s_t) - c sum_t H_t and the
// receiver loss is -r log pi_R(sel) - c H_R, averaged over the batch. When
// the classification loss is enabled, the cross-entropy of each trained
// vision module on the images it processed in the batch is added with unit
// weight. An epoch is one shuffled pass over the train split with each item
// serving once as the sender's target.

#ifndef EMERGELAB_TRAINING_HPP_
#define EMERGELAB_TRAINING_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emergelab/agents.hpp"
#include "emergelab/game.hpp"
#include "emergelab/metrics.hpp"
#include "emergelab/optim.hpp"
#include "emergelab/smoothing.hpp"

namespace emergelab {

enum class OptimizerKind { kSgd, kAdam };

struct PretrainConfig {
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.001;
  int batch_size = 128;
  int epochs = 200;
  // Cosine annealing of the learning rate to zero over all steps.
  bool cosine_decay = false;

  void Validate() const;
  static PretrainConfig Paper();
  static PretrainConfig Desk();
};

struct PretrainResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

// Top-1 accuracy of the classifier head on one split.
double ClassificationAccuracy(VisionModule& vision, const Dataset& dataset,
                              Split split);

// Minimises cross-entropy against SmoothedTarget(label, spec). Throws
// DivergenceError on a non-finite loss.
PretrainResult PretrainVision(VisionModule& vision, const Dataset& dataset,
                              const SmoothingSpec& spec,
                              const PretrainConfig& config, Rng& rng);

enum class Scenario {
  kFrozenVision,
  kLanguageLearning,
  kEmergenceJoint,
  kEmergenceNoClassification,
};

std::string ScenarioName(Scenario s);
Scenario ParseScenario(const std::string& name);

struct GameTrainConfig {
  Scenario scenario = Scenario::kFrozenVision;
  double learning_rate = 0.0005;
  int batch_size = 128;
  int epochs = 40;
  double entropy_coef = 0.02;
  // Subtract the batch-mean reward from r in the policy-gradient terms.
  bool baseline = false;
  // Greedy test rounds used for the final evaluation.
  int eval_rounds = 2000;

  void Validate() const;
  bool classification_loss() const {
    return scenario == Scenario::kLanguageLearning ||
           scenario == Scenario::kEmergenceJoint;
  }

  // Epoch counts: emergence 150, language learning 25, no-classification
  // control 250 / lr 1e-4, population and flexible 250.
  static GameTrainConfig Paper(Scenario s);
  // Frozen vision 150 (representations are cached), emergence 40,
  // language learning 10 (population/flexible: see kDeskPopulationEpochs).
  static GameTrainConfig Desk(Scenario s);
};

inline constexpr int kPaperPopulationEpochs = 250;
inline constexpr int kDeskPopulationEpochs = 60;

struct BatchStats {
  double mean_reward = 0.0;
  double sender_loss = 0.0;
  double receiver_loss = 0.0;
  double classification_loss = 0.0;
  double sender_entropy = 0.0;
  double receiver_entropy = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double mean_reward = 0.0;
  double sender_loss = 0.0;
  double receiver_loss = 0.0;
  double classification_loss = 0.0;
  // Test accuracy of the trained vision modules, NaN when not applicable.
  double sender_accuracy = 0.0;
  double receiver_accuracy = 0.0;
};

struct TrainLog {
  std::string scenario;
  std::vector<EpochStats> epochs;
  double test_reward = 0.0;
  MessageLog messages;
  // Flexible runs: reward with the roles swapped.
  double swapped_test_reward = 0.0;
  MessageLog swapped_messages;
};

// Header: epoch,mean_reward,sender_loss,receiver_loss,classification_loss,
// sender_accuracy,receiver_accuracy.
void WriteTrainLogCsv(const TrainLog& log, std::ostream& out);

// Cached representations of every dataset item for a frozen vision module.
struct RepresentationCache {
  nn::Tensor values;  // [N, 16], empty when the module is being trained
  bool active() const { return values.size() > 0; }
};
RepresentationCache BuildCache(VisionModule& vision, const Dataset& dataset);

// Holds optimizer state for one agent.
struct AgentOptimizer {
  nn::AdamState adam;
};

// One policy-gradient update on a batch of rounds. The sender and receiver
// may be the same agent. Parameter trainability decides what is updated;
// frozen vision modules should come with an active cache.
BatchStats ReinforceStep(Agent& sender, Agent& receiver,
                         const Dataset& dataset,
                         const std::vector<GameRound>& rounds,
                         const GameConfig& game,
                         const GameTrainConfig& config,
                         const RepresentationCache& sender_cache,
                         const RepresentationCache& receiver_cache,
                         AgentOptimizer& sender_opt,
                         AgentOptimizer& receiver_opt, Rng& rng);

// Sets trainability per scenario: frozen vision trains both language
// modules; language learning trains only the receiver (language and
// vision); the emergence scenarios train everything.
void ConfigureScenario(Agent& sender, Agent& receiver, Scenario scenario);

TrainLog RunScenario(Agent& sender, Agent& receiver, const Dataset& dataset,
                     const GameConfig& game, const GameTrainConfig& config,
                     std::uint64_t seed);

// Per batch one sender and one receiver are drawn uniformly. The reported
// test reward averages every sender-receiver pair.
TrainLog RunPopulation(std::vector<Agent*> senders,
                       std::vector<Agent*> receivers, const Dataset& dataset,
                       const GameConfig& game, const GameTrainConfig& config,
                       std::uint64_t seed);

// Two flexible agents; per batch the sender role goes to either with equal
// probability. Both role assignments are evaluated.
TrainLog RunFlexible(Agent& a, Agent& b, const Dataset& dataset,
                     const GameConfig& game, const GameTrainConfig& config,
                     std::uint64_t seed);

struct EvalResult {
  double mean_reward = 0.0;
  MessageLog log;
};

// Greedy decoding on n_rounds test-split rounds.
EvalResult Evaluate(Agent& sender, Agent& receiver, const Dataset& dataset,
                    const GameConfig& game, int n_rounds, std::uint64_t seed);

}  // namespace emergelab

#endif  // EMERGELAB_TRAINING_HPP_
