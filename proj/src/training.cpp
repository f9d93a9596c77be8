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

#include "emergelab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace emergelab {

using nn::Graph;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kEvalChunk = 256;

bool VisionTrainable(Agent& agent) {
  for (Parameter* p : agent.vision.parameters()) {
    if (p->trainable) return true;
  }
  return false;
}

bool AnyTrainable(Agent& agent) {
  for (Parameter* p : agent.parameters()) {
    if (p->trainable) return true;
  }
  return false;
}

void Shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[UniformIndex(rng, i)]);
  }
}

Tensor SmoothedTargets(std::span<const int> labels, const SmoothingSpec& spec) {
  Tensor t(Shape{labels.size(), static_cast<std::size_t>(kNumClasses)});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const TargetDistribution y = SmoothedTarget(labels[b], spec);
    std::copy(y.begin(), y.end(), t.data() + b * kNumClasses);
  }
  return t;
}

Tensor GatherRows(const Tensor& table, std::span<const std::size_t> items) {
  const std::size_t d = table.dim(1);
  Tensor out(Shape{items.size(), d});
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::span<const double> r = table.row(items[i]);
    std::copy(r.begin(), r.end(), out.data() + i * d);
  }
  return out;
}

void CheckFinite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string(what) + " became non-finite");
  }
}

std::vector<std::size_t> AllItems(const Dataset& dataset) {
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

}  // namespace

// --- pretraining ---------------------------------------------------------

void PretrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

PretrainConfig PretrainConfig::Paper() { return {}; }

PretrainConfig PretrainConfig::Desk() {
  PretrainConfig c;
  c.optimizer = OptimizerKind::kAdam;
  c.learning_rate = 0.002;
  c.batch_size = 16;
  c.epochs = 30;
  c.cosine_decay = true;
  return c;
}

double ClassificationAccuracy(VisionModule& vision, const Dataset& dataset,
                              Split split) {
  const auto& items = split == Split::kTrain ? dataset.train() : dataset.test();
  if (items.empty()) return kNaN;
  const Tensor probs = vision.Classify(dataset, items);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (static_cast<int>(nn::Argmax(probs.row(i))) ==
        dataset.item(items[i]).class_id) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

PretrainResult PretrainVision(VisionModule& vision, const Dataset& dataset,
                              const SmoothingSpec& spec,
                              const PretrainConfig& config, Rng& rng) {
  config.Validate();
  spec.Validate();
  if (dataset.train().empty() || dataset.test().empty()) {
    throw std::invalid_argument("PretrainVision: dataset split missing");
  }
  if (dataset.image_size() != vision.image_size()) {
    throw ShapeError("PretrainVision: image size does not match the module");
  }
  vision.SetTrainable(true);
  std::vector<Parameter*> params = vision.parameters();
  nn::ZeroGrad(params);
  nn::AdamState adam;
  PretrainResult result;
  std::vector<std::size_t> order = dataset.train();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (order.size() + batch - 1) / batch;
  const double total_steps =
      static_cast<double>(steps_per_epoch) * config.epochs;
  double step = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      std::span<const std::size_t> items(order.data() + start, n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = dataset.item(items[i]).class_id;
      }
      Graph g;
      auto out = vision.Forward(g, g.Constant(StackImages(dataset, items)));
      Var loss = nn::Mean(
          nn::SoftmaxCrossEntropy(out.logits, SmoothedTargets(labels, spec)));
      const double value = loss.value().item();
      CheckFinite(value, "pretraining loss");
      g.Backward(loss);
      const double lr =
          config.cosine_decay
              ? 0.5 * config.learning_rate *
                    (1.0 + std::cos(std::numbers::pi * step / total_steps))
              : config.learning_rate;
      step += 1.0;
      if (config.optimizer == OptimizerKind::kAdam) {
        nn::AdamStep(params, adam, lr);
      } else {
        nn::SgdStep(params, lr);
      }
      nn::ZeroGrad(params);
      total += value * static_cast<double>(n);
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  result.train_accuracy = ClassificationAccuracy(vision, dataset, Split::kTrain);
  result.test_accuracy = ClassificationAccuracy(vision, dataset, Split::kTest);
  return result;
}

// --- configuration -------------------------------------------------------

std::string ScenarioName(Scenario s) {
  switch (s) {
    case Scenario::kFrozenVision: return "frozen_vision";
    case Scenario::kLanguageLearning: return "language_learning";
    case Scenario::kEmergenceJoint: return "emergence_joint";
    case Scenario::kEmergenceNoClassification:
      return "emergence_no_classification";
  }
  return "?";
}

Scenario ParseScenario(const std::string& name) {
  for (Scenario s : {Scenario::kFrozenVision, Scenario::kLanguageLearning,
                     Scenario::kEmergenceJoint,
                     Scenario::kEmergenceNoClassification}) {
    if (ScenarioName(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

void GameTrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(entropy_coef >= 0.0)) {
    throw ConfigError("entropy coefficient must be >= 0");
  }
  if (eval_rounds < 1) throw ConfigError("eval_rounds must be >= 1");
}

GameTrainConfig GameTrainConfig::Paper(Scenario s) {
  GameTrainConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::kFrozenVision:
    case Scenario::kEmergenceJoint: c.epochs = 150; break;
    case Scenario::kLanguageLearning: c.epochs = 25; break;
    case Scenario::kEmergenceNoClassification:
      c.epochs = 250;
      c.learning_rate = 0.0001;
      break;
  }
  return c;
}

GameTrainConfig GameTrainConfig::Desk(Scenario s) {
  GameTrainConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::kFrozenVision: c.epochs = 150; break;
    case Scenario::kLanguageLearning: c.epochs = 10; break;
    case Scenario::kEmergenceJoint:
    case Scenario::kEmergenceNoClassification: c.epochs = 40; break;
  }
  if (s == Scenario::kEmergenceNoClassification) c.learning_rate = 0.0001;
  return c;
}

void ConfigureScenario(Agent& sender, Agent& receiver, Scenario scenario) {
  switch (scenario) {
    case Scenario::kFrozenVision:
      sender.vision.SetTrainable(false);
      receiver.vision.SetTrainable(false);
      sender.SetLanguageTrainable(true);
      receiver.SetLanguageTrainable(true);
      break;
    case Scenario::kLanguageLearning:
      if (&sender == &receiver) {
        throw ConfigError("language learning needs two distinct agents");
      }
      sender.vision.SetTrainable(false);
      sender.SetLanguageTrainable(false);
      receiver.vision.SetTrainable(true);
      receiver.SetLanguageTrainable(true);
      break;
    case Scenario::kEmergenceJoint:
    case Scenario::kEmergenceNoClassification:
      sender.vision.SetTrainable(true);
      receiver.vision.SetTrainable(true);
      sender.SetLanguageTrainable(true);
      receiver.SetLanguageTrainable(true);
      break;
  }
}

void WriteTrainLogCsv(const TrainLog& log, std::ostream& out) {
  std::ostringstream s;
  s.precision(17);
  s << "epoch,mean_reward,sender_loss,receiver_loss,classification_loss,"
       "sender_accuracy,receiver_accuracy\n";
  for (const EpochStats& e : log.epochs) {
    s << e.epoch << ',' << e.mean_reward << ',' << e.sender_loss << ','
      << e.receiver_loss << ',' << e.classification_loss << ','
      << e.sender_accuracy << ',' << e.receiver_accuracy << '\n';
  }
  out << s.str();
}

RepresentationCache BuildCache(VisionModule& vision, const Dataset& dataset) {
  const std::vector<std::size_t> all = AllItems(dataset);
  return {vision.Represent(dataset, all)};
}

// --- policy-gradient step ------------------------------------------------

namespace {

struct VisionPass {
  Var representation;
  Var classification_loss;  // invalid unless computed
};

// Representations of `items` for one agent: cached values when available,
// otherwise a recorded forward pass (with its classification loss when
// requested).
VisionPass ViewItems(Graph& g, Agent& agent, const Dataset& dataset,
                     std::span<const std::size_t> items,
                     const RepresentationCache& cache, bool classification) {
  VisionPass pass;
  if (cache.active()) {
    pass.representation = g.Constant(GatherRows(cache.values, items));
    return pass;
  }
  auto out = agent.vision.Forward(g, g.Constant(StackImages(dataset, items)));
  pass.representation = out.representation;
  if (classification && VisionTrainable(agent)) {
    std::vector<int> labels(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      labels[i] = dataset.item(items[i]).class_id;
    }
    pass.classification_loss = nn::Mean(nn::SoftmaxCrossEntropy(
        out.logits, SmoothedTargets(labels, agent.vision_spec)));
  }
  return pass;
}

Var Accumulate(Var total, Var term) {
  if (!term.valid()) return total;
  return total.valid() ? nn::Add(total, term) : term;
}

}  // namespace

BatchStats ReinforceStep(Agent& sender, Agent& receiver,
                         const Dataset& dataset,
                         const std::vector<GameRound>& rounds,
                         const GameConfig& game,
                         const GameTrainConfig& config,
                         const RepresentationCache& sender_cache,
                         const RepresentationCache& receiver_cache,
                         AgentOptimizer& sender_opt,
                         AgentOptimizer& receiver_opt, Rng& rng) {
  if (rounds.empty()) throw std::invalid_argument("ReinforceStep: no rounds");
  const std::size_t batch = rounds.size();
  const auto k = static_cast<std::size_t>(game.candidates());
  std::vector<Parameter*> s_params = sender.parameters();
  std::vector<Parameter*> r_params = receiver.parameters();
  nn::ZeroGrad(s_params);
  nn::ZeroGrad(r_params);

  std::vector<std::size_t> s_items(batch);
  std::vector<std::size_t> c_items(batch * k);
  for (std::size_t b = 0; b < batch; ++b) {
    s_items[b] = rounds[b].sender_item;
    if (rounds[b].candidate_items.size() != k) {
      throw ShapeError("ReinforceStep: round has the wrong candidate count");
    }
    for (std::size_t j = 0; j < k; ++j) {
      c_items[b * k + j] = rounds[b].candidate_items[j];
    }
  }

  Graph g;
  const bool classify = config.classification_loss();
  VisionPass sp = ViewItems(g, sender, dataset, s_items, sender_cache, classify);
  VisionPass rp = ViewItems(g, receiver, dataset, c_items, receiver_cache,
                            classify);
  SenderOutput so = SenderForward(g, sender, sp.representation,
                                  game.message_length, DecodeMode::kSample, rng);
  Var cands = nn::Reshape(rp.representation, {batch, k, kRepresentationDim});
  ReceiverOutput ro = ReceiverForward(g, receiver, so.messages, cands,
                                      DecodeMode::kSample, rng);

  Tensor advantage(Shape{batch});
  double reward_sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int selected = rounds[b].candidate_classes[ro.selections[b]];
    advantage[b] = Reward(selected, rounds[b], game);
    reward_sum += advantage[b];
  }
  const double mean_reward = reward_sum / static_cast<double>(batch);
  if (config.baseline) {
    for (double& a : advantage.values()) a -= mean_reward;
  }

  const double c = config.entropy_coef;
  Var s_loss = nn::Mean(nn::Sub(nn::Scale(nn::MulConst(so.log_prob, advantage), -1.0),
                                nn::Scale(so.entropy, c)));
  Var r_loss = nn::Mean(nn::Sub(nn::Scale(nn::MulConst(ro.log_prob, advantage), -1.0),
                                nn::Scale(ro.entropy, c)));
  Var class_loss = Accumulate(sp.classification_loss, rp.classification_loss);
  Var total = Accumulate(nn::Add(s_loss, r_loss), class_loss);

  BatchStats stats;
  stats.mean_reward = mean_reward;
  stats.sender_loss = s_loss.value().item();
  stats.receiver_loss = r_loss.value().item();
  stats.classification_loss =
      class_loss.valid() ? class_loss.value().item() : 0.0;
  stats.sender_entropy = nn::Mean(so.entropy).value().item();
  stats.receiver_entropy = nn::Mean(ro.entropy).value().item();
  CheckFinite(total.value().item(), "game loss");

  if (total.requires_grad()) {
    g.Backward(total);
    if (AnyTrainable(sender)) {
      nn::AdamStep(s_params, sender_opt.adam, config.learning_rate);
    }
    if (&receiver != &sender && AnyTrainable(receiver)) {
      nn::AdamStep(r_params, receiver_opt.adam, config.learning_rate);
    }
  }
  nn::ZeroGrad(s_params);
  nn::ZeroGrad(r_params);
  return stats;
}

// --- evaluation ----------------------------------------------------------

EvalResult Evaluate(Agent& sender, Agent& receiver, const Dataset& dataset,
                    const GameConfig& game, int n_rounds, std::uint64_t seed) {
  game.Validate();
  if (n_rounds < 1) throw std::invalid_argument("Evaluate: n_rounds < 1");
  if (!sender.can_send() || !receiver.can_receive()) {
    throw ConfigError("Evaluate: agent roles do not fit the game");
  }
  const std::vector<std::size_t> all = AllItems(dataset);
  const Tensor s_reps = sender.vision.Represent(dataset, all);
  const Tensor r_reps = &sender == &receiver
                            ? s_reps
                            : receiver.vision.Represent(dataset, all);
  Rng rng(seed);
  std::vector<GameRound> rounds;
  rounds.reserve(n_rounds);
  for (int i = 0; i < n_rounds; ++i) {
    rounds.push_back(SampleRound(dataset, game, Split::kTest, rng));
  }
  const auto k = static_cast<std::size_t>(game.candidates());
  EvalResult result;
  result.log.vocab_size = game.vocab_size;
  for (std::size_t start = 0; start < rounds.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, rounds.size() - start);
    std::vector<std::size_t> s_items(n), c_items(n * k);
    for (std::size_t b = 0; b < n; ++b) {
      s_items[b] = rounds[start + b].sender_item;
      for (std::size_t j = 0; j < k; ++j) {
        c_items[b * k + j] = rounds[start + b].candidate_items[j];
      }
    }
    Graph g(false);
    SenderOutput so =
        SenderForward(g, sender, g.Constant(GatherRows(s_reps, s_items)),
                      game.message_length, DecodeMode::kGreedy, rng);
    Var cands = g.Constant(
        GatherRows(r_reps, c_items).Reshaped({n, k, kRepresentationDim}));
    ReceiverOutput ro = ReceiverForward(g, receiver, so.messages, cands,
                                        DecodeMode::kGreedy, rng);
    for (std::size_t b = 0; b < n; ++b) {
      const GameRound& round = rounds[start + b];
      MessageRecord rec;
      rec.target_class = round.target_class;
      rec.message = so.messages[b];
      rec.selected_class = round.candidate_classes[ro.selections[b]];
      rec.reward = Reward(rec.selected_class, round, game);
      result.log.rounds.push_back(std::move(rec));
    }
  }
  result.mean_reward = result.log.MeanReward();
  return result;
}

// --- training loops ------------------------------------------------------

namespace {

RepresentationCache CacheIfFrozen(Agent& agent, const Dataset& dataset) {
  if (VisionTrainable(agent)) return {};
  return BuildCache(agent.vision, dataset);
}

double AccuracyIfTrained(Agent& agent, const Dataset& dataset) {
  if (!VisionTrainable(agent)) return kNaN;
  return ClassificationAccuracy(agent.vision, dataset, Split::kTest);
}

void CheckDataset(const Dataset& dataset) {
  if (!dataset.CoversAllClasses()) {
    throw std::invalid_argument("game training needs every class in both splits");
  }
}

struct EpochAccumulator {
  double weight = 0.0;
  EpochStats stats;
  void Add(const BatchStats& b, std::size_t n) {
    const double w = static_cast<double>(n);
    weight += w;
    stats.mean_reward += w * b.mean_reward;
    stats.sender_loss += w * b.sender_loss;
    stats.receiver_loss += w * b.receiver_loss;
    stats.classification_loss += w * b.classification_loss;
  }
  EpochStats Finish(int epoch) {
    EpochStats s = stats;
    s.epoch = epoch;
    if (weight > 0.0) {
      s.mean_reward /= weight;
      s.sender_loss /= weight;
      s.receiver_loss /= weight;
      s.classification_loss /= weight;
    }
    return s;
  }
};

// Drives epochs of shuffled train-split targets; `step` consumes a batch of
// sender items and returns the batch statistics plus the agents involved.
template <typename StepFn, typename AccuracyFn>
std::vector<EpochStats> RunEpochs(const Dataset& dataset,
                                  const GameTrainConfig& config, Rng& rng,
                                  StepFn step, AccuracyFn accuracy) {
  std::vector<EpochStats> epochs;
  std::vector<std::size_t> order = dataset.train();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Shuffle(order, rng);
    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      acc.Add(step(std::span<const std::size_t>(order.data() + start, n)), n);
    }
    EpochStats s = acc.Finish(epoch + 1);
    accuracy(s);
    epochs.push_back(s);
  }
  return epochs;
}

std::vector<GameRound> MakeRounds(const Dataset& dataset,
                                  const GameConfig& game,
                                  std::span<const std::size_t> items,
                                  Rng& rng) {
  std::vector<GameRound> rounds;
  rounds.reserve(items.size());
  for (std::size_t item : items) {
    rounds.push_back(SampleRoundForItem(dataset, game, Split::kTrain, item, rng));
  }
  return rounds;
}

}  // namespace

TrainLog RunScenario(Agent& sender, Agent& receiver, const Dataset& dataset,
                     const GameConfig& game, const GameTrainConfig& config,
                     std::uint64_t seed) {
  game.Validate();
  config.Validate();
  CheckDataset(dataset);
  if (!sender.can_send() || !receiver.can_receive()) {
    throw ConfigError("RunScenario: agent roles do not fit the scenario");
  }
  if (sender.vocab_size != game.vocab_size ||
      receiver.vocab_size != game.vocab_size) {
    throw ConfigError("RunScenario: agent vocabulary differs from the game");
  }
  ConfigureScenario(sender, receiver, config.scenario);
  const RepresentationCache s_cache = CacheIfFrozen(sender, dataset);
  const RepresentationCache r_cache = CacheIfFrozen(receiver, dataset);
  AgentOptimizer s_opt, r_opt;
  Rng rng(DeriveSeed(seed, 1));

  TrainLog log;
  log.scenario = ScenarioName(config.scenario);
  log.epochs = RunEpochs(
      dataset, config, rng,
      [&](std::span<const std::size_t> items) {
        return ReinforceStep(sender, receiver, dataset,
                             MakeRounds(dataset, game, items, rng), game,
                             config, s_cache, r_cache, s_opt, r_opt, rng);
      },
      [&](EpochStats& s) {
        s.sender_accuracy = AccuracyIfTrained(sender, dataset);
        s.receiver_accuracy = AccuracyIfTrained(receiver, dataset);
      });
  EvalResult eval = Evaluate(sender, receiver, dataset, game,
                             config.eval_rounds, DeriveSeed(seed, 2));
  log.test_reward = eval.mean_reward;
  log.messages = std::move(eval.log);
  return log;
}

TrainLog RunPopulation(std::vector<Agent*> senders,
                       std::vector<Agent*> receivers, const Dataset& dataset,
                       const GameConfig& game, const GameTrainConfig& config,
                       std::uint64_t seed) {
  game.Validate();
  config.Validate();
  CheckDataset(dataset);
  if (senders.empty() || receivers.empty()) {
    throw ConfigError("RunPopulation: empty population");
  }
  if (config.scenario == Scenario::kLanguageLearning) {
    throw ConfigError("RunPopulation: language learning is a pair scenario");
  }
  for (Agent* s : senders) {
    for (Agent* r : receivers) ConfigureScenario(*s, *r, config.scenario);
  }
  std::vector<RepresentationCache> s_cache, r_cache;
  std::vector<AgentOptimizer> s_opt(senders.size()), r_opt(receivers.size());
  for (Agent* s : senders) s_cache.push_back(CacheIfFrozen(*s, dataset));
  for (Agent* r : receivers) r_cache.push_back(CacheIfFrozen(*r, dataset));
  Rng rng(DeriveSeed(seed, 1));

  TrainLog log;
  log.scenario = "population_" + ScenarioName(config.scenario);
  log.epochs = RunEpochs(
      dataset, config, rng,
      [&](std::span<const std::size_t> items) {
        const std::size_t i = UniformIndex(rng, senders.size());
        const std::size_t j = UniformIndex(rng, receivers.size());
        return ReinforceStep(*senders[i], *receivers[j], dataset,
                             MakeRounds(dataset, game, items, rng), game,
                             config, s_cache[i], r_cache[j], s_opt[i],
                             r_opt[j], rng);
      },
      [&](EpochStats& s) {
        s.sender_accuracy = AccuracyIfTrained(*senders[0], dataset);
        s.receiver_accuracy = AccuracyIfTrained(*receivers[0], dataset);
      });
  double total = 0.0;
  log.messages.vocab_size = game.vocab_size;
  for (std::size_t i = 0; i < senders.size(); ++i) {
    for (std::size_t j = 0; j < receivers.size(); ++j) {
      EvalResult e = Evaluate(*senders[i], *receivers[j], dataset, game,
                              config.eval_rounds, DeriveSeed(seed, 2, i, j));
      total += e.mean_reward;
      for (auto& r : e.log.rounds) log.messages.rounds.push_back(std::move(r));
    }
  }
  log.test_reward = total / static_cast<double>(senders.size() * receivers.size());
  return log;
}

TrainLog RunFlexible(Agent& a, Agent& b, const Dataset& dataset,
                     const GameConfig& game, const GameTrainConfig& config,
                     std::uint64_t seed) {
  game.Validate();
  config.Validate();
  CheckDataset(dataset);
  if (a.role != Role::kFlexible || b.role != Role::kFlexible) {
    throw ConfigError("RunFlexible: both agents must be flexible-role");
  }
  if (&a == &b) throw ConfigError("RunFlexible: needs two distinct agents");
  if (config.scenario == Scenario::kLanguageLearning) {
    throw ConfigError("RunFlexible: language learning is a fixed-role scenario");
  }
  ConfigureScenario(a, b, config.scenario);
  const RepresentationCache a_cache = CacheIfFrozen(a, dataset);
  const RepresentationCache b_cache = CacheIfFrozen(b, dataset);
  AgentOptimizer a_opt, b_opt;
  Rng rng(DeriveSeed(seed, 1));

  TrainLog log;
  log.scenario = "flexible_" + ScenarioName(config.scenario);
  log.epochs = RunEpochs(
      dataset, config, rng,
      [&](std::span<const std::size_t> items) {
        const bool a_sends = UniformIndex(rng, 2) == 0;
        auto rounds = MakeRounds(dataset, game, items, rng);
        return a_sends ? ReinforceStep(a, b, dataset, rounds, game, config,
                                       a_cache, b_cache, a_opt, b_opt, rng)
                       : ReinforceStep(b, a, dataset, rounds, game, config,
                                       b_cache, a_cache, b_opt, a_opt, rng);
      },
      [&](EpochStats& s) {
        s.sender_accuracy = AccuracyIfTrained(a, dataset);
        s.receiver_accuracy = AccuracyIfTrained(b, dataset);
      });
  EvalResult ab = Evaluate(a, b, dataset, game, config.eval_rounds,
                           DeriveSeed(seed, 2));
  EvalResult ba = Evaluate(b, a, dataset, game, config.eval_rounds,
                           DeriveSeed(seed, 3));
  log.test_reward = ab.mean_reward;
  log.messages = std::move(ab.log);
  log.swapped_test_reward = ba.mean_reward;
  log.swapped_messages = std::move(ba.log);
  return log;
}

}  // namespace emergelab
