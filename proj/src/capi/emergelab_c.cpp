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

#include "emergelab/emergelab.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "emergelab/agents.hpp"
#include "emergelab/evolution.hpp"
#include "emergelab/grid_search.hpp"
#include "emergelab/metrics.hpp"
#include "emergelab/optim.hpp"
#include "emergelab/shapes_world.hpp"
#include "emergelab/smoothing.hpp"
#include "emergelab/training.hpp"

namespace el = emergelab;

struct emlab_dataset {
  el::Dataset value;
};
struct emlab_vision {
  el::VisionModule value;
};
struct emlab_rsm {
  el::Rsm value;
};
struct emlab_agent {
  el::Agent value;
};
struct emlab_train_log {
  el::TrainLog value;
};
struct emlab_message_log {
  el::MessageLog value;
};
struct emlab_payoff {
  el::PayoffTable value;
};

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

thread_local std::string g_last_error;

emlab_status Fail(emlab_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs fn and maps exceptions to status codes.
template <typename Fn>
emlab_status Guard(Fn&& fn) {
  try {
    fn();
    return EMLAB_OK;
  } catch (const el::ConfigError& e) {
    return Fail(EMLAB_ERR_CONFIG, e.what());
  } catch (const el::FormatError& e) {
    return Fail(EMLAB_ERR_FORMAT, e.what());
  } catch (const el::IoError& e) {
    return Fail(EMLAB_ERR_IO, e.what());
  } catch (const el::DivergenceError& e) {
    return Fail(EMLAB_ERR_DIVERGENCE, e.what());
  } catch (const std::invalid_argument& e) {
    return Fail(EMLAB_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return Fail(EMLAB_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(EMLAB_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return Fail(EMLAB_ERR_RUNTIME, e.what());
  } catch (...) {
    return Fail(EMLAB_ERR_RUNTIME, "unknown error");
  }
}

template <typename T>
void Require(const T* p, const char* what) {
  if (p == nullptr) {
    throw std::invalid_argument(std::string(what) + " must not be NULL");
  }
}

el::Attribute ToAttribute(int a) {
  if (a < 0 || a > 2) {
    throw std::invalid_argument("attribute must be 0 (color), 1 (scale) or "
                                "2 (shape)");
  }
  return static_cast<el::Attribute>(a);
}

el::SmoothingSpec ToSpec(const emlab_spec* s) {
  Require(s, "spec");
  if (s->condition < EMLAB_COND_DEFAULT || s->condition > EMLAB_COND_MIXED) {
    throw el::ConfigError("unknown smoothing condition");
  }
  el::SmoothingSpec spec;
  spec.condition = static_cast<el::Condition>(s->condition);
  spec.sigma = s->sigma;
  if (spec.condition == el::Condition::kMixed) {
    spec.pair = {ToAttribute(s->pair[0]), ToAttribute(s->pair[1])};
    spec.weights = {s->weights[0], s->weights[1]};
  }
  spec.Validate();
  return spec;
}

emlab_spec FromSpec(const el::SmoothingSpec& spec) {
  emlab_spec s{};
  s.condition = static_cast<int>(spec.condition);
  s.sigma = spec.sigma;
  s.pair[0] = static_cast<int>(spec.pair[0]);
  s.pair[1] = static_cast<int>(spec.pair[1]);
  s.weights[0] = spec.weights[0];
  s.weights[1] = spec.weights[1];
  return s;
}

el::PretrainConfig ToPretrain(const emlab_pretrain_config* c) {
  Require(c, "pretrain config");
  el::PretrainConfig p;
  if (c->optimizer != EMLAB_OPT_SGD && c->optimizer != EMLAB_OPT_ADAM) {
    throw el::ConfigError("unknown optimizer");
  }
  p.optimizer = c->optimizer == EMLAB_OPT_ADAM ? el::OptimizerKind::kAdam
                                               : el::OptimizerKind::kSgd;
  p.learning_rate = c->learning_rate;
  p.batch_size = c->batch_size;
  p.epochs = c->epochs;
  p.cosine_decay = c->cosine_decay != 0;
  p.Validate();
  return p;
}

emlab_pretrain_config FromPretrain(const el::PretrainConfig& p) {
  emlab_pretrain_config c{};
  c.optimizer =
      p.optimizer == el::OptimizerKind::kAdam ? EMLAB_OPT_ADAM : EMLAB_OPT_SGD;
  c.learning_rate = p.learning_rate;
  c.batch_size = p.batch_size;
  c.epochs = p.epochs;
  c.cosine_decay = p.cosine_decay ? 1 : 0;
  return c;
}

el::GameConfig ToGame(const emlab_game_config* c) {
  Require(c, "game config");
  el::GameConfig g;
  g.vocab_size = c->vocab_size;
  g.message_length = c->message_length;
  g.distractors = c->distractors;
  for (int i = 0; i < 3; ++i) g.relevant[i] = c->relevant[i] != 0;
  g.Validate();
  return g;
}

el::Scenario ToScenario(int s) {
  if (s < EMLAB_FROZEN_VISION || s > EMLAB_EMERGENCE_NO_CLASSIFICATION) {
    throw el::ConfigError("unknown scenario");
  }
  return static_cast<el::Scenario>(s);
}

el::GameTrainConfig ToTrain(const emlab_train_config* c) {
  Require(c, "train config");
  el::GameTrainConfig t;
  t.scenario = ToScenario(c->scenario);
  t.learning_rate = c->learning_rate;
  t.batch_size = c->batch_size;
  t.epochs = c->epochs;
  t.entropy_coef = c->entropy_coef;
  t.baseline = c->baseline != 0;
  t.eval_rounds = c->eval_rounds;
  t.Validate();
  return t;
}

el::Role ToRole(int role) {
  if (role < EMLAB_SENDER || role > EMLAB_FLEXIBLE) {
    throw std::invalid_argument("unknown role");
  }
  return static_cast<el::Role>(role);
}

el::ImageSize ToSize(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  return el::ImageSize{height, width};
}

std::ofstream OpenOut(const char* path) {
  Require(path, "path");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw el::IoError(std::string("cannot write ") + path);
  return out;
}

std::ifstream OpenIn(const char* path) {
  Require(path, "path");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw el::IoError(std::string("cannot open ") + path);
  return in;
}

void Finish(std::ofstream& out, const char* path) {
  out.flush();
  if (!out) throw el::IoError(std::string("write failed for ") + path);
}

double OrNaN(const std::optional<double>& v) { return v ? *v : kNaN; }

void CopyCI(const el::BootstrapCI& ci, emlab_ci* out) {
  out->estimate = ci.estimate;
  out->lower = ci.lower;
  out->upper = ci.upper;
  out->level = ci.level;
  out->resamples = ci.resamples;
}

}  // namespace

extern "C" {

const char* emlab_last_error(void) { return g_last_error.c_str(); }

const char* emlab_status_name(emlab_status status) {
  switch (status) {
    case EMLAB_OK: return "ok";
    case EMLAB_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EMLAB_ERR_CONFIG: return "configuration error";
    case EMLAB_ERR_FORMAT: return "format error";
    case EMLAB_ERR_IO: return "i/o error";
    case EMLAB_ERR_DIVERGENCE: return "divergence";
    case EMLAB_ERR_UNDEFINED: return "undefined";
    case EMLAB_ERR_NO_CANDIDATE: return "no candidate";
    case EMLAB_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

const char* emlab_version(void) { return "1.0.0"; }

uint64_t emlab_derive_seed(uint64_t master, uint64_t a, uint64_t b,
                           uint64_t c) {
  return el::DeriveSeed(master, a, b, c);
}

// ---- attributes and classes ---------------------------------------------

emlab_status emlab_class_id_of(int color, int scale, int shape,
                               int* class_id) {
  return Guard([&] {
    Require(class_id, "class_id");
    *class_id = el::ClassIdOf(color, scale, shape);
  });
}

emlab_status emlab_attributes_of(int class_id, int* color, int* scale,
                                 int* shape) {
  return Guard([&] {
    Require(color, "color");
    Require(scale, "scale");
    Require(shape, "shape");
    const el::ObjectClass c = el::AttributesOf(class_id);
    *color = c.color;
    *scale = c.scale;
    *shape = c.shape;
  });
}

// ---- datasets -------------------------------------------------------------

emlab_status emlab_dataset_build(int instances_per_class, int height, int width,
                                 uint64_t seed, emlab_dataset** out) {
  return Guard([&] {
    Require(out, "out");
    *out = new emlab_dataset{
        el::BuildDataset(instances_per_class, ToSize(height, width), seed)};
  });
}

emlab_status emlab_dataset_load(const char* path, emlab_dataset** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new emlab_dataset{el::IngestExternal(path)};
  });
}

emlab_status emlab_dataset_save(const emlab_dataset* dataset,
                                const char* path) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(path, "path");
    el::WriteExternal(dataset->value, path);
  });
}

emlab_status emlab_dataset_info(const emlab_dataset* dataset, size_t* items,
                                size_t* train, size_t* test, int* height,
                                int* width) {
  return Guard([&] {
    Require(dataset, "dataset");
    const el::Dataset& d = dataset->value;
    if (items) *items = d.size();
    if (train) *train = d.train().size();
    if (test) *test = d.test().size();
    if (height) *height = d.image_size().height;
    if (width) *width = d.image_size().width;
  });
}

void emlab_dataset_free(emlab_dataset* dataset) { delete dataset; }

// ---- smoothing specs ------------------------------------------------------

emlab_status emlab_spec_named(const char* name, emlab_spec* out) {
  return Guard([&] {
    Require(name, "name");
    Require(out, "out");
    *out = FromSpec(el::SmoothingSpec::Named(name));
  });
}

emlab_status emlab_spec_validate(const emlab_spec* spec) {
  return Guard([&] { ToSpec(spec); });
}

emlab_status emlab_spec_name(const emlab_spec* spec, char* buffer,
                             size_t capacity) {
  return Guard([&] {
    Require(buffer, "buffer");
    if (capacity == 0) throw std::invalid_argument("capacity must be > 0");
    const std::string name = ToSpec(spec).Name();
    const size_t n = std::min(name.size(), capacity - 1);
    std::memcpy(buffer, name.data(), n);
    buffer[n] = '\0';
  });
}

emlab_status emlab_smoothed_target(const emlab_spec* spec, int class_id,
                                   double out[EMLAB_NUM_CLASSES]) {
  return Guard([&] {
    Require(out, "out");
    const el::TargetDistribution t = el::SmoothedTarget(class_id, ToSpec(spec));
    std::copy(t.begin(), t.end(), out);
  });
}

// ---- vision modules -------------------------------------------------------

emlab_status emlab_pretrain_config_preset(const char* preset,
                                          emlab_pretrain_config* out) {
  return Guard([&] {
    Require(preset, "preset");
    Require(out, "out");
    const std::string p = preset;
    if (p == "paper") {
      *out = FromPretrain(el::PretrainConfig::Paper());
    } else if (p == "desk") {
      *out = FromPretrain(el::PretrainConfig::Desk());
    } else {
      throw el::ConfigError("unknown preset '" + p + "'");
    }
  });
}

emlab_status emlab_vision_create(int height, int width, uint64_t seed,
                                 emlab_vision** out) {
  return Guard([&] {
    Require(out, "out");
    el::Rng rng(seed);
    *out = new emlab_vision{el::VisionModule::Create(ToSize(height, width), rng)};
  });
}

emlab_status emlab_vision_clone(const emlab_vision* vision,
                                emlab_vision** out) {
  return Guard([&] {
    Require(vision, "vision");
    Require(out, "out");
    *out = new emlab_vision{vision->value};
  });
}

emlab_status emlab_vision_pretrain(emlab_vision* vision,
                                   const emlab_dataset* dataset,
                                   const emlab_spec* spec,
                                   const emlab_pretrain_config* config,
                                   uint64_t seed, double* train_accuracy,
                                   double* test_accuracy) {
  return Guard([&] {
    Require(vision, "vision");
    Require(dataset, "dataset");
    el::Rng rng(seed);
    const el::PretrainResult r = el::PretrainVision(
        vision->value, dataset->value, ToSpec(spec), ToPretrain(config), rng);
    if (train_accuracy) *train_accuracy = r.train_accuracy;
    if (test_accuracy) *test_accuracy = r.test_accuracy;
  });
}

emlab_status emlab_vision_accuracy(emlab_vision* vision,
                                   const emlab_dataset* dataset, int split,
                                   double* accuracy) {
  return Guard([&] {
    Require(vision, "vision");
    Require(dataset, "dataset");
    Require(accuracy, "accuracy");
    if (split != EMLAB_SPLIT_TRAIN && split != EMLAB_SPLIT_TEST) {
      throw std::invalid_argument("unknown split");
    }
    *accuracy = el::ClassificationAccuracy(
        vision->value, dataset->value,
        split == EMLAB_SPLIT_TRAIN ? el::Split::kTrain : el::Split::kTest);
  });
}

emlab_status emlab_vision_save(const emlab_vision* vision, const char* path) {
  return Guard([&] {
    Require(vision, "vision");
    Require(path, "path");
    const auto params = vision->value.parameters();
    el::nn::SaveParameters(path, params);
  });
}

emlab_status emlab_vision_load(const char* path, int height, int width,
                               emlab_vision** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    el::Rng rng(0);
    auto v = std::make_unique<emlab_vision>(
        emlab_vision{el::VisionModule::Create(ToSize(height, width), rng)});
    const auto params = v->value.parameters();
    el::nn::LoadParameters(path, params);
    *out = v.release();
  });
}

void emlab_vision_free(emlab_vision* vision) { delete vision; }

// ---- similarity analysis --------------------------------------------------

emlab_status emlab_rsm_from_vision(emlab_vision* vision,
                                   const emlab_dataset* dataset, int per_class,
                                   uint64_t seed, emlab_rsm** out) {
  return Guard([&] {
    Require(vision, "vision");
    Require(dataset, "dataset");
    Require(out, "out");
    *out = new emlab_rsm{
        el::RsmFromVision(vision->value, dataset->value, per_class, seed)};
  });
}

emlab_status emlab_rsm_template(int attribute, emlab_rsm** out) {
  return Guard([&] {
    Require(out, "out");
    *out = new emlab_rsm{attribute < 0 ? el::TemplateRsm()
                                       : el::TemplateRsm(ToAttribute(attribute))};
  });
}

emlab_status emlab_rsm_at(const emlab_rsm* rsm, int i, int j, double* value) {
  return Guard([&] {
    Require(rsm, "rsm");
    Require(value, "value");
    const int n = static_cast<int>(rsm->value.size());
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw std::out_of_range("rsm index out of range");
    }
    *value = rsm->value.at(i, j);
  });
}

emlab_status emlab_rsm_profile(const emlab_rsm* rsm, emlab_bias_profile* out) {
  return Guard([&] {
    Require(rsm, "rsm");
    Require(out, "out");
    const el::BiasProfile p = el::ProfileRsm(rsm->value);
    out->overall = OrNaN(p.overall);
    out->color = OrNaN(p.color);
    out->scale = OrNaN(p.scale);
    out->shape = OrNaN(p.shape);
  });
}

emlab_status emlab_rsa(const emlab_rsm* a, const emlab_rsm* b, double* score) {
  bool undefined = false;
  const emlab_status s = Guard([&] {
    Require(a, "a");
    Require(b, "b");
    Require(score, "score");
    const auto r = el::Rsa(a->value, b->value);
    undefined = !r;
    *score = OrNaN(r);
  });
  if (s == EMLAB_OK && undefined) {
    return Fail(EMLAB_ERR_UNDEFINED, "RSA undefined for a constant matrix");
  }
  return s;
}

emlab_status emlab_rsm_write_csv(const emlab_rsm* rsm, const char* path) {
  return Guard([&] {
    Require(rsm, "rsm");
    std::ofstream out = OpenOut(path);
    el::WriteRsmCsv(rsm->value, out);
    Finish(out, path);
  });
}

emlab_status emlab_rsm_write_pgm(const emlab_rsm* rsm, const char* path,
                                 int cell_pixels) {
  return Guard([&] {
    Require(rsm, "rsm");
    std::ofstream out = OpenOut(path);
    el::WriteRsmPgm(rsm->value, out, cell_pixels);
    Finish(out, path);
  });
}

void emlab_rsm_free(emlab_rsm* rsm) { delete rsm; }

// ---- grid search ----------------------------------------------------------

emlab_status emlab_grid_config_default(const char* preset,
                                       emlab_grid_config* out) {
  return Guard([&] {
    Require(preset, "preset");
    Require(out, "out");
    const std::string p = preset;
    el::GridSearchConfig c;
    if (p == "paper") {
      c.pretrain = el::PretrainConfig::Paper();
      c.accuracy_floor = 0.97;
    } else if (p != "desk") {
      throw el::ConfigError("unknown preset '" + p + "'");
    }
    *out = emlab_grid_config{};
    out->pretrain = FromPretrain(c.pretrain);
    out->accuracy_floor = c.accuracy_floor;
    out->rsm_per_class = c.rsm_per_class;
    out->budget = c.budget;
    out->workers = c.workers;
  });
}

emlab_status emlab_grid_search(const emlab_dataset* dataset, int first,
                               int second, const emlab_grid_config* config,
                               uint64_t seed, const char* csv_path,
                               emlab_spec* selected,
                               double* selected_accuracy) {
  bool none = false;
  const emlab_status s = Guard([&] {
    Require(dataset, "dataset");
    Require(config, "config");
    el::GridSearchConfig c;
    if (config->sigmas != nullptr) {
      c.sigmas.assign(config->sigmas, config->sigmas + config->n_sigmas);
    }
    if (config->first_weights != nullptr) {
      c.weights.clear();
      for (size_t i = 0; i < config->n_weights; ++i) {
        c.weights.push_back(
            {config->first_weights[i], 1.0 - config->first_weights[i]});
      }
    }
    c.pretrain = ToPretrain(&config->pretrain);
    c.accuracy_floor = config->accuracy_floor;
    c.rsm_per_class = config->rsm_per_class;
    c.budget = config->budget;
    c.workers = config->workers;
    const el::GridSearchResult r = el::GridSearchMixed(
        dataset->value, {ToAttribute(first), ToAttribute(second)}, c, seed);
    if (csv_path != nullptr) {
      std::ofstream out = OpenOut(csv_path);
      el::WriteGridSearchCsv(r, out);
      Finish(out, csv_path);
    }
    if (const el::GridCandidate* best = r.best()) {
      if (selected) *selected = FromSpec(best->spec);
      if (selected_accuracy) *selected_accuracy = best->test_accuracy;
    } else {
      none = true;
    }
  });
  if (s == EMLAB_OK && none) {
    return Fail(EMLAB_ERR_NO_CANDIDATE,
                "no grid candidate reached the accuracy floor");
  }
  return s;
}

// ---- game and training configuration --------------------------------------

emlab_status emlab_game_config_variant(const char* variant,
                                       emlab_game_config* out) {
  return Guard([&] {
    Require(variant, "variant");
    Require(out, "out");
    el::GameConfig g;
    g.relevant = el::RelevanceForVariant(variant);
    out->vocab_size = g.vocab_size;
    out->message_length = g.message_length;
    out->distractors = g.distractors;
    for (int i = 0; i < 3; ++i) out->relevant[i] = g.relevant[i] ? 1 : 0;
  });
}

emlab_status emlab_game_config_validate(const emlab_game_config* config) {
  return Guard([&] { ToGame(config); });
}

emlab_status emlab_scenario_parse(const char* name, int* scenario) {
  return Guard([&] {
    Require(name, "name");
    Require(scenario, "scenario");
    *scenario = static_cast<int>(el::ParseScenario(name));
  });
}

const char* emlab_scenario_name(int scenario) {
  switch (scenario) {
    case EMLAB_FROZEN_VISION: return "frozen_vision";
    case EMLAB_LANGUAGE_LEARNING: return "language_learning";
    case EMLAB_EMERGENCE_JOINT: return "emergence_joint";
    case EMLAB_EMERGENCE_NO_CLASSIFICATION: return "emergence_no_classification";
  }
  return nullptr;
}

emlab_status emlab_train_config_preset(const char* preset, int scenario,
                                       int population,
                                       emlab_train_config* out) {
  return Guard([&] {
    Require(preset, "preset");
    Require(out, "out");
    const std::string p = preset;
    const el::Scenario s = ToScenario(scenario);
    el::GameTrainConfig t;
    if (p == "paper") {
      t = el::GameTrainConfig::Paper(s);
      if (population) t.epochs = el::kPaperPopulationEpochs;
    } else if (p == "desk") {
      t = el::GameTrainConfig::Desk(s);
      if (population) t.epochs = el::kDeskPopulationEpochs;
    } else {
      throw el::ConfigError("unknown preset '" + p + "'");
    }
    out->scenario = static_cast<int>(t.scenario);
    out->learning_rate = t.learning_rate;
    out->batch_size = t.batch_size;
    out->epochs = t.epochs;
    out->entropy_coef = t.entropy_coef;
    out->baseline = t.baseline ? 1 : 0;
    out->eval_rounds = t.eval_rounds;
  });
}

// ---- agents and training --------------------------------------------------

emlab_status emlab_agent_create(int role, const emlab_vision* vision,
                                const emlab_spec* vision_spec, int vocab_size,
                                uint64_t seed, emlab_agent** out) {
  return Guard([&] {
    Require(vision, "vision");
    Require(out, "out");
    el::Rng rng(seed);
    el::Agent a =
        el::Agent::WithVision(ToRole(role), vision->value, vocab_size, rng);
    if (vision_spec != nullptr) a.vision_spec = ToSpec(vision_spec);
    *out = new emlab_agent{std::move(a)};
  });
}

emlab_status emlab_agent_vision(const emlab_agent* agent, emlab_vision** out) {
  return Guard([&] {
    Require(agent, "agent");
    Require(out, "out");
    emlab_vision v{agent->value.vision};
    v.value.SetTrainable(true);
    *out = new emlab_vision{std::move(v)};
  });
}

emlab_status emlab_agent_save(const emlab_agent* agent, const char* path) {
  return Guard([&] {
    Require(agent, "agent");
    Require(path, "path");
    const auto params = agent->value.parameters();
    el::nn::SaveParameters(path, params);
  });
}

emlab_status emlab_agent_load(const char* path, int role, int vocab_size,
                              int height, int width, emlab_agent** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    el::Rng rng(0);
    auto a = std::make_unique<emlab_agent>(emlab_agent{el::Agent::Create(
        ToRole(role), ToSize(height, width), vocab_size, rng)});
    const auto params = a->value.parameters();
    el::nn::LoadParameters(path, params);
    *out = a.release();
  });
}

void emlab_agent_free(emlab_agent* agent) { delete agent; }

emlab_status emlab_run_scenario(emlab_agent* sender, emlab_agent* receiver,
                                const emlab_dataset* dataset,
                                const emlab_game_config* game,
                                const emlab_train_config* train, uint64_t seed,
                                emlab_train_log** out) {
  return Guard([&] {
    Require(sender, "sender");
    Require(receiver, "receiver");
    Require(dataset, "dataset");
    Require(out, "out");
    *out = new emlab_train_log{el::RunScenario(sender->value, receiver->value,
                                               dataset->value, ToGame(game),
                                               ToTrain(train), seed)};
  });
}

emlab_status emlab_run_population(emlab_agent* const* senders,
                                  size_t n_senders,
                                  emlab_agent* const* receivers,
                                  size_t n_receivers,
                                  const emlab_dataset* dataset,
                                  const emlab_game_config* game,
                                  const emlab_train_config* train,
                                  uint64_t seed, emlab_train_log** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    if (n_senders > 0) Require(senders, "senders");
    if (n_receivers > 0) Require(receivers, "receivers");
    std::vector<el::Agent*> s, r;
    for (size_t i = 0; i < n_senders; ++i) {
      Require(senders[i], "sender");
      s.push_back(&senders[i]->value);
    }
    for (size_t i = 0; i < n_receivers; ++i) {
      Require(receivers[i], "receiver");
      r.push_back(&receivers[i]->value);
    }
    *out = new emlab_train_log{el::RunPopulation(
        s, r, dataset->value, ToGame(game), ToTrain(train), seed)};
  });
}

emlab_status emlab_run_flexible(emlab_agent* a, emlab_agent* b,
                                const emlab_dataset* dataset,
                                const emlab_game_config* game,
                                const emlab_train_config* train, uint64_t seed,
                                emlab_train_log** out) {
  return Guard([&] {
    Require(a, "a");
    Require(b, "b");
    Require(dataset, "dataset");
    Require(out, "out");
    *out = new emlab_train_log{el::RunFlexible(a->value, b->value,
                                               dataset->value, ToGame(game),
                                               ToTrain(train), seed)};
  });
}

emlab_status emlab_train_log_rewards(const emlab_train_log* log,
                                     double* test_reward,
                                     double* swapped_reward) {
  return Guard([&] {
    Require(log, "log");
    if (test_reward) *test_reward = log->value.test_reward;
    if (swapped_reward) {
      *swapped_reward = log->value.swapped_messages.rounds.empty()
                            ? kNaN
                            : log->value.swapped_test_reward;
    }
  });
}

emlab_status emlab_train_log_epochs(const emlab_train_log* log,
                                    size_t* epochs) {
  return Guard([&] {
    Require(log, "log");
    Require(epochs, "epochs");
    *epochs = log->value.epochs.size();
  });
}

emlab_status emlab_train_log_write_csv(const emlab_train_log* log,
                                       const char* path) {
  return Guard([&] {
    Require(log, "log");
    std::ofstream out = OpenOut(path);
    el::WriteTrainLogCsv(log->value, out);
    Finish(out, path);
  });
}

emlab_status emlab_train_log_messages(const emlab_train_log* log, int swapped,
                                      emlab_message_log** out) {
  return Guard([&] {
    Require(log, "log");
    Require(out, "out");
    *out = new emlab_message_log{swapped ? log->value.swapped_messages
                                         : log->value.messages};
  });
}

void emlab_train_log_free(emlab_train_log* log) { delete log; }

emlab_status emlab_evaluate(emlab_agent* sender, emlab_agent* receiver,
                            const emlab_dataset* dataset,
                            const emlab_game_config* game, int n_rounds,
                            uint64_t seed, double* mean_reward,
                            emlab_message_log** out) {
  return Guard([&] {
    Require(sender, "sender");
    Require(receiver, "receiver");
    Require(dataset, "dataset");
    el::EvalResult r = el::Evaluate(sender->value, receiver->value,
                                    dataset->value, ToGame(game), n_rounds,
                                    seed);
    if (mean_reward) *mean_reward = r.mean_reward;
    if (out) *out = new emlab_message_log{std::move(r.log)};
  });
}

// ---- message logs ---------------------------------------------------------

emlab_status emlab_message_log_read(const char* path, int vocab_size,
                                    emlab_message_log** out) {
  return Guard([&] {
    Require(out, "out");
    std::ifstream in = OpenIn(path);
    *out = new emlab_message_log{el::ReadMessageLogCsv(in, vocab_size)};
  });
}

emlab_status emlab_message_log_write(const emlab_message_log* log,
                                     const char* path) {
  return Guard([&] {
    Require(log, "log");
    std::ofstream out = OpenOut(path);
    el::WriteMessageLogCsv(log->value, out);
    Finish(out, path);
  });
}

emlab_status emlab_message_log_info(const emlab_message_log* log,
                                    emlab_log_info* out) {
  return Guard([&] {
    Require(log, "log");
    Require(out, "out");
    const el::MessageLog& m = log->value;
    if (m.rounds.empty()) throw std::invalid_argument("message log is empty");
    out->rounds = m.rounds.size();
    out->mean_reward = m.MeanReward();
    out->effectiveness = OrNaN(el::Effectiveness(m, el::Projection::kObject));
    out->effectiveness_color =
        OrNaN(el::Effectiveness(m, el::Projection::kColor));
    out->effectiveness_scale =
        OrNaN(el::Effectiveness(m, el::Projection::kScale));
    out->effectiveness_shape =
        OrNaN(el::Effectiveness(m, el::Projection::kShape));
    out->average_effectiveness = OrNaN(el::AverageEffectiveness(m));
    const el::LogInformation i = el::AnalyzeLog(m);
    out->h_o = i.h_o;
    out->h_m = i.h_m;
    out->h_s = i.h_s;
    out->h_o_given_m = i.h_o_given_m;
    out->h_m_given_o = i.h_m_given_o;
    out->h_s_given_m = i.h_s_given_m;
    out->i_om = i.i_om;
    out->i_sm = i.i_sm;
    out->i_os = i.i_os;
    out->i_os_given_m = i.i_os_given_m;
    out->interaction = i.interaction;
    out->h_o_given_ms = i.h_o_given_ms;
    out->h_s_given_om = i.h_s_given_om;
  });
}

void emlab_message_log_free(emlab_message_log* log) { delete log; }

// ---- bootstrap ------------------------------------------------------------

emlab_status emlab_bootstrap_mean(const double* samples, size_t n,
                                  int resamples, double level, uint64_t seed,
                                  emlab_ci* out) {
  return Guard([&] {
    Require(samples, "samples");
    Require(out, "out");
    CopyCI(el::BootstrapMean({samples, n}, resamples, level, seed), out);
  });
}

emlab_status emlab_bootstrap_diff(const double* a, size_t n_a, const double* b,
                                  size_t n_b, int resamples, double level,
                                  uint64_t seed, emlab_ci* out) {
  return Guard([&] {
    Require(a, "a");
    Require(b, "b");
    Require(out, "out");
    CopyCI(el::BootstrapDiffOfMeans({a, n_a}, {b, n_b}, resamples, level,
                                    seed),
           out);
  });
}

// ---- evolutionary analysis ------------------------------------------------

emlab_status emlab_tournament_run(
    const char* const* names, const emlab_vision* const* visions,
    const emlab_spec* specs, size_t n_types, const emlab_dataset* dataset,
    const emlab_game_config* game, const emlab_train_config* train,
    int runs_per_pair, int workers, uint64_t seed, emlab_warning_fn warn,
    void* user_data, emlab_payoff** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    if (n_types == 0) throw el::ConfigError("tournament needs types");
    Require(names, "names");
    Require(visions, "visions");
    Require(specs, "specs");
    std::vector<el::BiasType> types;
    for (size_t i = 0; i < n_types; ++i) {
      Require(names[i], "type name");
      Require(visions[i], "type vision");
      types.push_back({names[i], visions[i]->value, ToSpec(&specs[i])});
    }
    el::TournamentConfig cfg;
    cfg.game = ToGame(game);
    cfg.train = ToTrain(train);
    cfg.runs_per_pair = runs_per_pair;
    cfg.workers = workers;
    el::WarningSink sink;
    if (warn != nullptr) {
      sink = [warn, user_data](const std::string& m) {
        warn(m.c_str(), user_data);
      };
    }
    *out = new emlab_payoff{
        el::RunTournament(types, dataset->value, cfg, seed, sink)};
  });
}

emlab_status emlab_payoff_read(const char* path, emlab_payoff** out) {
  return Guard([&] {
    Require(out, "out");
    std::ifstream in = OpenIn(path);
    *out = new emlab_payoff{el::ReadPayoffCsv(in)};
  });
}

emlab_status emlab_payoff_write(const emlab_payoff* payoff, const char* path) {
  return Guard([&] {
    Require(payoff, "payoff");
    std::ofstream out = OpenOut(path);
    el::WritePayoffCsv(payoff->value, out);
    Finish(out, path);
  });
}

emlab_status emlab_payoff_size(const emlab_payoff* payoff, size_t* n_types) {
  return Guard([&] {
    Require(payoff, "payoff");
    Require(n_types, "n_types");
    *n_types = payoff->value.size();
  });
}

const char* emlab_payoff_type(const emlab_payoff* payoff, size_t i) {
  if (payoff == nullptr || i >= payoff->value.size()) return nullptr;
  return payoff->value.types()[i].c_str();
}

emlab_status emlab_payoff_failures(const emlab_payoff* payoff, size_t* count) {
  return Guard([&] {
    Require(payoff, "payoff");
    Require(count, "count");
    *count = payoff->value.failures().size();
  });
}

namespace {

void CopyMatrix(const el::Matrix& m, double* out) {
  const size_t n = m.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) out[i * n + j] = m[i][j];
  }
}

el::Matrix ToMatrix(const double* m, size_t n) {
  el::Matrix out(n, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) out[i][j] = m[i * n + j];
  }
  return out;
}

}  // namespace

emlab_status emlab_payoff_directed(const emlab_payoff* payoff, double* out) {
  return Guard([&] {
    Require(payoff, "payoff");
    Require(out, "out");
    CopyMatrix(payoff->value.MeanMatrix(), out);
  });
}

emlab_status emlab_payoff_symmetric(const emlab_payoff* payoff, double* out) {
  return Guard([&] {
    Require(payoff, "payoff");
    Require(out, "out");
    CopyMatrix(el::Symmetrize(payoff->value), out);
  });
}

emlab_status emlab_payoff_write_matrix(const emlab_payoff* payoff,
                                       const char* csv_path,
                                       const char* pgm_path, int cell_pixels) {
  return Guard([&] {
    Require(payoff, "payoff");
    const el::Matrix m = el::Symmetrize(payoff->value);
    const auto& types = payoff->value.types();
    const size_t n = m.size();
    if (csv_path != nullptr) {
      std::ostringstream s;
      s.precision(17);
      s << "type";
      for (const auto& t : types) s << ',' << t;
      s << '\n';
      for (size_t i = 0; i < n; ++i) {
        s << types[i];
        for (size_t j = 0; j < n; ++j) s << ',' << m[i][j];
        s << '\n';
      }
      std::ofstream out = OpenOut(csv_path);
      out << s.str();
      Finish(out, csv_path);
    }
    if (pgm_path != nullptr) {
      if (cell_pixels < 1) throw std::invalid_argument("cell_pixels < 1");
      const size_t side = n * static_cast<size_t>(cell_pixels);
      std::string pixels(side * side, '\0');
      for (size_t y = 0; y < side; ++y) {
        for (size_t x = 0; x < side; ++x) {
          const double v = std::clamp(m[y / cell_pixels][x / cell_pixels],
                                       0.0, 1.0);
          pixels[y * side + x] =
              static_cast<char>(static_cast<unsigned char>(std::lround(v * 255)));
        }
      }
      std::ofstream out = OpenOut(pgm_path);
      out << "P5\n" << side << ' ' << side << "\n255\n" << pixels;
      Finish(out, pgm_path);
    }
  });
}

emlab_status emlab_find_pure_ess(const double* matrix, size_t n,
                                 double tolerance, int* is_ess, int* strict,
                                 int* tie_breaker) {
  return Guard([&] {
    Require(matrix, "matrix");
    Require(is_ess, "is_ess");
    const el::EssReport r = el::FindPureEss(ToMatrix(matrix, n), {}, tolerance);
    for (size_t i = 0; i < n; ++i) {
      is_ess[i] = r.entries[i].is_ess ? 1 : 0;
      if (strict) strict[i] = r.entries[i].strict ? 1 : 0;
      if (tie_breaker) tie_breaker[i] = r.entries[i].tie_breaker ? 1 : 0;
    }
  });
}

emlab_status emlab_ess_analyze(const emlab_payoff* payoff, int resamples,
                               double level, uint64_t seed,
                               const char* json_path, int* is_ess,
                               int* significant) {
  return Guard([&] {
    Require(payoff, "payoff");
    const el::PayoffTable& t = payoff->value;
    el::EssReport report = el::FindPureEss(el::Symmetrize(t), t.types());
    const auto cmps = el::SignificanceByColumn(t, resamples, level, seed);
    el::AttachSignificance(report, cmps);
    if (json_path != nullptr) {
      std::ofstream out = OpenOut(json_path);
      el::WriteEssJson(report, cmps, t.types(), out);
      Finish(out, json_path);
    }
    for (size_t i = 0; i < report.entries.size(); ++i) {
      if (is_ess) is_ess[i] = report.entries[i].is_ess ? 1 : 0;
      if (significant) significant[i] = report.entries[i].significant ? 1 : 0;
    }
  });
}

void emlab_payoff_free(emlab_payoff* payoff) { delete payoff; }

}  // extern "C"
