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

#include "cli_support.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace emergelab_cli {

void Check(emlab_status status, const std::string& what) {
  if (status == EMLAB_OK) return;
  const std::string msg = what + ": " + emlab_last_error();
  if (status == EMLAB_ERR_CONFIG || status == EMLAB_ERR_INVALID_ARGUMENT) {
    throw UsageError(msg);
  }
  throw RunError(msg);
}

namespace {

const std::set<std::string> kTopLevelKeys = {
    "include", "preset",   "seed",        "runs",      "workers",
    "dataset", "pretrain", "bias_types",  "bias_specs", "checkpoints",
    "game",    "train",    "pairing",     "analysis",  "evolve",
    "grid_search", "sweep"};

const char* kScenarioKey = "scenario";

Json LoadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
}

bool IsPresetName(const std::string& s) { return s == "paper" || s == "desk"; }

// Expands includes depth-first. Returns the merged user tree without
// presets and records the last preset name seen.
Json Expand(const Json& tree, const fs::path& base_dir,
            std::optional<std::string>& preset, int depth) {
  if (depth > 16) throw UsageError("config includes nest too deeply");
  if (!tree.is_object()) throw UsageError("config root must be an object");
  Json merged = Json::object();
  if (tree.contains("include")) {
    Json inc = tree.at("include");
    if (inc.is_string()) inc = Json::array({inc});
    if (!inc.is_array()) {
      throw UsageError("include must be a string or a list of strings");
    }
    for (const auto& item : inc) {
      if (!item.is_string()) throw UsageError("include entries must be strings");
      const std::string name = item.get<std::string>();
      if (IsPresetName(name)) {
        preset = name;
        continue;
      }
      const fs::path p = base_dir / name;
      DeepMerge(merged, Expand(LoadJsonFile(p), p.parent_path(), preset,
                               depth + 1));
    }
  }
  Json body = tree;
  body.erase("include");
  if (body.contains("preset")) {
    if (!body.at("preset").is_string() ||
        !IsPresetName(body.at("preset").get<std::string>())) {
      throw UsageError("preset must be \"paper\" or \"desk\"");
    }
    preset = body.at("preset").get<std::string>();
  }
  DeepMerge(merged, body);
  return merged;
}

}  // namespace

void DeepMerge(Json& base, const Json& patch) {
  if (!base.is_object() || !patch.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() &&
        it.value().is_object()) {
      DeepMerge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

Json PresetTree(const std::string& preset, int scenario, bool population) {
  if (!IsPresetName(preset)) {
    throw UsageError("unknown preset '" + preset + "'");
  }
  const bool paper = preset == "paper";
  emlab_pretrain_config pc;
  Check(emlab_pretrain_config_preset(preset.c_str(), &pc), "pretrain preset");
  emlab_train_config tc;
  Check(emlab_train_config_preset(preset.c_str(), scenario, population ? 1 : 0,
                                  &tc),
        "train preset");
  emlab_grid_config gc;
  Check(emlab_grid_config_default(preset.c_str(), &gc), "grid preset");
  Json weights = Json::array();
  for (int i = 1; i <= 19; ++i) weights.push_back(std::round(5.0 * i) / 100.0);
  return Json{
      {"preset", preset},
      {"seed", 0},
      {"runs", paper ? 20 : 5},
      {"workers", 1},
      {"dataset",
       {{"per_class", paper ? 1500 : 40},
        {"height", paper ? 64 : 16},
        {"width", paper ? 64 : 16},
        {"path", ""}}},
      {"pretrain",
       {{"optimizer", pc.optimizer == EMLAB_OPT_ADAM ? "adam" : "sgd"},
        {"learning_rate", pc.learning_rate},
        {"batch_size", pc.batch_size},
        {"epochs", pc.epochs},
        {"cosine_decay", pc.cosine_decay != 0},
        {"rsm_per_class", 50}}},
      {"bias_types", Json::array({"default"})},
      {"bias_specs", Json::object()},
      {"checkpoints", Json::object()},
      {"game",
       {{"vocab_size", 4},
        {"message_length", 3},
        {"distractors", 2},
        {"variant", "all"}}},
      {"train",
       {{kScenarioKey, emlab_scenario_name(tc.scenario)},
        {"learning_rate", tc.learning_rate},
        {"batch_size", tc.batch_size},
        {"epochs", tc.epochs},
        {"entropy_coef", tc.entropy_coef},
        {"baseline", tc.baseline != 0},
        {"eval_rounds", tc.eval_rounds}}},
      {"pairing",
       {{"mode", "pair"},
        {"sender", "default"},
        {"receiver", "default"},
        {"senders", Json::array({"default", "default"})},
        {"receivers", Json::array({"default", "default"})},
        {"agents", Json::array({"default", "default"})}}},
      {"analysis", {{"bootstrap_resamples", 10000}, {"level", 0.95}}},
      {"evolve",
       {{"types", Json::array({"default", "scale", "all"})},
        {"runs_per_pair", paper ? 20 : 5},
        {"variant", "all"},
        {"bootstrap_resamples", 10000},
        {"level", 0.95}}},
      {"grid_search",
       {{"pairs", Json::array({"color-scale", "color-shape", "scale-shape"})},
        {"sigmas", Json::array({0.6, 0.7, 0.8})},
        {"weights", weights},
        {"accuracy_floor", gc.accuracy_floor},
        {"budget", 0}}},
      {"sweep", {{"command", "train"}, {"axes", Json::object()}}},
  };
}

Json ResolveConfig(const std::optional<std::string>& path,
                   const std::optional<std::string>& preset_override) {
  Json user = Json::object();
  fs::path base_dir = fs::current_path();
  if (path) {
    user = LoadJsonFile(*path);
    base_dir = fs::path(*path).parent_path();
    // A manifest carries the resolved config under "config".
    if (user.is_object() && user.contains("tool") &&
        user.value("tool", "") == "emergelab" && user.contains("config")) {
      user = user.at("config");
    }
  }
  std::optional<std::string> preset;
  Json merged = Expand(user, base_dir, preset, 0);
  if (preset_override) preset = *preset_override;
  const std::string preset_name = preset.value_or("desk");
  for (auto it = merged.begin(); it != merged.end(); ++it) {
    if (!kTopLevelKeys.count(it.key())) {
      throw UsageError("unknown config key '" + it.key() + "'");
    }
  }
  int scenario = EMLAB_FROZEN_VISION;
  if (merged.contains("train") && merged["train"].contains(kScenarioKey)) {
    const Json& s = merged["train"][kScenarioKey];
    if (!s.is_string()) throw UsageError("train.scenario must be a string");
    Check(emlab_scenario_parse(s.get<std::string>().c_str(), &scenario),
          "train.scenario");
  }
  bool population = false;
  if (merged.contains("pairing") && merged["pairing"].contains("mode")) {
    const std::string mode = merged["pairing"].value("mode", "pair");
    population = mode == "population" || mode == "flexible";
  }
  Json cfg = PresetTree(preset_name, scenario, population);
  DeepMerge(cfg, merged);
  cfg["preset"] = preset_name;
  return cfg;
}

const Json& At(const Json& tree, const std::string& dotted) {
  const Json* node = &tree;
  std::stringstream ss(dotted);
  std::string key;
  while (std::getline(ss, key, '.')) {
    if (!node->is_object() || !node->contains(key)) {
      throw UsageError("missing config key '" + dotted + "'");
    }
    node = &node->at(key);
  }
  return *node;
}

void SetAt(Json& tree, const std::string& dotted, const Json& value) {
  Json* node = &tree;
  std::stringstream ss(dotted);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  if (keys.empty()) throw UsageError("empty config key");
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i]) || !(*node)[keys[i]].is_object()) {
      throw UsageError("config key '" + dotted + "' does not exist");
    }
    node = &(*node)[keys[i]];
  }
  if (!node->contains(keys.back())) {
    throw UsageError("config key '" + dotted + "' does not exist");
  }
  (*node)[keys.back()] = value;
}

int GetInt(const Json& tree, const std::string& dotted) {
  const Json& v = At(tree, dotted);
  if (!v.is_number_integer()) {
    throw UsageError("config key '" + dotted + "' must be an integer");
  }
  return v.get<int>();
}

double GetDouble(const Json& tree, const std::string& dotted) {
  const Json& v = At(tree, dotted);
  if (!v.is_number()) {
    throw UsageError("config key '" + dotted + "' must be a number");
  }
  return v.get<double>();
}

bool GetBool(const Json& tree, const std::string& dotted) {
  const Json& v = At(tree, dotted);
  if (!v.is_boolean()) {
    throw UsageError("config key '" + dotted + "' must be true or false");
  }
  return v.get<bool>();
}

std::string GetString(const Json& tree, const std::string& dotted) {
  const Json& v = At(tree, dotted);
  if (!v.is_string()) {
    throw UsageError("config key '" + dotted + "' must be a string");
  }
  return v.get<std::string>();
}

std::uint64_t GetSeed(const Json& tree) {
  const Json& v = At(tree, "seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw UsageError("seed must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

emlab_pretrain_config PretrainConfigOf(const Json& cfg) {
  emlab_pretrain_config c{};
  const std::string opt = GetString(cfg, "pretrain.optimizer");
  if (opt == "sgd") {
    c.optimizer = EMLAB_OPT_SGD;
  } else if (opt == "adam") {
    c.optimizer = EMLAB_OPT_ADAM;
  } else {
    throw UsageError("pretrain.optimizer must be \"sgd\" or \"adam\"");
  }
  c.learning_rate = GetDouble(cfg, "pretrain.learning_rate");
  c.batch_size = GetInt(cfg, "pretrain.batch_size");
  c.epochs = GetInt(cfg, "pretrain.epochs");
  c.cosine_decay = GetBool(cfg, "pretrain.cosine_decay") ? 1 : 0;
  return c;
}

emlab_game_config GameConfigOf(const Json& cfg, const std::string& variant) {
  emlab_game_config g;
  Check(emlab_game_config_variant(variant.c_str(), &g), "game variant");
  g.vocab_size = GetInt(cfg, "game.vocab_size");
  g.message_length = GetInt(cfg, "game.message_length");
  g.distractors = GetInt(cfg, "game.distractors");
  Check(emlab_game_config_validate(&g), "game config");
  return g;
}

emlab_train_config TrainConfigOf(const Json& cfg) {
  emlab_train_config t{};
  Check(emlab_scenario_parse(GetString(cfg, "train.scenario").c_str(),
                             &t.scenario),
        "train.scenario");
  t.learning_rate = GetDouble(cfg, "train.learning_rate");
  t.batch_size = GetInt(cfg, "train.batch_size");
  t.epochs = GetInt(cfg, "train.epochs");
  t.entropy_coef = GetDouble(cfg, "train.entropy_coef");
  t.baseline = GetBool(cfg, "train.baseline") ? 1 : 0;
  t.eval_rounds = GetInt(cfg, "train.eval_rounds");
  return t;
}

namespace {

int AttributeIndex(const std::string& s) {
  if (s == "color") return EMLAB_COLOR;
  if (s == "scale") return EMLAB_SCALE;
  if (s == "shape") return EMLAB_SHAPE;
  throw UsageError("unknown attribute '" + s + "'");
}

const char* AttributeLabel(int a) {
  switch (a) {
    case EMLAB_COLOR: return "color";
    case EMLAB_SCALE: return "scale";
    default: return "shape";
  }
}

const char* kConditionNames[] = {"default", "color", "scale",
                                 "shape",   "all",   "mixed"};

}  // namespace

emlab_spec SpecOf(const Json& cfg, const std::string& name) {
  emlab_spec spec{};
  const Json& specs = At(cfg, "bias_specs");
  if (specs.is_object() && specs.contains(name)) {
    const Json& s = specs.at(name);
    if (!s.is_object()) throw UsageError("bias_specs." + name + " must be an object");
    const std::string cond = s.value("condition", "");
    int c = -1;
    for (int i = 0; i < 6; ++i) {
      if (cond == kConditionNames[i]) c = i;
    }
    if (c < 0) throw UsageError("bias_specs." + name + ": unknown condition");
    spec.condition = c;
    if (!s.contains("sigma") || !s.at("sigma").is_number()) {
      throw UsageError("bias_specs." + name + ": sigma must be a number");
    }
    spec.sigma = s.at("sigma").get<double>();
    if (c == EMLAB_COND_MIXED) {
      const Json& pair = s.value("pair", Json::array());
      const Json& w = s.value("weights", Json::array());
      if (pair.size() != 2 || w.size() != 2 || !pair[0].is_string() ||
          !pair[1].is_string() || !w[0].is_number() || !w[1].is_number()) {
        throw UsageError("bias_specs." + name +
                         ": mixed needs pair [a, b] and weights [w1, w2]");
      }
      spec.pair[0] = AttributeIndex(pair[0].get<std::string>());
      spec.pair[1] = AttributeIndex(pair[1].get<std::string>());
      spec.weights[0] = w[0].get<double>();
      spec.weights[1] = w[1].get<double>();
    }
    Check(emlab_spec_validate(&spec), "bias_specs." + name);
    return spec;
  }
  Check(emlab_spec_named(name.c_str(), &spec), "bias type '" + name + "'");
  return spec;
}

std::string SpecName(const emlab_spec& spec) {
  char buf[64];
  Check(emlab_spec_name(&spec, buf, sizeof buf), "spec name");
  return buf;
}

Json SpecJson(const emlab_spec& spec) {
  Json j{{"condition", kConditionNames[spec.condition]}, {"sigma", spec.sigma}};
  if (spec.condition == EMLAB_COND_MIXED) {
    j["pair"] = {AttributeLabel(spec.pair[0]), AttributeLabel(spec.pair[1])};
    j["weights"] = {spec.weights[0], spec.weights[1]};
  }
  return j;
}

std::uint64_t NameKey(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string GitBlobSha1(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw RunError("cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw RunError("cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw RunError("SHA-1 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string Num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw RunError("cannot write " + path.string());
}

void WriteManifest(const fs::path& dir, const std::string& command,
                   const Json& cfg, double wall_seconds) {
  Json outputs = Json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    outputs[fs::relative(f, dir).generic_string()] = GitBlobSha1(f);
  }
  Json m{{"tool", "emergelab"},
         {"version", emlab_version()},
         {"command", command},
         {"seed", cfg.at("seed")},
         {"config", cfg},
         {"outputs", outputs},
         {"wall_clock_seconds", wall_seconds}};
  WriteText(dir / "manifest.json", m.dump(2) + "\n");
}

void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)>& task) {
  const std::size_t w = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        {
          std::lock_guard<std::mutex> lock(mu);
          if (error) return;
        }
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace emergelab_cli
