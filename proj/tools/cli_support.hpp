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

// Configuration, manifests and output helpers for the emergelab tool.
//
// Configs are JSON objects. "include" names presets ("paper", "desk") or
// other config files (relative to the including file); included trees are
// merged first and the including file's keys win. A manifest written by the
// tool is itself accepted as a config.

#ifndef EMERGELAB_TOOLS_CLI_SUPPORT_HPP_
#define EMERGELAB_TOOLS_CLI_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emergelab/emergelab.h"
#include "json.hpp"

namespace emergelab_cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Bad flags or config: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while running: exit code 1.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws UsageError for config-type statuses and RunError otherwise.
void Check(emlab_status status, const std::string& what);

// RAII owner for a C handle.
template <typename T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  explicit Handle(T* p) : p_(p) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p_(o.p_) { o.p_ = nullptr; }
  Handle& operator=(Handle&& o) noexcept {
    if (this != &o) {
      Free(p_);
      p_ = o.p_;
      o.p_ = nullptr;
    }
    return *this;
  }
  ~Handle() { Free(p_); }
  T* get() const { return p_; }
  T** out() {
    Free(p_);
    p_ = nullptr;
    return &p_;
  }

 private:
  T* p_ = nullptr;
};

using Dataset = Handle<emlab_dataset, emlab_dataset_free>;
using Vision = Handle<emlab_vision, emlab_vision_free>;
using RsmH = Handle<emlab_rsm, emlab_rsm_free>;
using Agent = Handle<emlab_agent, emlab_agent_free>;
using TrainLogH = Handle<emlab_train_log, emlab_train_log_free>;
using MessageLogH = Handle<emlab_message_log, emlab_message_log_free>;
using Payoff = Handle<emlab_payoff, emlab_payoff_free>;

// Preset tree for the given preset name. Train defaults depend on the
// scenario and on whether the pairing is a population or flexible run.
Json PresetTree(const std::string& preset, int scenario, bool population);

// Loads a config file (or manifest) and resolves includes and presets.
// preset_override replaces any preset named by includes.
Json ResolveConfig(const std::optional<std::string>& path,
                   const std::optional<std::string>& preset_override);

// Deep merge: objects merge recursively, everything else is replaced.
void DeepMerge(Json& base, const Json& patch);

// Reads "a.b.c" from a tree; throws UsageError if missing.
const Json& At(const Json& tree, const std::string& dotted);
void SetAt(Json& tree, const std::string& dotted, const Json& value);

// Typed getters with config-error reporting.
int GetInt(const Json& tree, const std::string& dotted);
double GetDouble(const Json& tree, const std::string& dotted);
bool GetBool(const Json& tree, const std::string& dotted);
std::string GetString(const Json& tree, const std::string& dotted);
std::uint64_t GetSeed(const Json& tree);

emlab_pretrain_config PretrainConfigOf(const Json& cfg);
emlab_game_config GameConfigOf(const Json& cfg, const std::string& variant);
emlab_train_config TrainConfigOf(const Json& cfg);

// A named bias type: its spec comes from cfg.bias_specs[name] when present,
// otherwise from the built-in names.
emlab_spec SpecOf(const Json& cfg, const std::string& name);
std::string SpecName(const emlab_spec& spec);
Json SpecJson(const emlab_spec& spec);

// Stable 64-bit FNV-1a of a string, used to key per-type seeds.
std::uint64_t NameKey(const std::string& s);

// Git-style blob SHA-1 of a file's contents.
std::string GitBlobSha1(const fs::path& file);

// Formats a double with 17 significant digits; NaN as an empty field.
std::string Num(double v);

// Writes text to a file, creating parent directories.
void WriteText(const fs::path& path, const std::string& text);

// Output manifest: resolved config, seed, command, tool version, output
// hashes and wall-clock time. Hashes cover every regular file below dir
// except the manifest itself.
void WriteManifest(const fs::path& dir, const std::string& command,
                   const Json& cfg, double wall_seconds);

// Runs tasks [0, n) on up to `workers` threads. The first exception is
// rethrown after all workers stop.
void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)>& task);

}  // namespace emergelab_cli

#endif  // EMERGELAB_TOOLS_CLI_SUPPORT_HPP_
