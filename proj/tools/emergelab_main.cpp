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

// emergelab: dataset builds, pretraining, game training, analysis, sweeps,
// tournaments and reports. Exit codes: 0 success, 1 runtime failure,
// 2 usage or config error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "emergelab/emergelab.h"

namespace emergelab_cli {
namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::string> preset;
};

struct Context {
  Json cfg;
  fs::path out;
  int workers = 1;
  std::uint64_t seed = 0;
};

std::mutex g_print_mu;

void Say(const std::string& s) {
  std::lock_guard<std::mutex> lock(g_print_mu);
  std::cout << s << std::endl;
}

fs::path DefaultRoot() {
  if (const char* env = std::getenv("EMERGELAB_OUT"); env && *env) {
    return fs::path(env);
  }
  return fs::path("emergelab_out");
}

Context MakeContext(const Options& o, const std::string& command) {
  Context c;
  c.cfg = ResolveConfig(o.config, o.preset);
  if (o.seed) c.cfg["seed"] = *o.seed;
  if (o.workers) c.cfg["workers"] = *o.workers;
  c.seed = GetSeed(c.cfg);
  c.workers = GetInt(c.cfg, "workers");
  if (c.workers < 1) throw UsageError("workers must be >= 1");
  c.out = o.out ? fs::path(*o.out) : DefaultRoot() / command;
  return c;
}

// Derived context for a sub-run (sweep cells) sharing flags.
Context SubContext(Json cfg, fs::path out) {
  Context c;
  c.cfg = std::move(cfg);
  c.seed = GetSeed(c.cfg);
  c.workers = GetInt(c.cfg, "workers");
  c.out = std::move(out);
  return c;
}

std::vector<std::string> StringList(const Json& cfg, const std::string& key) {
  const Json& v = At(cfg, key);
  if (!v.is_array()) throw UsageError(key + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw UsageError(key + " must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Dataset LoadDataset(const Context& ctx) {
  Dataset ds;
  const std::string path = GetString(ctx.cfg, "dataset.path");
  if (!path.empty()) {
    Check(emlab_dataset_load(path.c_str(), ds.out()), "dataset.path");
  } else {
    Check(emlab_dataset_build(GetInt(ctx.cfg, "dataset.per_class"),
                              GetInt(ctx.cfg, "dataset.height"),
                              GetInt(ctx.cfg, "dataset.width"), ctx.seed,
                              ds.out()),
          "dataset");
  }
  return ds;
}

std::pair<int, int> DatasetSize(const Dataset& ds) {
  int h = 0, w = 0;
  Check(emlab_dataset_info(ds.get(), nullptr, nullptr, nullptr, &h, &w),
        "dataset info");
  return {h, w};
}

struct TypeVision {
  std::string name;
  emlab_spec spec{};
  Vision vision;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool from_checkpoint = false;
};

std::uint64_t TypeSeed(const Context& ctx, const std::string& name) {
  return emlab_derive_seed(ctx.seed, NameKey("pretrain"), NameKey(name), 0);
}

void WriteVisionSidecar(const fs::path& path, const TypeVision& tv,
                        const Dataset& ds) {
  const auto [h, w] = DatasetSize(ds);
  Json j{{"type", tv.name},
         {"spec", SpecJson(tv.spec)},
         {"height", h},
         {"width", w},
         {"train_accuracy", tv.train_accuracy},
         {"test_accuracy", tv.test_accuracy}};
  WriteText(path, j.dump(2) + "\n");
}

// Loads configured checkpoints or pretrains each type, writing checkpoints
// below ctx.out/pretrain/<type>/.
std::map<std::string, TypeVision> AcquireVisions(
    const Context& ctx, const Dataset& ds, std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const auto [h, w] = DatasetSize(ds);
  const emlab_pretrain_config pc = PretrainConfigOf(ctx.cfg);
  const Json& ckpts = At(ctx.cfg, "checkpoints");
  std::vector<TypeVision> out(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out[i].name = names[i];
    out[i].spec = SpecOf(ctx.cfg, names[i]);
  }
  ParallelFor(names.size(), ctx.workers, [&](std::size_t i) {
    TypeVision& tv = out[i];
    if (ckpts.is_object() && ckpts.contains(tv.name)) {
      const std::string path = ckpts.at(tv.name).get<std::string>();
      Check(emlab_vision_load(path.c_str(), h, w, tv.vision.out()),
            "checkpoint " + path);
      Check(emlab_vision_accuracy(tv.vision.get(), ds.get(), EMLAB_SPLIT_TRAIN,
                                  &tv.train_accuracy),
            "accuracy");
      Check(emlab_vision_accuracy(tv.vision.get(), ds.get(), EMLAB_SPLIT_TEST,
                                  &tv.test_accuracy),
            "accuracy");
      tv.from_checkpoint = true;
    } else {
      const std::uint64_t seed = TypeSeed(ctx, tv.name);
      Check(emlab_vision_create(h, w, seed, tv.vision.out()), "vision");
      Say("pretraining " + tv.name + " ...");
      Check(emlab_vision_pretrain(tv.vision.get(), ds.get(), &tv.spec, &pc,
                                  emlab_derive_seed(seed, 1, 0, 0),
                                  &tv.train_accuracy, &tv.test_accuracy),
            "pretraining " + tv.name);
    }
    const fs::path dir = ctx.out / "pretrain" / tv.name;
    fs::create_directories(dir);
    Check(emlab_vision_save(tv.vision.get(), (dir / "vision.bin").c_str()),
          "saving checkpoint");
    WriteVisionSidecar(dir / "vision.json", tv, ds);
  });
  std::map<std::string, TypeVision> result;
  for (auto& tv : out) result.emplace(tv.name, std::move(tv));
  return result;
}

emlab_bias_profile Profile(emlab_vision* vision, const Dataset& ds,
                           const Context& ctx, RsmH* keep = nullptr) {
  RsmH rsm;
  Check(emlab_rsm_from_vision(vision, ds.get(),
                              GetInt(ctx.cfg, "pretrain.rsm_per_class"),
                              emlab_derive_seed(ctx.seed, NameKey("rsm"), 0, 0),
                              rsm.out()),
        "rsm");
  emlab_bias_profile p;
  Check(emlab_rsm_profile(rsm.get(), &p), "rsa");
  if (keep) *keep = std::move(rsm);
  return p;
}

std::string ProfileFields(const emlab_bias_profile& p) {
  return Num(p.overall) + "," + Num(p.color) + "," + Num(p.scale) + "," +
         Num(p.shape);
}

emlab_ci Mean(const Context& ctx, const std::vector<double>& x,
              const std::string& key) {
  emlab_ci ci;
  Check(emlab_bootstrap_mean(x.data(), x.size(),
                             GetInt(ctx.cfg, "analysis.bootstrap_resamples"),
                             GetDouble(ctx.cfg, "analysis.level"),
                             emlab_derive_seed(ctx.seed, NameKey(key), 0, 0),
                             &ci),
        "bootstrap " + key);
  return ci;
}

emlab_ci Diff(const Context& ctx, const std::vector<double>& a,
              const std::vector<double>& b, const std::string& key) {
  emlab_ci ci;
  Check(emlab_bootstrap_diff(a.data(), a.size(), b.data(), b.size(),
                             GetInt(ctx.cfg, "analysis.bootstrap_resamples"),
                             GetDouble(ctx.cfg, "analysis.level"),
                             emlab_derive_seed(ctx.seed, NameKey(key), 0, 0),
                             &ci),
        "bootstrap " + key);
  return ci;
}

const char* kCiHeader = "metric,estimate,lower,upper,level,resamples,n\n";

std::string CiRow(const std::string& metric, const emlab_ci& ci,
                  std::size_t n) {
  return metric + "," + Num(ci.estimate) + "," + Num(ci.lower) + "," +
         Num(ci.upper) + "," + Num(ci.level) + "," +
         std::to_string(ci.resamples) + "," + std::to_string(n) + "\n";
}

// ---- dataset -------------------------------------------------------------

struct DatasetFlags {
  std::optional<int> per_class;
  std::optional<int> size;
};

void CmdDataset(const Options& o, const DatasetFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "dataset");
  if (f.per_class) ctx.cfg["dataset"]["per_class"] = *f.per_class;
  if (f.size) {
    ctx.cfg["dataset"]["height"] = *f.size;
    ctx.cfg["dataset"]["width"] = *f.size;
  }
  ctx.cfg["dataset"]["path"] = "";
  const fs::path file =
      o.out ? fs::path(*o.out) : DefaultRoot() / "dataset.emrg";
  Dataset ds = LoadDataset(ctx);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  Check(emlab_dataset_save(ds.get(), file.c_str()), "writing dataset");
  size_t n = 0, tr = 0, te = 0;
  Check(emlab_dataset_info(ds.get(), &n, &tr, &te, nullptr, nullptr), "info");
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  Json m{{"tool", "emergelab"},
         {"version", emlab_version()},
         {"command", "dataset"},
         {"seed", ctx.cfg.at("seed")},
         {"config", ctx.cfg},
         {"outputs", {{file.filename().string(), GitBlobSha1(file)}}},
         {"wall_clock_seconds", secs}};
  WriteText(file.string() + ".manifest.json", m.dump(2) + "\n");
  Say("wrote " + file.string() + ": " + std::to_string(n) + " items (" +
      std::to_string(tr) + " train, " + std::to_string(te) + " test)");
}

// ---- pretrain ------------------------------------------------------------

struct PretrainFlags {
  std::vector<std::string> types;
  bool grid_search = false;
};

void RunGridSearch(const Context& ctx, const Dataset& ds) {
  const emlab_pretrain_config pc = PretrainConfigOf(ctx.cfg);
  std::vector<double> sigmas, weights;
  for (const auto& v : At(ctx.cfg, "grid_search.sigmas")) {
    sigmas.push_back(v.get<double>());
  }
  for (const auto& v : At(ctx.cfg, "grid_search.weights")) {
    weights.push_back(v.get<double>());
  }
  Json selected = Json::object();
  bool all_found = true;
  for (const std::string& pair : StringList(ctx.cfg, "grid_search.pairs")) {
    emlab_spec probe;
    Check(emlab_spec_named(pair.c_str(), &probe), "grid_search.pairs");
    if (probe.condition != EMLAB_COND_MIXED) {
      throw UsageError("grid_search.pairs entries must be mixed types");
    }
    emlab_grid_config gc{};
    gc.sigmas = sigmas.data();
    gc.n_sigmas = sigmas.size();
    gc.first_weights = weights.data();
    gc.n_weights = weights.size();
    gc.pretrain = pc;
    gc.accuracy_floor = GetDouble(ctx.cfg, "grid_search.accuracy_floor");
    gc.rsm_per_class = GetInt(ctx.cfg, "pretrain.rsm_per_class");
    gc.budget = GetInt(ctx.cfg, "grid_search.budget");
    gc.workers = ctx.workers;
    emlab_spec best{};
    double acc = 0.0;
    const fs::path csv = ctx.out / ("grid_" + pair + ".csv");
    fs::create_directories(ctx.out);
    Say("grid search " + pair + " ...");
    const emlab_status s = emlab_grid_search(
        ds.get(), probe.pair[0], probe.pair[1], &gc,
        emlab_derive_seed(ctx.seed, NameKey("grid"), NameKey(pair), 0),
        csv.c_str(), &best, &acc);
    if (s == EMLAB_ERR_NO_CANDIDATE) {
      Say("grid search " + pair + ": " + emlab_last_error());
      selected[pair] = nullptr;
      all_found = false;
      continue;
    }
    Check(s, "grid search " + pair);
    Json j = SpecJson(best);
    j["test_accuracy"] = acc;
    selected[pair] = j;
    Say(pair + ": sigma " + Num(best.sigma) + ", weights [" +
        Num(best.weights[0]) + ", " + Num(best.weights[1]) + "]");
  }
  WriteText(ctx.out / "grid_selected.json", selected.dump(2) + "\n");
  if (!all_found) {
    throw RunError("grid search: some pairs have no candidate above the "
                   "accuracy floor");
  }
}

void PretrainInto(const Context& ctx) {
  Dataset ds = LoadDataset(ctx);
  auto visions = AcquireVisions(ctx, ds, StringList(ctx.cfg, "bias_types"));
  std::ostringstream report;
  report << "type,sigma,train_accuracy,test_accuracy,rsa_overall,"
            "rsa_color,rsa_scale,rsa_shape\n";
  for (const std::string& name : StringList(ctx.cfg, "bias_types")) {
    TypeVision& tv = visions.at(name);
    RsmH rsm;
    const emlab_bias_profile p = Profile(tv.vision.get(), ds, ctx, &rsm);
    const fs::path dir = ctx.out / "pretrain" / name;
    Check(emlab_rsm_write_csv(rsm.get(), (dir / "rsm.csv").c_str()), "rsm csv");
    Check(emlab_rsm_write_pgm(rsm.get(), (dir / "rsm.pgm").c_str(), 4),
          "rsm pgm");
    report << name << ',' << Num(tv.spec.sigma) << ','
           << Num(tv.train_accuracy) << ',' << Num(tv.test_accuracy) << ','
           << ProfileFields(p) << '\n';
    Say(name + ": test accuracy " + Num(tv.test_accuracy) + ", RSA " +
        "overall/color/scale/shape " + ProfileFields(p));
  }
  WriteText(ctx.out / "bias_report.csv", report.str());
}

void CmdPretrain(const Options& o, const PretrainFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "pretrain");
  if (!f.types.empty()) ctx.cfg["bias_types"] = f.types;
  fs::create_directories(ctx.out);
  if (f.grid_search) {
    RunGridSearch(ctx, LoadDataset(ctx));
  } else {
    PretrainInto(ctx);
  }
  WriteManifest(ctx.out, f.grid_search ? "pretrain --grid-search" : "pretrain",
                ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
}

// ---- train ---------------------------------------------------------------

struct RunResult {
  double test_reward = 0.0;
  double swapped_reward = NAN;
  emlab_log_info info{};
  // Pair mode only.
  bool has_vision = false;
  emlab_bias_profile sender_post{}, receiver_post{};
  double sender_acc_post = NAN, receiver_acc_post = NAN;
  double alignment_post = NAN;
};

void SaveAgent(const fs::path& dir, const std::string& stem,
               const emlab_agent* agent, const char* role,
               const std::string& type, const Context& ctx,
               const Dataset& ds) {
  Check(emlab_agent_save(agent, (dir / (stem + ".bin")).c_str()),
        "saving agent");
  const auto [h, w] = DatasetSize(ds);
  Json j{{"role", role},
         {"type", type},
         {"height", h},
         {"width", w},
         {"game", At(ctx.cfg, "game")}};
  WriteText(dir / (stem + ".json"), j.dump(2) + "\n");
}

double Alignment(emlab_vision* a, emlab_vision* b, const Dataset& ds,
                 const Context& ctx) {
  RsmH ra, rb;
  Profile(a, ds, ctx, &ra);
  Profile(b, ds, ctx, &rb);
  double r = NAN;
  const emlab_status s = emlab_rsa(ra.get(), rb.get(), &r);
  if (s != EMLAB_ERR_UNDEFINED) Check(s, "alignment");
  return r;
}

void TrainInto(const Context& ctx) {
  Dataset ds = LoadDataset(ctx);
  const std::string mode = GetString(ctx.cfg, "pairing.mode");
  std::vector<std::string> needed;
  std::vector<std::string> senders, receivers;
  if (mode == "pair") {
    senders = {GetString(ctx.cfg, "pairing.sender")};
    receivers = {GetString(ctx.cfg, "pairing.receiver")};
  } else if (mode == "population") {
    senders = StringList(ctx.cfg, "pairing.senders");
    receivers = StringList(ctx.cfg, "pairing.receivers");
  } else if (mode == "flexible") {
    senders = StringList(ctx.cfg, "pairing.agents");
    if (senders.size() != 2) {
      throw UsageError("pairing.agents must name exactly two types");
    }
  } else {
    throw UsageError("pairing.mode must be pair, population or flexible");
  }
  if (senders.empty() || (mode != "flexible" && receivers.empty())) {
    throw UsageError("pairing needs at least one sender and one receiver");
  }
  needed = senders;
  needed.insert(needed.end(), receivers.begin(), receivers.end());
  const emlab_game_config game =
      GameConfigOf(ctx.cfg, GetString(ctx.cfg, "game.variant"));
  const emlab_train_config train = TrainConfigOf(ctx.cfg);
  const int runs = GetInt(ctx.cfg, "runs");
  if (runs < 1) throw UsageError("runs must be >= 1");
  auto visions = AcquireVisions(ctx, ds, needed);

  // Pretrained reference metrics for pair mode.
  emlab_bias_profile sender_pre{}, receiver_pre{};
  double alignment_pre = NAN;
  if (mode == "pair") {
    sender_pre = Profile(visions.at(senders[0]).vision.get(), ds, ctx);
    receiver_pre = Profile(visions.at(receivers[0]).vision.get(), ds, ctx);
    alignment_pre = Alignment(visions.at(senders[0]).vision.get(),
                              visions.at(receivers[0]).vision.get(), ds, ctx);
  }

  std::vector<RunResult> results(runs);
  ParallelFor(static_cast<std::size_t>(runs), ctx.workers, [&](std::size_t r) {
    const std::uint64_t run_seed =
        emlab_derive_seed(ctx.seed, NameKey("run"), r, 0);
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", r);
    const fs::path dir = ctx.out / name;
    fs::create_directories(dir);
    auto make = [&](int role, const std::string& type, std::uint64_t k) {
      Agent a;
      const TypeVision& tv = visions.at(type);
      Check(emlab_agent_create(role, tv.vision.get(), &tv.spec,
                               game.vocab_size,
                               emlab_derive_seed(run_seed, k, 0, 0), a.out()),
            "agent");
      return a;
    };
    RunResult& res = results[r];
    TrainLogH log;
    Say(std::string("training ") + name + " ...");
    if (mode == "pair") {
      Agent s = make(EMLAB_SENDER, senders[0], 1);
      Agent rc = make(EMLAB_RECEIVER, receivers[0], 2);
      Check(emlab_run_scenario(s.get(), rc.get(), ds.get(), &game, &train,
                               run_seed, log.out()),
            "training");
      SaveAgent(dir, "sender", s.get(), "sender", senders[0], ctx, ds);
      SaveAgent(dir, "receiver", rc.get(), "receiver", receivers[0], ctx, ds);
      Vision sv, rv;
      Check(emlab_agent_vision(s.get(), sv.out()), "vision");
      Check(emlab_agent_vision(rc.get(), rv.out()), "vision");
      res.has_vision = true;
      res.sender_post = Profile(sv.get(), ds, ctx);
      res.receiver_post = Profile(rv.get(), ds, ctx);
      Check(emlab_vision_accuracy(sv.get(), ds.get(), EMLAB_SPLIT_TEST,
                                  &res.sender_acc_post),
            "accuracy");
      Check(emlab_vision_accuracy(rv.get(), ds.get(), EMLAB_SPLIT_TEST,
                                  &res.receiver_acc_post),
            "accuracy");
      res.alignment_post = Alignment(sv.get(), rv.get(), ds, ctx);
      std::ostringstream vm;
      vm << "agent,stage,test_accuracy,rsa_overall,rsa_color,rsa_scale,"
            "rsa_shape\n";
      vm << "sender,pretrained," << Num(visions.at(senders[0]).test_accuracy)
         << ',' << ProfileFields(sender_pre) << '\n';
      vm << "sender,trained," << Num(res.sender_acc_post) << ','
         << ProfileFields(res.sender_post) << '\n';
      vm << "receiver,pretrained,"
         << Num(visions.at(receivers[0]).test_accuracy) << ','
         << ProfileFields(receiver_pre) << '\n';
      vm << "receiver,trained," << Num(res.receiver_acc_post) << ','
         << ProfileFields(res.receiver_post) << '\n';
      WriteText(dir / "vision_metrics.csv", vm.str());
      WriteText(dir / "alignment.csv", "stage,rsa\npretrained," +
                                           Num(alignment_pre) + "\ntrained," +
                                           Num(res.alignment_post) + "\n");
    } else if (mode == "population") {
      std::vector<Agent> ss, rs;
      std::vector<emlab_agent*> sp, rp;
      for (std::size_t i = 0; i < senders.size(); ++i) {
        ss.push_back(make(EMLAB_SENDER, senders[i], 10 + i));
      }
      for (std::size_t i = 0; i < receivers.size(); ++i) {
        rs.push_back(make(EMLAB_RECEIVER, receivers[i], 100 + i));
      }
      for (auto& a : ss) sp.push_back(a.get());
      for (auto& a : rs) rp.push_back(a.get());
      Check(emlab_run_population(sp.data(), sp.size(), rp.data(), rp.size(),
                                 ds.get(), &game, &train, run_seed, log.out()),
            "training");
      for (std::size_t i = 0; i < ss.size(); ++i) {
        SaveAgent(dir, "sender_" + std::to_string(i), ss[i].get(), "sender",
                  senders[i], ctx, ds);
      }
      for (std::size_t i = 0; i < rs.size(); ++i) {
        SaveAgent(dir, "receiver_" + std::to_string(i), rs[i].get(),
                  "receiver", receivers[i], ctx, ds);
      }
    } else {
      Agent a = make(EMLAB_FLEXIBLE, senders[0], 20);
      Agent b = make(EMLAB_FLEXIBLE, senders[1], 21);
      Check(emlab_run_flexible(a.get(), b.get(), ds.get(), &game, &train,
                               run_seed, log.out()),
            "training");
      SaveAgent(dir, "agent_a", a.get(), "flexible", senders[0], ctx, ds);
      SaveAgent(dir, "agent_b", b.get(), "flexible", senders[1], ctx, ds);
      MessageLogH swapped;
      Check(emlab_train_log_messages(log.get(), 1, swapped.out()), "log");
      Check(emlab_message_log_write(swapped.get(),
                                    (dir / "messages_swapped.csv").c_str()),
            "messages");
    }
    Check(emlab_train_log_rewards(log.get(), &res.test_reward,
                                  &res.swapped_reward),
          "rewards");
    Check(emlab_train_log_write_csv(log.get(), (dir / "train_log.csv").c_str()),
          "train log");
    MessageLogH msgs;
    Check(emlab_train_log_messages(log.get(), 0, msgs.out()), "log");
    Check(emlab_message_log_write(msgs.get(), (dir / "messages.csv").c_str()),
          "messages");
    Check(emlab_message_log_info(msgs.get(), &res.info), "log info");
    Say(std::string(name) + ": test reward " + Num(res.test_reward));
  });

  std::ostringstream summary;
  summary << "run,test_reward,swapped_reward,effectiveness,"
             "effectiveness_color,effectiveness_scale,effectiveness_shape,"
             "average_effectiveness\n";
  std::map<std::string, std::vector<double>> series;
  for (int r = 0; r < runs; ++r) {
    const RunResult& x = results[r];
    summary << r << ',' << Num(x.test_reward) << ',' << Num(x.swapped_reward)
            << ',' << Num(x.info.effectiveness) << ','
            << Num(x.info.effectiveness_color) << ','
            << Num(x.info.effectiveness_scale) << ','
            << Num(x.info.effectiveness_shape) << ','
            << Num(x.info.average_effectiveness) << '\n';
    auto push = [&](const std::string& k, double v) {
      if (!std::isnan(v)) series[k].push_back(v);
    };
    push("test_reward", x.test_reward);
    push("swapped_reward", x.swapped_reward);
    push("effectiveness", x.info.effectiveness);
    push("effectiveness_color", x.info.effectiveness_color);
    push("effectiveness_scale", x.info.effectiveness_scale);
    push("effectiveness_shape", x.info.effectiveness_shape);
    push("average_effectiveness", x.info.average_effectiveness);
    if (x.has_vision) {
      push("receiver_rsa_color", x.receiver_post.color);
      push("receiver_rsa_scale", x.receiver_post.scale);
      push("receiver_rsa_shape", x.receiver_post.shape);
      push("sender_rsa_color", x.sender_post.color);
      push("sender_rsa_scale", x.sender_post.scale);
      push("sender_rsa_shape", x.sender_post.shape);
      push("alignment", x.alignment_post);
      push("receiver_accuracy", x.receiver_acc_post);
    }
  }
  WriteText(ctx.out / "summary.csv", summary.str());

  std::ostringstream ci;
  ci << kCiHeader;
  for (const char* k :
       {"test_reward", "swapped_reward", "effectiveness", "effectiveness_color",
        "effectiveness_scale", "effectiveness_shape", "average_effectiveness"}) {
    auto it = series.find(k);
    if (it != series.end()) ci << CiRow(k, Mean(ctx, it->second, k), it->second.size());
  }
  // Biased attribute against the mean of the other two.
  const emlab_spec sender_spec = visions.at(senders[0]).spec;
  if (sender_spec.condition >= EMLAB_COND_COLOR &&
      sender_spec.condition <= EMLAB_COND_SHAPE) {
    const char* attrs[] = {"color", "scale", "shape"};
    const int b = sender_spec.condition - EMLAB_COND_COLOR;
    std::vector<double> biased, unbiased;
    for (const RunResult& x : results) {
      const double e[3] = {x.info.effectiveness_color,
                           x.info.effectiveness_scale,
                           x.info.effectiveness_shape};
      if (std::isnan(e[0]) || std::isnan(e[1]) || std::isnan(e[2])) continue;
      biased.push_back(e[b]);
      unbiased.push_back((e[(b + 1) % 3] + e[(b + 2) % 3]) / 2.0);
    }
    if (!biased.empty()) {
      const std::string k =
          std::string("effectiveness_") + attrs[b] + "_minus_unbiased";
      ci << CiRow(k, Diff(ctx, biased, unbiased, k), biased.size());
    }
  }
  if (mode == "pair") {
    struct Delta {
      const char* key;
      double pre;
    };
    const Delta deltas[] = {
        {"receiver_rsa_color", receiver_pre.color},
        {"receiver_rsa_scale", receiver_pre.scale},
        {"receiver_rsa_shape", receiver_pre.shape},
        {"sender_rsa_color", sender_pre.color},
        {"sender_rsa_scale", sender_pre.scale},
        {"sender_rsa_shape", sender_pre.shape},
        {"alignment", alignment_pre},
    };
    for (const Delta& d : deltas) {
      auto it = series.find(d.key);
      if (it == series.end() || std::isnan(d.pre)) continue;
      const std::vector<double> pre(it->second.size(), d.pre);
      const std::string k = std::string(d.key) + "_trained_minus_pretrained";
      ci << CiRow(k, Diff(ctx, it->second, pre, k), it->second.size());
    }
  }
  WriteText(ctx.out / "summary_ci.csv", ci.str());
}

void CmdTrain(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "train");
  fs::create_directories(ctx.out);
  TrainInto(ctx);
  WriteManifest(ctx.out, "train", ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeFlags {
  std::vector<std::string> logs;
  std::vector<std::string> visions;
  std::optional<int> vocab;
};

void CmdAnalyze(const Options& o, const AnalyzeFlags& f) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "analyze");
  if (f.logs.empty() && f.visions.empty()) {
    throw UsageError("analyze needs --log and/or --vision inputs");
  }
  fs::create_directories(ctx.out);
  const int vocab = f.vocab ? *f.vocab : GetInt(ctx.cfg, "game.vocab_size");
  if (!f.logs.empty()) {
    std::ostringstream eff, info;
    eff << "log,rounds,mean_reward,effectiveness,effectiveness_color,"
           "effectiveness_scale,effectiveness_shape,average_effectiveness\n";
    info << "log,h_o,h_m,h_s,h_o_given_m,h_m_given_o,h_s_given_m,i_om,i_sm,"
            "i_os,i_os_given_m,interaction,h_o_given_ms,h_s_given_om\n";
    std::map<std::string, std::vector<double>> series;
    for (const std::string& path : f.logs) {
      MessageLogH log;
      Check(emlab_message_log_read(path.c_str(), vocab, log.out()),
            "reading " + path);
      emlab_log_info i;
      Check(emlab_message_log_info(log.get(), &i), "analyzing " + path);
      eff << path << ',' << i.rounds << ',' << Num(i.mean_reward) << ','
          << Num(i.effectiveness) << ',' << Num(i.effectiveness_color) << ','
          << Num(i.effectiveness_scale) << ',' << Num(i.effectiveness_shape)
          << ',' << Num(i.average_effectiveness) << '\n';
      info << path << ',' << Num(i.h_o) << ',' << Num(i.h_m) << ','
           << Num(i.h_s) << ',' << Num(i.h_o_given_m) << ','
           << Num(i.h_m_given_o) << ',' << Num(i.h_s_given_m) << ','
           << Num(i.i_om) << ',' << Num(i.i_sm) << ',' << Num(i.i_os) << ','
           << Num(i.i_os_given_m) << ',' << Num(i.interaction) << ','
           << Num(i.h_o_given_ms) << ',' << Num(i.h_s_given_om) << '\n';
      const std::pair<const char*, double> vals[] = {
          {"mean_reward", i.mean_reward},
          {"effectiveness", i.effectiveness},
          {"effectiveness_color", i.effectiveness_color},
          {"effectiveness_scale", i.effectiveness_scale},
          {"effectiveness_shape", i.effectiveness_shape},
          {"average_effectiveness", i.average_effectiveness}};
      for (const auto& [k, v] : vals) {
        if (!std::isnan(v)) series[k].push_back(v);
      }
    }
    WriteText(ctx.out / "effectiveness.csv", eff.str());
    WriteText(ctx.out / "information.csv", info.str());
    std::ostringstream ci;
    ci << kCiHeader;
    for (const char* k : {"mean_reward", "effectiveness", "effectiveness_color",
                          "effectiveness_scale", "effectiveness_shape",
                          "average_effectiveness"}) {
      auto it = series.find(k);
      if (it != series.end()) {
        ci << CiRow(k, Mean(ctx, it->second, k), it->second.size());
      }
    }
    WriteText(ctx.out / "effectiveness_ci.csv", ci.str());
  }
  if (!f.visions.empty()) {
    Dataset ds = LoadDataset(ctx);
    const auto [h, w] = DatasetSize(ds);
    std::vector<RsmH> rsms(f.visions.size());
    std::ostringstream rsa;
    rsa << "vision,test_accuracy,rsa_overall,rsa_color,rsa_scale,rsa_shape\n";
    for (std::size_t i = 0; i < f.visions.size(); ++i) {
      Vision v;
      Check(emlab_vision_load(f.visions[i].c_str(), h, w, v.out()),
            "loading " + f.visions[i]);
      double acc = 0.0;
      Check(emlab_vision_accuracy(v.get(), ds.get(), EMLAB_SPLIT_TEST, &acc),
            "accuracy");
      const emlab_bias_profile p = Profile(v.get(), ds, ctx, &rsms[i]);
      rsa << f.visions[i] << ',' << Num(acc) << ',' << ProfileFields(p) << '\n';
    }
    WriteText(ctx.out / "rsa.csv", rsa.str());
    std::ostringstream al;
    al << "vision_a,vision_b,rsa\n";
    for (std::size_t i = 0; i < rsms.size(); ++i) {
      for (std::size_t j = i + 1; j < rsms.size(); ++j) {
        double r = NAN;
        const emlab_status s = emlab_rsa(rsms[i].get(), rsms[j].get(), &r);
        if (s != EMLAB_ERR_UNDEFINED) Check(s, "alignment");
        al << f.visions[i] << ',' << f.visions[j] << ',' << Num(r) << '\n';
      }
    }
    WriteText(ctx.out / "alignment.csv", al.str());
  }
  WriteManifest(ctx.out, "analyze", ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
  Say("wrote analysis to " + ctx.out.string());
}

// ---- evolve --------------------------------------------------------------

void WarnSink(const char* message, void*) { Say(std::string("warning: ") + message); }

void EvolveInto(const Context& ctx) {
  Dataset ds = LoadDataset(ctx);
  const std::vector<std::string> types = StringList(ctx.cfg, "evolve.types");
  if (types.empty()) throw UsageError("evolve.types is empty");
  auto visions = AcquireVisions(ctx, ds, types);
  const emlab_game_config game =
      GameConfigOf(ctx.cfg, GetString(ctx.cfg, "evolve.variant"));
  const emlab_train_config train = TrainConfigOf(ctx.cfg);
  std::vector<const char*> names;
  std::vector<const emlab_vision*> vs;
  std::vector<emlab_spec> specs;
  for (const std::string& t : types) {
    names.push_back(visions.at(t).name.c_str());
    vs.push_back(visions.at(t).vision.get());
    specs.push_back(visions.at(t).spec);
  }
  Payoff payoff;
  Say("tournament over " + std::to_string(types.size()) + " types ...");
  Check(emlab_tournament_run(names.data(), vs.data(), specs.data(),
                             types.size(), ds.get(), &game, &train,
                             GetInt(ctx.cfg, "evolve.runs_per_pair"),
                             ctx.workers,
                             emlab_derive_seed(ctx.seed, NameKey("tournament"),
                                               0, 0),
                             WarnSink, nullptr, payoff.out()),
        "tournament");
  Check(emlab_payoff_write(payoff.get(), (ctx.out / "payoff.csv").c_str()),
        "payoff");
  const emlab_status ms = emlab_payoff_write_matrix(
      payoff.get(), (ctx.out / "payoff_matrix.csv").c_str(),
      (ctx.out / "payoff_matrix.pgm").c_str(), 16);
  Check(ms, "payoff matrix (every cell needs at least one successful run)");
  std::vector<int> ess(types.size()), sig(types.size());
  Check(emlab_ess_analyze(payoff.get(),
                          GetInt(ctx.cfg, "evolve.bootstrap_resamples"),
                          GetDouble(ctx.cfg, "evolve.level"),
                          emlab_derive_seed(ctx.seed, NameKey("ess"), 0, 0),
                          (ctx.out / "ess.json").c_str(), ess.data(),
                          sig.data()),
        "ESS analysis");
  for (std::size_t i = 0; i < types.size(); ++i) {
    Say(types[i] + ": " + (ess[i] ? "ESS" : "not ESS") +
        (ess[i] ? (sig[i] ? " (significant)" : " (not significant)") : ""));
  }
}

void CmdEvolve(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "evolve");
  fs::create_directories(ctx.out);
  EvolveInto(ctx);
  WriteManifest(ctx.out, "evolve", ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
}

// ---- sweep ---------------------------------------------------------------

void CmdSweep(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "sweep");
  const std::string command = GetString(ctx.cfg, "sweep.command");
  if (command != "train" && command != "pretrain" && command != "evolve") {
    throw UsageError("sweep.command must be train, pretrain or evolve");
  }
  const Json& axes = At(ctx.cfg, "sweep.axes");
  if (!axes.is_object() || axes.empty()) {
    throw UsageError("sweep.axes must map config keys to value lists");
  }
  std::vector<std::string> keys;
  std::vector<std::vector<Json>> values;
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    if (!it.value().is_array() || it.value().empty()) {
      throw UsageError("sweep axis '" + it.key() + "' needs a non-empty list");
    }
    if (it.key().rfind("sweep", 0) == 0) {
      throw UsageError("sweep axes cannot modify the sweep block");
    }
    keys.push_back(it.key());
    values.emplace_back(it.value().begin(), it.value().end());
  }
  std::size_t cells = 1;
  for (const auto& v : values) cells *= v.size();
  fs::create_directories(ctx.out);
  std::ostringstream index;
  index << "cell";
  for (const auto& k : keys) index << ',' << k;
  index << ",dir\n";
  for (std::size_t c = 0; c < cells; ++c) {
    Json cfg = ctx.cfg;
    std::size_t rem = c;
    std::vector<Json> chosen(keys.size());
    for (std::size_t a = keys.size(); a-- > 0;) {
      chosen[a] = values[a][rem % values[a].size()];
      rem /= values[a].size();
    }
    for (std::size_t a = 0; a < keys.size(); ++a) {
      SetAt(cfg, keys[a], chosen[a]);
    }
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", c);
    const fs::path dir = ctx.out / name;
    fs::create_directories(dir);
    Context sub = SubContext(cfg, dir);
    const auto cell_start = std::chrono::steady_clock::now();
    Say(std::string("sweep ") + name + " ...");
    if (command == "train") {
      TrainInto(sub);
    } else if (command == "pretrain") {
      PretrainInto(sub);
    } else {
      EvolveInto(sub);
    }
    WriteManifest(dir, command, cfg,
                  std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - cell_start)
                      .count());
    index << c;
    for (const auto& v : chosen) {
      index << ',' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    index << ',' << name << '\n';
  }
  WriteText(ctx.out / "sweep.csv", index.str());
  WriteManifest(ctx.out, "sweep", ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
  Say("sweep wrote " + std::to_string(cells) + " cells");
}

// ---- report --------------------------------------------------------------

const char* kReportFiles[] = {"summary.csv",       "summary_ci.csv",
                              "bias_report.csv",   "effectiveness.csv",
                              "effectiveness_ci.csv", "payoff_matrix.csv",
                              "sweep.csv"};

void CmdReport(const Options& o, const std::vector<std::string>& dirs) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx = MakeContext(o, "report");
  if (dirs.empty()) throw UsageError("report needs at least one run directory");
  std::ostringstream runs;
  runs << "run_dir,command,seed,preset,outputs\n";
  std::map<std::string, std::pair<std::string, std::ostringstream>> merged;
  for (const std::string& d : dirs) {
    const fs::path m = fs::path(d) / "manifest.json";
    std::ifstream in(m);
    if (!in) throw RunError("no manifest in " + d);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw RunError(m.string() + ": " + e.what());
    }
    runs << d << ',' << j.value("command", "") << ','
         << j.value("seed", Json(0)).dump() << ','
         << j.value("config", Json::object()).value("preset", "") << ','
         << j.value("outputs", Json::object()).size() << '\n';
    for (const char* f : kReportFiles) {
      std::ifstream csv(fs::path(d) / f);
      if (!csv) continue;
      std::string header, line;
      std::getline(csv, header);
      auto& entry = merged[f];
      if (entry.first.empty()) {
        entry.first = header;
        entry.second << "run_dir," << header << '\n';
      } else if (entry.first != header) {
        throw RunError(std::string(f) + " in " + d +
                       " has a different header; cannot merge");
      }
      while (std::getline(csv, line)) {
        if (!line.empty()) entry.second << d << ',' << line << '\n';
      }
    }
  }
  fs::create_directories(ctx.out);
  WriteText(ctx.out / "report_runs.csv", runs.str());
  for (auto& [f, entry] : merged) {
    WriteText(ctx.out / ("report_" + f), entry.second.str());
  }
  WriteManifest(ctx.out, "report", ctx.cfg,
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count());
  Say("report merged " + std::to_string(dirs.size()) + " run directories into " +
      ctx.out.string());
}

void AddCommon(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "Config file (JSON)");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--out", o.out, "Output directory (file for dataset)");
  app->add_option("--workers", o.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  app->add_option("--preset", o.preset, "Preset: paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));
}

int Main(int argc, char** argv) {
  CLI::App app{"EmergeLab: emergent communication and perceptual bias lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", emlab_version());
  Options o;
  DatasetFlags df;
  PretrainFlags pf;
  AnalyzeFlags af;
  std::vector<std::string> report_dirs;

  auto* dataset = app.add_subcommand("dataset", "Build a dataset file");
  AddCommon(dataset, o);
  dataset->add_option("--per-class", df.per_class, "Instances per class");
  dataset->add_option("--size", df.size, "Image side length");

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain vision modules");
  AddCommon(pretrain, o);
  pretrain->add_option("--type", pf.types, "Bias type (repeatable)");
  pretrain->add_flag("--grid-search", pf.grid_search,
                     "Grid search over mixed-bias weightings");

  auto* train = app.add_subcommand("train", "Train agents in the game");
  AddCommon(train, o);

  auto* analyze = app.add_subcommand("analyze", "Analyze logs and modules");
  AddCommon(analyze, o);
  analyze->add_option("--log", af.logs, "Message log CSV (repeatable)");
  analyze->add_option("--vision", af.visions,
                      "Vision checkpoint (repeatable)");
  analyze->add_option("--vocab", af.vocab, "Vocabulary size of the logs");

  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over config keys");
  AddCommon(sweep, o);

  auto* evolve = app.add_subcommand("evolve", "Tournament and ESS analysis");
  AddCommon(evolve, o);

  auto* report = app.add_subcommand("report", "Merge run directories");
  AddCommon(report, o);
  report->add_option("dirs", report_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*dataset) CmdDataset(o, df);
    if (*pretrain) CmdPretrain(o, pf);
    if (*train) CmdTrain(o);
    if (*analyze) CmdAnalyze(o, af);
    if (*sweep) CmdSweep(o);
    if (*evolve) CmdEvolve(o);
    if (*report) CmdReport(o, report_dirs);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const RunError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace emergelab_cli

int main(int argc, char** argv) { return emergelab_cli::Main(argc, argv); }
