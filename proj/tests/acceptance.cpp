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

// End-to-end acceptance run. Prints one "Criterion N: PASS|FAIL" line per
// criterion and exits non-zero when any criterion fails. Criteria may be
// selected by number on the command line; by default all eleven run.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "emergelab/evolution.hpp"
#include "emergelab/grid_search.hpp"
#include "emergelab/metrics.hpp"
#include "emergelab/smoothing.hpp"
#include "emergelab/training.hpp"
#include "grad_cases.hpp"

namespace el = emergelab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

std::string FmtCi(const el::BootstrapCI& ci) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f [%.3f, %.3f]", ci.estimate, ci.lower,
                ci.upper);
  return buf;
}

void Note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- shared desk-scale state ---------------------------------------------

constexpr int kDeskPerClass = 40;
constexpr int kRsmPerClass = 50;
constexpr int kGameSeeds = 5;
constexpr int kBootstrap = 10000;
constexpr std::uint64_t kDatasetSeed = 2026;
// Seeds of the default CNNs whose profiles are averaged for the default
// ordering check. The first one serves as the default vision module.
constexpr std::uint64_t kDefaultSeeds[] = {11, 12, 13};

struct Pretrained {
  el::VisionModule vision;
  el::SmoothingSpec spec;
  double test_accuracy = 0.0;
  el::BiasProfile profile;
  double seconds = 0.0;
};

class Desk {
 public:
  const el::Dataset& dataset() {
    if (!dataset_) {
      dataset_ = el::BuildDataset(kDeskPerClass, el::ImageSize{16, 16}, kDatasetSeed);
    }
    return *dataset_;
  }

  // Pretrains spec with the desk preset, once per (name, seed).
  Pretrained& Get(const std::string& name, std::uint64_t seed) {
    const std::string key = name + "#" + std::to_string(seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto start = Clock::now();
    el::Rng rng(seed);
    const el::Dataset& ds = dataset();
    Pretrained p{el::VisionModule::Create(ds.image_size(), rng),
                 el::SmoothingSpec::Named(name), 0.0, {}, 0.0};
    const el::PretrainResult r =
        el::PretrainVision(p.vision, ds, p.spec, el::PretrainConfig::Desk(), rng);
    p.test_accuracy = r.test_accuracy;
    p.profile = el::ProfileRsm(el::RsmFromVision(p.vision, ds, kRsmPerClass, seed));
    p.seconds = Seconds(start);
    return cache_.emplace(key, std::move(p)).first->second;
  }

  Pretrained& Named(const std::string& name) {
    return Get(name, name == "default" ? kDefaultSeeds[0] : SeedOf(name));
  }

 private:
  static std::uint64_t SeedOf(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return h % 1000003;
  }

  std::optional<el::Dataset> dataset_;
  std::map<std::string, Pretrained> cache_;
};

Desk& State() {
  static Desk desk;
  return desk;
}

std::string ProfileText(const el::BiasProfile& p) {
  auto v = [](const std::optional<double>& x) {
    return x ? Fmt("%.3f", *x) : std::string("nan");
  };
  return "overall " + v(p.overall) + " color " + v(p.color) + " scale " +
         v(p.scale) + " shape " + v(p.shape);
}

// --- 1: gradients --------------------------------------------------------

Outcome GradientCorrectness() {
  const auto start = Clock::now();
  double worst_op = 0.0, worst_pass = 0.0, worst_kink = 0.0;
  std::string worst_name;
  std::size_t ops = 0, probes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& p : el::testing::GradProblems(seed)) {
      const el::nn::GradCheckReport r = el::nn::GradCheck(p.fn, p.inputs);
      ++ops;
      if (r.max_relative_error > worst_op || r.entries == 0) {
        worst_op = r.entries == 0 ? INFINITY : r.max_relative_error;
        worst_name = p.name;
      }
    }
    for (const auto& r : {el::testing::SenderPassCheck(seed, 2),
                          el::testing::ReceiverPassCheck(seed, 2)}) {
      worst_pass = std::max(worst_pass, r.max_relative_error);
      worst_kink = std::max(worst_kink, r.max_kink_error);
      probes += r.entries;
    }
  }
  const double secs = Seconds(start);
  Note(std::to_string(ops) + " op checks, worst " + Fmt("%.2e", worst_op) + " (" +
       worst_name + ")");
  Note(std::to_string(probes) + " agent-pass probes, worst " + Fmt("%.2e", worst_pass) +
       ", worst one-sided at kinks " + Fmt("%.2e", worst_kink));
  return {worst_op < 1e-4 && worst_pass < 1e-4 && secs < 60.0,
          "20 seeds in " + Fmt("%.1f s", secs)};
}

// --- 2: smoothing targets ------------------------------------------------

Outcome SmoothingTargets() {
  const std::vector<std::string> names = {"default", "color", "scale", "shape", "all",
                                          "color-scale", "color-shape", "scale-shape"};
  double worst_sum = 0.0;
  bool nonnegative = true;
  for (const auto& name : names) {
    const el::SmoothingSpec spec = el::SmoothingSpec::Named(name);
    for (int c = 0; c < el::kNumClasses; ++c) {
      const el::TargetDistribution t = el::SmoothedTarget(c, spec);
      double s = 0.0;
      for (double v : t) {
        s += v;
        nonnegative = nonnegative && v >= 0.0;
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }
  // sigma 0.6 color: 0.4 on the class, 0.6 / 15 on each same-color class.
  const el::SmoothingSpec color = el::SmoothingSpec::Single(el::Attribute::kColor, 0.6);
  double worst_entry = 0.0;
  for (int c = 0; c < el::kNumClasses; ++c) {
    const el::TargetDistribution t = el::SmoothedTarget(c, color);
    const int own = c / 16;
    for (int j = 0; j < el::kNumClasses; ++j) {
      const double want = j == c ? 0.4 : (j / 16 == own ? 0.04 : 0.0);
      worst_entry = std::max(worst_entry, std::abs(t[j] - want));
    }
  }
  Note("max |sum - 1| " + Fmt("%.2e", worst_sum) + ", max color-target deviation " +
       Fmt("%.2e", worst_entry));
  return {worst_sum <= 1e-9 && nonnegative && worst_entry <= 1e-12,
          "64 classes x " + std::to_string(names.size()) + " conditions"};
}

// --- 3 and 4: pretraining ------------------------------------------------

el::BiasProfile AverageDefaultProfile() {
  double o = 0, c = 0, sc = 0, sh = 0;
  for (std::uint64_t seed : kDefaultSeeds) {
    const el::BiasProfile& p = State().Get("default", seed).profile;
    o += p.overall.value_or(NAN);
    c += p.color.value_or(NAN);
    sc += p.scale.value_or(NAN);
    sh += p.shape.value_or(NAN);
  }
  const double n = std::size(kDefaultSeeds);
  el::BiasProfile avg;
  avg.overall = o / n;
  avg.color = c / n;
  avg.scale = sc / n;
  avg.shape = sh / n;
  return avg;
}

Outcome PretrainingBias() {
  bool ok = true;
  double slowest = 0.0;
  for (std::uint64_t seed : kDefaultSeeds) {
    const Pretrained& p = State().Get("default", seed);
    Note("default seed " + std::to_string(seed) + ": " + ProfileText(p.profile));
    slowest = std::max(slowest, p.seconds);
  }
  const el::BiasProfile def = AverageDefaultProfile();
  Note("default mean: " + ProfileText(def));
  const bool color_first = *def.color - *def.scale >= 0.1 && *def.color - *def.shape >= 0.1;
  Note(std::string("default color margin >= 0.1: ") + (color_first ? "yes" : "no"));
  ok = ok && color_first;
  for (el::Attribute a : {el::Attribute::kColor, el::Attribute::kScale, el::Attribute::kShape}) {
    const std::string name = el::AttributeName(a);
    const Pretrained& p = State().Named(name);
    slowest = std::max(slowest, p.seconds);
    bool strict = p.profile.of(a).has_value();
    for (el::Attribute b : {el::Attribute::kColor, el::Attribute::kScale, el::Attribute::kShape}) {
      if (b == a || !strict) continue;
      strict = p.profile.of(b).has_value() && *p.profile.of(a) > *p.profile.of(b);
    }
    Note(name + ": " + ProfileText(p.profile) + (strict ? "" : "  <- not strict maximum"));
    ok = ok && strict;
  }
  const Pretrained& all = State().Named("all");
  slowest = std::max(slowest, all.seconds);
  const bool all_above = all.profile.overall && *all.profile.overall > *def.overall;
  Note("all: " + ProfileText(all.profile) + "; overall vs default mean " +
       Fmt("%.3f", *def.overall));
  ok = ok && all_above;
  return {ok && slowest < 600.0,
          "16x16, " + std::to_string(kDeskPerClass) + "/class, " +
              std::to_string(el::PretrainConfig::Desk().epochs) + " epochs; slowest condition " +
              Fmt("%.1f s", slowest)};
}

Outcome ClassificationAccuracy() {
  bool ok = true;
  double lowest = 1.0;
  auto check = [&](const std::string& label, double acc) {
    Note(label + ": test accuracy " + Fmt("%.4f", acc));
    ok = ok && acc >= 0.90;
    lowest = std::min(lowest, acc);
  };
  for (std::uint64_t seed : kDefaultSeeds) {
    check("default seed " + std::to_string(seed), State().Get("default", seed).test_accuracy);
  }
  for (const char* name : {"color", "scale", "shape", "all"}) {
    check(name, State().Named(name).test_accuracy);
  }
  // Mixed conditions are defined at desk scale by the grid search at a 0.90
  // floor; the reference weights at sigma 0.8 are reported alongside.
  el::GridSearchConfig grid;
  grid.sigmas = {0.6, 0.7, 0.8};
  grid.weights = {{0.3, 0.7}, {0.5, 0.5}, {0.7, 0.3}};
  grid.accuracy_floor = 0.90;
  grid.rsm_per_class = kRsmPerClass;
  grid.pretrain = el::PretrainConfig::Desk();
  const std::vector<std::array<el::Attribute, 2>> pairs = {
      {el::Attribute::kColor, el::Attribute::kScale},
      {el::Attribute::kColor, el::Attribute::kShape},
      {el::Attribute::kScale, el::Attribute::kShape}};
  std::uint64_t seed = 300;
  for (const auto& pair : pairs) {
    const std::string name = el::AttributeName(pair[0]) + "-" + el::AttributeName(pair[1]);
    Note(name + " reference spec: test accuracy " +
         Fmt("%.4f", State().Named(name).test_accuracy) + " (informational)");
    const el::GridSearchResult r = el::GridSearchMixed(State().dataset(), pair, grid, ++seed);
    const el::GridCandidate* best = r.best();
    if (best == nullptr) {
      Note(name + ": no grid candidate reaches the floor");
      ok = false;
      continue;
    }
    check(name + " (grid: sigma " + Fmt("%.1f", best->spec.sigma) + ", w " +
              Fmt("%.1f", best->spec.weights[0]) + "/" + Fmt("%.1f", best->spec.weights[1]) +
              ", " + ProfileText(best->profile) + ")",
          best->test_accuracy);
  }
  return {ok, "lowest " + Fmt("%.4f", lowest) + ", floor 0.90"};
}

// --- 5 to 7: games ---------------------------------------------------------

el::TrainLog PlayFrozen(const el::VisionModule& s_vis, const el::VisionModule& r_vis,
                        std::uint64_t seed) {
  el::Rng rng(seed);
  el::Agent sender = el::Agent::WithVision(el::Role::kSender, s_vis, 4, rng);
  el::Agent receiver = el::Agent::WithVision(el::Role::kReceiver, r_vis, 4, rng);
  return el::RunScenario(sender, receiver, State().dataset(), el::GameConfig{},
                         el::GameTrainConfig::Desk(el::Scenario::kFrozenVision), seed);
}

Outcome CommunicationSuccess() {
  const auto start = Clock::now();
  const el::VisionModule& v = State().Named("default").vision;
  std::vector<double> rewards;
  for (int k = 0; k < 3; ++k) {
    rewards.push_back(PlayFrozen(v, v, 500 + k).test_reward);
    Note("run " + std::to_string(k) + ": greedy test reward " + Fmt("%.4f", rewards.back()));
  }
  const double secs = Seconds(start);
  return {Mean(rewards) >= 0.80 && secs < 900.0,
          "mean " + Fmt("%.4f", Mean(rewards)) + " over 3 runs, chance 1/3, " +
              Fmt("%.0f s", secs)};
}

Outcome BiasTransfer() {
  const el::VisionModule& v = State().Named("scale").vision;
  std::vector<double> e_scale, e_other;
  for (int k = 0; k < kGameSeeds; ++k) {
    const el::TrainLog log = PlayFrozen(v, v, 600 + k);
    const double sc = *el::Effectiveness(log.messages, el::Projection::kScale);
    const double co = *el::Effectiveness(log.messages, el::Projection::kColor);
    const double sh = *el::Effectiveness(log.messages, el::Projection::kShape);
    e_scale.push_back(sc);
    e_other.push_back(0.5 * (co + sh));
    Note("seed " + std::to_string(k) + ": reward " + Fmt("%.3f", log.test_reward) +
         ", E color " + Fmt("%.3f", co) + " scale " + Fmt("%.3f", sc) + " shape " +
         Fmt("%.3f", sh));
  }
  const el::BootstrapCI ci = el::BootstrapDiffOfMeans(e_scale, e_other, kBootstrap, 0.95, 61);
  Note("E(scale) - mean(E(color), E(shape)): " + FmtCi(ci));
  return {ci.estimate >= 0.15 && ci.ExcludesZero(),
          "gap " + Fmt("%.3f", ci.estimate) + " over " + std::to_string(kGameSeeds) + " seeds"};
}

Outcome LanguageToPerception() {
  const el::Dataset& ds = State().dataset();
  Pretrained& scale = State().Named("scale");
  Pretrained& def = State().Named("default");
  const std::uint64_t rsm_seed = 71;
  const el::Rsm sender_before = el::RsmFromVision(scale.vision, ds, kRsmPerClass, rsm_seed);
  const el::Rsm receiver_before = el::RsmFromVision(def.vision, ds, kRsmPerClass, rsm_seed);
  const double scale_before = *el::ProfileRsm(receiver_before).scale;
  const double align_before = *el::Rsa(sender_before, receiver_before);
  std::vector<double> scale_after, align_after;
  for (int k = 0; k < kGameSeeds; ++k) {
    el::Rng rng(700 + k);
    el::Agent sender = el::Agent::WithVision(el::Role::kSender, scale.vision, 4, rng);
    el::Agent receiver = el::Agent::WithVision(el::Role::kReceiver, def.vision, 4, rng);
    const el::TrainLog log =
        el::RunScenario(sender, receiver, ds, el::GameConfig{},
                        el::GameTrainConfig::Desk(el::Scenario::kEmergenceJoint), 700 + k);
    const el::Rsm s_rsm = el::RsmFromVision(sender.vision, ds, kRsmPerClass, rsm_seed);
    const el::Rsm r_rsm = el::RsmFromVision(receiver.vision, ds, kRsmPerClass, rsm_seed);
    scale_after.push_back(*el::ProfileRsm(r_rsm).scale);
    align_after.push_back(*el::Rsa(s_rsm, r_rsm));
    Note("seed " + std::to_string(k) + ": reward " + Fmt("%.3f", log.test_reward) +
         ", receiver RSA scale " + Fmt("%.3f", scale_after.back()) + ", alignment " +
         Fmt("%.3f", align_after.back()));
  }
  const std::vector<double> sb(kGameSeeds, scale_before), ab(kGameSeeds, align_before);
  const el::BootstrapCI d_scale = el::BootstrapDiffOfMeans(scale_after, sb, kBootstrap, 0.95, 72);
  const el::BootstrapCI d_align = el::BootstrapDiffOfMeans(align_after, ab, kBootstrap, 0.95, 73);
  Note("pretrained receiver RSA scale " + Fmt("%.3f", scale_before) + ", change " +
       FmtCi(d_scale));
  Note("pretrained alignment " + Fmt("%.3f", align_before) + ", change " + FmtCi(d_align));
  const bool ok = d_scale.estimate > 0 && d_scale.ExcludesZero() && d_align.estimate > 0 &&
                  d_align.ExcludesZero();
  return {ok, "emergence with classification loss, " + std::to_string(kGameSeeds) + " seeds"};
}

// --- 8: information identities ------------------------------------------

Outcome InformationIdentities() {
  std::mt19937_64 gen(8);
  double worst_mi = 0.0;
  bool exact_zero = true, nonneg = true, bounded = true;
  for (int trial = 0; trial < 400; ++trial) {
    const bool deterministic = trial % 2 == 1;
    el::MessageLog log;
    log.vocab_size = 2 + trial % 4;
    const int codes = log.vocab_size * log.vocab_size * log.vocab_size;
    std::uniform_int_distribution<int> cls(0, el::kNumClasses - 1), sym(0, log.vocab_size - 1);
    std::vector<int> selection_of(codes);
    for (int& s : selection_of) s = cls(gen);
    const int rounds = 50 + trial;
    for (int r = 0; r < rounds; ++r) {
      el::MessageRecord rec;
      rec.target_class = cls(gen);
      for (int t = 0; t < 3; ++t) {
        // Messages loosely tied to the target so that I(O, M) > 0.
        rec.message.push_back((gen() % 3 == 0) ? sym(gen) : (rec.target_class >> (2 * t)) %
                                                                log.vocab_size);
      }
      int code = 0;
      for (int s : rec.message) code = code * log.vocab_size + s;
      rec.selected_class = deterministic ? selection_of[code] : cls(gen);
      rec.reward = rec.selected_class == rec.target_class;
      log.rounds.push_back(rec);
    }
    const el::LogInformation info = el::AnalyzeLog(log);
    const double via_o = info.h_o - info.h_o_given_m;
    const double via_m = info.h_m - info.h_m_given_o;
    worst_mi = std::max({worst_mi, std::abs(via_o - via_m), std::abs(info.i_om - via_o)});
    if (deterministic) exact_zero = exact_zero && info.i_os_given_m == 0.0;
    for (double h : {info.h_o, info.h_m, info.h_s, info.h_o_given_m, info.h_m_given_o,
                     info.h_s_given_m, info.h_o_given_ms, info.h_s_given_om}) {
      nonneg = nonneg && h >= 0.0;
    }
    for (el::Projection p : {el::Projection::kObject, el::Projection::kColor,
                             el::Projection::kScale, el::Projection::kShape}) {
      const auto e = el::Effectiveness(log, p);
      bounded = bounded && (!e || (*e >= 0.0 && *e <= 1.0));
    }
  }
  Note("max I(O,M) decomposition gap " + Fmt("%.2e", worst_mi) +
       std::string(", I(O,S|M) exactly 0 on deterministic logs: ") + (exact_zero ? "yes" : "no"));
  return {worst_mi <= 1e-9 && exact_zero && nonneg && bounded, "400 synthetic logs"};
}

// --- 9: ESS oracle ---------------------------------------------------------

// The definition read literally: no mutant earns at least as much against t,
// unless it ties there and t beats it against the mutant.
bool LiteralEss(const el::Matrix& m, std::size_t t) {
  for (std::size_t u = 0; u < m.size(); ++u) {
    if (u == t) continue;
    const bool strict = m[t][t] > m[u][t] + el::kEssTolerance;
    const bool tie = std::abs(m[t][t] - m[u][t]) <= el::kEssTolerance;
    if (!(strict || (tie && m[t][u] > m[u][u] + el::kEssTolerance))) return false;
  }
  return true;
}

// Invasion check on integer payoffs: t holds against a population share eps
// of every mutant.
bool InvasionEss(const el::Matrix& m, std::size_t t) {
  const double eps = 1e-3;
  for (std::size_t u = 0; u < m.size(); ++u) {
    if (u == t) continue;
    if (!((1 - eps) * m[t][t] + eps * m[t][u] > (1 - eps) * m[u][t] + eps * m[u][u])) {
      return false;
    }
  }
  return true;
}

Outcome EssOracle() {
  const auto start = Clock::now();
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> small(0, 3);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  int mismatches = 0, ess_found = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 5;
    el::Matrix m(n, std::vector<double>(n));
    const bool integer = trial % 2 == 0;
    for (auto& row : m) {
      for (double& v : row) v = integer ? small(gen) : real(gen);
    }
    const el::EssReport r = el::FindPureEss(m);
    for (std::size_t t = 0; t < n; ++t) {
      const bool want = integer ? InvasionEss(m, t) : LiteralEss(m, t);
      if (r.entries[t].is_ess != want || r.entries[t].is_ess != LiteralEss(m, t)) ++mismatches;
      ess_found += r.entries[t].is_ess;
    }
  }
  Note(std::to_string(ess_found) + " ESS entries, " + std::to_string(mismatches) +
       " mismatches");
  return {mismatches == 0, "1000 matrices, sizes 2-6, " + Fmt("%.2f s", Seconds(start))};
}

// --- 10: tournament ----------------------------------------------------------

Outcome TournamentOrdering() {
  const auto start = Clock::now();
  std::vector<el::BiasType> types;
  for (const char* name : {"default", "scale", "all"}) {
    const Pretrained& p = State().Named(name);
    types.push_back({name, p.vision, p.spec});
  }
  el::TournamentConfig config;
  config.train = el::GameTrainConfig::Desk(el::Scenario::kFrozenVision);
  config.runs_per_pair = kGameSeeds;
  config.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const el::PayoffTable table = el::RunTournament(
      types, State().dataset(), config, 1000, [](const std::string& w) { Note("warning: " + w); });
  const el::Matrix sym = el::Symmetrize(table);
  for (std::size_t i = 0; i < sym.size(); ++i) {
    std::string row = table.types()[i] + ":";
    for (double v : sym[i]) row += " " + Fmt("%.4f", v);
    Note(row);
  }
  const std::size_t all = 2;
  bool column_max = true;
  for (std::size_t u = 0; u < sym.size(); ++u) {
    if (u != all) column_max = column_max && sym[all][all] > sym[u][all];
  }
  el::EssReport report = el::FindPureEss(sym, table.types());
  el::AttachSignificance(report, el::SignificanceByColumn(table, kBootstrap, 0.95, 1001));
  for (const el::EssEntry& e : report.entries) {
    Note(e.type + ": ESS " + (e.is_ess ? "yes" : "no") +
         (e.is_ess ? std::string(", significant ") + (e.significant ? "yes" : "no") : ""));
  }
  const bool flagged = report.entries[all].is_ess;
  const double secs = Seconds(start);
  return {column_max && flagged && table.failures().empty() && secs < 7200.0,
          std::to_string(kGameSeeds) + " runs per cell, " + Fmt("%.0f s", secs)};
}

// --- 11: determinism ---------------------------------------------------------

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> CsvFiles(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      out[fs::relative(e.path(), root).string()] = Slurp(e.path());
    }
  }
  return out;
}

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + EMERGELAB_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome Determinism() {
  const fs::path dir = fs::temp_directory_path() / "emergelab_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json cfg = {
      {"include", "desk"},
      {"dataset", {{"per_class", 6}, {"height", 12}, {"width", 12}}},
      {"pretrain", {{"epochs", 2}, {"rsm_per_class", 4}}},
      {"bias_types", {"default", "scale"}},
      {"pairing", {{"sender", "scale"}, {"receiver", "default"}}},
      {"train", {{"epochs", 2}, {"batch_size", 64}, {"eval_rounds", 300}}},
      {"runs", 2},
      {"analysis", {{"bootstrap_resamples", 200}}},
      {"evolve", {{"types", {"default", "scale"}}, {"runs_per_pair", 1},
                  {"bootstrap_resamples", 200}}},
      {"grid_search", {{"pairs", {"scale-shape"}}, {"budget", 2}, {"accuracy_floor", 0.0}}},
  };
  const fs::path config = dir / "config.json";
  std::ofstream(config) << cfg.dump(2);
  nlohmann::ordered_json sweep = {
      {"include", "config.json"},
      {"runs", 1},
      {"sweep", {{"command", "train"}, {"axes", {{"game.vocab_size", {3, 5}}}}}}};
  std::ofstream(dir / "sweep.json") << sweep.dump(2);

  const std::string c = " --config " + config.string() + " --seed 17";
  const std::vector<std::pair<std::string, std::function<std::string(const fs::path&)>>> cmds = {
      {"dataset", [&](const fs::path& o) { return "dataset" + c + " --out " + (o / "d.bin").string(); }},
      {"pretrain", [&](const fs::path& o) { return "pretrain" + c + " --out " + o.string(); }},
      {"grid-search", [&](const fs::path& o) {
         return "pretrain --grid-search" + c + " --out " + o.string();
       }},
      {"train", [&](const fs::path& o) { return "train" + c + " --out " + o.string(); }},
      {"analyze", [&](const fs::path& o) {
         return "analyze --log " + (dir / "run0" / "train" / "run_000" / "messages.csv").string() +
                " --out " + o.string();
       }},
      {"evolve", [&](const fs::path& o) { return "evolve" + c + " --out " + o.string(); }},
      {"sweep", [&](const fs::path& o) {
         return "sweep --config " + (dir / "sweep.json").string() + " --seed 17 --out " + o.string();
       }},
      {"report", [&](const fs::path& o) {
         return "report " + (dir / "run0" / "train").string() + " --out " + o.string();
       }},
  };
  bool ok = true;
  std::size_t files = 0;
  std::map<std::string, std::string> first_dataset;
  for (const auto& [name, args] : cmds) {
    std::map<std::string, std::string> runs[2];
    std::string binary[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path root = dir / ("run" + std::to_string(k));
      const fs::path out = root / name;
      fs::create_directories(name == "dataset" ? out : root);
      if (RunCli(args(out), dir / "log") != 0) {
        Note(name + ": command failed: " + Slurp(dir / "log"));
        ok = false;
      }
      runs[k] = CsvFiles(out);
      if (name == "dataset") binary[k] = Slurp(out / "d.bin");
    }
    const bool same = runs[0] == runs[1] && binary[0] == binary[1];
    const bool produced = name == "dataset" ? !binary[0].empty() : !runs[0].empty();
    Note(name + ": " + std::to_string(runs[0].size()) + " CSV files, " +
         (same && produced ? "identical" : "DIFFERENT or missing"));
    ok = ok && same && produced;
    files += runs[0].size();
  }
  return {ok, std::to_string(files) + " CSV files compared across two runs per command"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      GradientCorrectness, SmoothingTargets,      PretrainingBias,    ClassificationAccuracy,
      CommunicationSuccess, BiasTransfer,         LanguageToPerception, InformationIdentities,
      EssOracle,           TournamentOrdering,    Determinism};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion ...]  (1-%zu)\n", argv[0], criteria.size());
      return 2;
    }
    selected.insert(n);
  }
  if (selected.empty()) {
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.insert(n);
  }
  int failures = 0;
  std::vector<std::string> summary;
  for (int n : selected) {
    std::printf("[criterion %d]\n", n);
    std::fflush(stdout);
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    char line[512];
    std::snprintf(line, sizeof line, "Criterion %d: %s (%s; %.1f s)", n, o.pass ? "PASS" : "FAIL",
                  o.detail.c_str(), Seconds(start));
    std::printf("%s\n", line);
    std::fflush(stdout);
    summary.push_back(line);
    failures += !o.pass;
  }
  std::printf("\n");
  for (const auto& s : summary) std::printf("%s\n", s.c_str());
  return failures == 0 ? 0 : 1;
}
