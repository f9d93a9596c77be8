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

// Population-game view of pairwise training outcomes.
//
// A PayoffTable holds directed test rewards r[s][r] (sender type s,
// receiver type r), one sample per run. Symmetrizing averages both role
// assignments. A type t is a pure evolutionarily stable state when every
// mutant t' satisfies M[t][t] > M[t'][t], or M[t][t] = M[t'][t] and
// M[t][t'] > M[t'][t'].

#ifndef EMERGELAB_EVOLUTION_HPP_
#define EMERGELAB_EVOLUTION_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "emergelab/agents.hpp"
#include "emergelab/game.hpp"
#include "emergelab/metrics.hpp"
#include "emergelab/training.hpp"

namespace emergelab {

using Matrix = std::vector<std::vector<double>>;

class PayoffTable {
 public:
  PayoffTable() = default;
  explicit PayoffTable(std::vector<std::string> types);

  const std::vector<std::string>& types() const { return types_; }
  std::size_t size() const { return types_.size(); }

  // Rewards must lie in [0, 1].
  void Add(std::size_t sender, std::size_t receiver, double reward);
  const std::vector<double>& samples(std::size_t sender,
                                     std::size_t receiver) const;
  // Throws std::logic_error for a cell without runs.
  double Mean(std::size_t sender, std::size_t receiver) const;
  Matrix MeanMatrix() const;

  void RecordFailure(std::size_t sender, std::size_t receiver,
                     std::string message);
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> types_;
  std::vector<std::vector<std::vector<double>>> cells_;
  std::vector<std::string> failures_;
};

// Header: sender_type,receiver_type,run,reward.
void WritePayoffCsv(const PayoffTable& table, std::ostream& out);
// Throws FormatError on malformed rows.
PayoffTable ReadPayoffCsv(std::istream& in);

// M[t][t'] = (r[t][t'] + r[t'][t]) / 2.
Matrix Symmetrize(const Matrix& directed);
Matrix Symmetrize(const PayoffTable& table);

struct EssEntry {
  std::string type;
  bool is_ess = false;
  // Every mutant was beaten through the strict condition.
  bool strict = false;
  // At least one mutant needed the tie-breaker.
  bool tie_breaker = false;
  // All column comparisons exclude 0 (set by AttachSignificance).
  bool significant = false;
};

struct EssReport {
  std::vector<EssEntry> entries;
};

inline constexpr double kEssTolerance = 1e-9;

// Throws std::invalid_argument for a non-square or empty matrix.
EssReport FindPureEss(const Matrix& m,
                      const std::vector<std::string>& types = {},
                      double tolerance = kEssTolerance);

struct ColumnComparison {
  std::size_t column = 0;  // resident type t
  std::size_t mutant = 0;  // t'
  BootstrapCI difference;  // of M[t][t] - M[t'][t]
};

// Bootstrap CIs of M[t][t] - M[t'][t] for every column t and mutant t',
// resampling each directed cell independently.
std::vector<ColumnComparison> SignificanceByColumn(const PayoffTable& table,
                                                   int resamples, double level,
                                                   std::uint64_t seed);

// Flags ESS entries whose column comparisons all exclude 0.
void AttachSignificance(EssReport& report,
                        const std::vector<ColumnComparison>& comparisons);

void WriteEssJson(const EssReport& report,
                  const std::vector<ColumnComparison>& comparisons,
                  const std::vector<std::string>& types, std::ostream& out);

struct BiasType {
  std::string name;
  VisionModule vision;
  SmoothingSpec spec;
};

struct TournamentConfig {
  GameConfig game;
  GameTrainConfig train;
  int runs_per_pair = 5;
  int workers = 1;
};

// Called with a warning message when a cell fails; may be empty.
using WarningSink = std::function<void(const std::string&)>;

// Trains every ordered (sender type, receiver type) pair runs_per_pair
// times under the configured scenario and records the test rewards. Each
// run's seed is derived from (seed, sender, receiver, run), so results do
// not depend on the worker count. Failed runs are recorded and excluded.
PayoffTable RunTournament(const std::vector<BiasType>& types,
                          const Dataset& dataset,
                          const TournamentConfig& config, std::uint64_t seed,
                          const WarningSink& warn = {});

}  // namespace emergelab

#endif  // EMERGELAB_EVOLUTION_HPP_
