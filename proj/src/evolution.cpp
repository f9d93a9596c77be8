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

#include "emergelab/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace emergelab {

// --- PayoffTable ---------------------------------------------------------

PayoffTable::PayoffTable(std::vector<std::string> types)
    : types_(std::move(types)),
      cells_(types_.size(),
             std::vector<std::vector<double>>(types_.size())) {}

void PayoffTable::Add(std::size_t sender, std::size_t receiver, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw std::invalid_argument("PayoffTable: reward outside [0, 1]");
  }
  cells_.at(sender).at(receiver).push_back(reward);
}

const std::vector<double>& PayoffTable::samples(std::size_t sender,
                                                std::size_t receiver) const {
  return cells_.at(sender).at(receiver);
}

double PayoffTable::Mean(std::size_t sender, std::size_t receiver) const {
  const auto& s = samples(sender, receiver);
  if (s.empty()) {
    throw std::logic_error("PayoffTable: cell (" + types_[sender] + ", " +
                           types_[receiver] + ") has no runs");
  }
  return std::accumulate(s.begin(), s.end(), 0.0) /
         static_cast<double>(s.size());
}

Matrix PayoffTable::MeanMatrix() const {
  Matrix m(size(), std::vector<double>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) m[i][j] = Mean(i, j);
  }
  return m;
}

void PayoffTable::RecordFailure(std::size_t sender, std::size_t receiver,
                                std::string message) {
  failures_.push_back(types_.at(sender) + "->" + types_.at(receiver) + ": " +
                      std::move(message));
}

void WritePayoffCsv(const PayoffTable& table, std::ostream& out) {
  std::ostringstream s;
  s.precision(17);
  s << "sender_type,receiver_type,run,reward\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table.size(); ++j) {
      const auto& cell = table.samples(i, j);
      for (std::size_t k = 0; k < cell.size(); ++k) {
        s << table.types()[i] << ',' << table.types()[j] << ',' << k << ','
          << cell[k] << '\n';
      }
    }
  }
  out << s.str();
}

PayoffTable ReadPayoffCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "sender_type,receiver_type,run,reward") {
    throw FormatError("payoff table: missing or unexpected header");
  }
  struct Row {
    std::string s, r;
    double reward;
  };
  std::vector<Row> rows;
  std::vector<std::string> types;
  auto note = [&](const std::string& t) {
    if (std::find(types.begin(), types.end(), t) == types.end()) {
      types.push_back(t);
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 4) throw FormatError("payoff table: bad row '" + line + "'");
    Row row{f[0], f[1], 0.0};
    try {
      row.reward = std::stod(f[3]);
    } catch (const std::exception&) {
      throw FormatError("payoff table: bad reward '" + f[3] + "'");
    }
    note(row.s);
    note(row.r);
    rows.push_back(std::move(row));
  }
  PayoffTable table(types);
  auto index = [&](const std::string& t) {
    return static_cast<std::size_t>(
        std::find(types.begin(), types.end(), t) - types.begin());
  };
  for (const Row& row : rows) {
    try {
      table.Add(index(row.s), index(row.r), row.reward);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("payoff table: ") + e.what());
    }
  }
  return table;
}

// --- symmetrization and ESS ------------------------------------------------

namespace {

void CheckSquare(const Matrix& m) {
  if (m.empty()) throw std::invalid_argument("payoff matrix is empty");
  for (const auto& row : m) {
    if (row.size() != m.size()) {
      throw std::invalid_argument("payoff matrix is not square");
    }
  }
}

}  // namespace

Matrix Symmetrize(const Matrix& directed) {
  CheckSquare(directed);
  const std::size_t n = directed.size();
  Matrix m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m[i][j] = 0.5 * (directed[i][j] + directed[j][i]);
    }
  }
  return m;
}

Matrix Symmetrize(const PayoffTable& table) {
  return Symmetrize(table.MeanMatrix());
}

EssReport FindPureEss(const Matrix& m, const std::vector<std::string>& types,
                      double tolerance) {
  CheckSquare(m);
  const std::size_t n = m.size();
  EssReport report;
  for (std::size_t t = 0; t < n; ++t) {
    EssEntry e;
    e.type = t < types.size() ? types[t] : std::to_string(t);
    bool stable = true;
    bool all_strict = true;
    for (std::size_t u = 0; u < n && stable; ++u) {
      if (u == t) continue;
      const double diff = m[t][t] - m[u][t];
      if (diff > tolerance) continue;
      all_strict = false;
      const bool tie = std::abs(diff) <= tolerance;
      if (!(tie && m[t][u] - m[u][u] > tolerance)) stable = false;
    }
    e.is_ess = stable;
    e.strict = stable && all_strict;
    e.tie_breaker = stable && !all_strict;
    report.entries.push_back(e);
  }
  return report;
}

std::vector<ColumnComparison> SignificanceByColumn(const PayoffTable& table,
                                                   int resamples, double level,
                                                   std::uint64_t seed) {
  if (resamples < 1) throw std::invalid_argument("resamples must be >= 1");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("level must lie in (0, 1)");
  }
  const std::size_t n = table.size();
  auto resampled_mean = [](const std::vector<double>& x, Rng& rng) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      total += x[UniformIndex(rng, x.size())];
    }
    return total / static_cast<double>(x.size());
  };
  std::vector<ColumnComparison> out;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t u = 0; u < n; ++u) {
      if (u == t) continue;
      const auto& tt = table.samples(t, t);
      const auto& ut = table.samples(u, t);
      const auto& tu = table.samples(t, u);
      const double estimate =
          table.Mean(t, t) - 0.5 * (table.Mean(u, t) + table.Mean(t, u));
      Rng rng(DeriveSeed(seed, t, u));
      std::vector<double> stats(resamples);
      for (double& s : stats) {
        const double a = resampled_mean(tt, rng);
        const double b = resampled_mean(ut, rng);
        const double c = resampled_mean(tu, rng);
        s = a - 0.5 * (b + c);
      }
      std::sort(stats.begin(), stats.end());
      ColumnComparison cmp;
      cmp.column = t;
      cmp.mutant = u;
      cmp.difference.estimate = estimate;
      cmp.difference.level = level;
      cmp.difference.resamples = resamples;
      const double alpha = 1.0 - level;
      cmp.difference.lower = std::min(Quantile(stats, alpha / 2.0), estimate);
      cmp.difference.upper =
          std::max(Quantile(stats, 1.0 - alpha / 2.0), estimate);
      out.push_back(cmp);
    }
  }
  return out;
}

void AttachSignificance(EssReport& report,
                        const std::vector<ColumnComparison>& comparisons) {
  for (std::size_t t = 0; t < report.entries.size(); ++t) {
    EssEntry& e = report.entries[t];
    if (!e.is_ess) {
      e.significant = false;
      continue;
    }
    bool all = true;
    bool any = false;
    for (const ColumnComparison& c : comparisons) {
      if (c.column != t) continue;
      any = true;
      if (!(c.difference.lower > 0.0)) all = false;
    }
    e.significant = any && all;
  }
}

void WriteEssJson(const EssReport& report,
                  const std::vector<ColumnComparison>& comparisons,
                  const std::vector<std::string>& types, std::ostream& out) {
  nlohmann::ordered_json j;
  j["types"] = types;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const EssEntry& e : report.entries) {
    entries.push_back({{"type", e.type},
                       {"is_ess", e.is_ess},
                       {"strict", e.strict},
                       {"tie_breaker", e.tie_breaker},
                       {"significant", e.significant}});
  }
  j["entries"] = entries;
  nlohmann::ordered_json cmps = nlohmann::ordered_json::array();
  for (const ColumnComparison& c : comparisons) {
    cmps.push_back({{"column", types.at(c.column)},
                    {"mutant", types.at(c.mutant)},
                    {"estimate", c.difference.estimate},
                    {"lower", c.difference.lower},
                    {"upper", c.difference.upper},
                    {"level", c.difference.level},
                    {"excludes_zero", c.difference.ExcludesZero()}});
  }
  j["column_comparisons"] = cmps;
  out << j.dump(2) << '\n';
}

// --- tournament ----------------------------------------------------------

PayoffTable RunTournament(const std::vector<BiasType>& types,
                          const Dataset& dataset,
                          const TournamentConfig& config, std::uint64_t seed,
                          const WarningSink& warn) {
  if (types.empty()) throw ConfigError("tournament needs at least one type");
  if (config.runs_per_pair < 1) throw ConfigError("runs_per_pair must be >= 1");
  config.game.Validate();
  config.train.Validate();
  const std::size_t n = types.size();
  const auto runs = static_cast<std::size_t>(config.runs_per_pair);
  struct Cell {
    std::size_t s = 0, r = 0, run = 0;
    bool ok = false;
    double reward = 0.0;
    std::string error;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < runs; ++k) {
        Cell c;
        c.s = s;
        c.r = r;
        c.run = k;
        cells.push_back(std::move(c));
      }
    }
  }
  auto run_cell = [&](Cell& c) {
    try {
      const std::uint64_t cell_seed = DeriveSeed(seed, c.s, c.r, c.run);
      Rng rng(DeriveSeed(cell_seed, 0));
      Agent sender = Agent::WithVision(Role::kSender, types[c.s].vision,
                                       config.game.vocab_size, rng);
      sender.vision_spec = types[c.s].spec;
      Agent receiver = Agent::WithVision(Role::kReceiver, types[c.r].vision,
                                         config.game.vocab_size, rng);
      receiver.vision_spec = types[c.r].spec;
      const TrainLog log = RunScenario(sender, receiver, dataset, config.game,
                                       config.train, cell_seed);
      c.reward = log.test_reward;
      c.ok = true;
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  };
  const std::size_t workers = static_cast<std::size_t>(
      std::clamp(config.workers, 1, static_cast<int>(cells.size())));
  if (workers == 1) {
    for (Cell& c : cells) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
          run_cell(cells[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<std::string> names;
  for (const BiasType& t : types) names.push_back(t.name);
  PayoffTable table(names);
  for (const Cell& c : cells) {
    if (c.ok) {
      table.Add(c.s, c.r, c.reward);
    } else {
      table.RecordFailure(c.s, c.r, c.error);
      if (warn) {
        warn("tournament cell " + names[c.s] + "->" + names[c.r] + " run " +
             std::to_string(c.run) + " failed: " + c.error);
      }
    }
  }
  return table;
}

}  // namespace emergelab
