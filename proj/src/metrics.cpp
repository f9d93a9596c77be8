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

#include "emergelab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "emergelab/agents.hpp"

namespace emergelab {

// --- Rsm -----------------------------------------------------------------

std::vector<double> Rsm::UpperTriangle() const {
  std::vector<double> out;
  out.reserve(n_ * (n_ - 1) / 2);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) out.push_back(at(i, j));
  }
  return out;
}

double Rsm::MaxAsymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      worst = std::max(worst, std::abs(at(i, j) - at(j, i)));
    }
  }
  return worst;
}

Rsm Rsm::Permuted(std::span<const int> permutation) const {
  if (permutation.size() != n_) {
    throw std::invalid_argument("Rsm::Permuted: permutation size mismatch");
  }
  Rsm out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      out.at(permutation[i], permutation[j]) = at(i, j);
    }
  }
  return out;
}

Rsm RsmFromRepresentations(const nn::Tensor& representations,
                           std::span<const int> classes) {
  if (representations.rank() != 2 ||
      representations.dim(0) != classes.size()) {
    throw ShapeError("RsmFromRepresentations: expected [N, D] with N labels");
  }
  const std::size_t d = representations.dim(1);
  std::vector<std::vector<double>> sums(kNumClasses, std::vector<double>(d));
  std::vector<double> self_dots(kNumClasses, 0.0);
  std::vector<int> counts(kNumClasses, 0);
  for (std::size_t r = 0; r < classes.size(); ++r) {
    const int c = classes[r];
    if (c < 0 || c >= kNumClasses) {
      throw std::out_of_range("RsmFromRepresentations: bad class label");
    }
    std::span<const double> row = representations.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    ++counts[c];
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) sums[c][k] += row[k] / norm;
    self_dots[c] += 1.0;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] < 2) {
      throw std::invalid_argument("RsmFromRepresentations: class " +
                                  std::to_string(c) +
                                  " needs at least 2 representations");
    }
  }
  Rsm rsm(kNumClasses);
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = i; j < kNumClasses; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += sums[i][k] * sums[j][k];
      double value;
      if (i == j) {
        const double n = counts[i];
        value = (dot - self_dots[i]) / (n * (n - 1.0));
      } else {
        value = dot / (static_cast<double>(counts[i]) * counts[j]);
      }
      rsm.at(i, j) = value;
      rsm.at(j, i) = value;
    }
  }
  return rsm;
}

Rsm RsmFromVision(VisionModule& vision, const Dataset& dataset, int per_class,
                  std::uint64_t seed) {
  if (per_class < 2) throw ConfigError("RSM needs >= 2 examples per class");
  Rng rng(seed);
  std::vector<std::size_t> items;
  std::vector<int> labels;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members = dataset.AllOfClass(c);
    if (members.empty()) {
      throw std::invalid_argument("RsmFromVision: class " + std::to_string(c) +
                                  " missing from dataset");
    }
    const std::size_t take =
        std::min(members.size(), static_cast<std::size_t>(per_class));
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + UniformIndex(rng, members.size() - i);
      std::swap(members[i], members[j]);
      items.push_back(members[i]);
      labels.push_back(c);
    }
  }
  return RsmFromRepresentations(vision.Represent(dataset, items), labels);
}

Rsm TemplateRsm() {
  Rsm rsm(kNumClasses);
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = 0; j < kNumClasses; ++j) {
      int shared = 0;
      for (Attribute a : kAllAttributes) {
        shared += AttributeOf(i, a) == AttributeOf(j, a) ? 1 : 0;
      }
      rsm.at(i, j) = shared / 3.0;
    }
  }
  return rsm;
}

Rsm TemplateRsm(Attribute a) {
  Rsm rsm(kNumClasses);
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = 0; j < kNumClasses; ++j) {
      rsm.at(i, j) = AttributeOf(i, a) == AttributeOf(j, a) ? 1.0 : 0.0;
    }
  }
  return rsm;
}

namespace {

std::vector<double> AverageRanks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> Spearman(std::span<const double> x,
                               std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("Spearman: length mismatch");
  }
  if (x.size() < 3) throw std::invalid_argument("Spearman: need >= 3 values");
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> Rsa(const Rsm& a, const Rsm& b) {
  if (a.size() != b.size()) throw std::invalid_argument("Rsa: size mismatch");
  const std::vector<double> ua = a.UpperTriangle();
  const std::vector<double> ub = b.UpperTriangle();
  return Spearman(ua, ub);
}

std::optional<double> BiasProfile::of(Attribute a) const {
  switch (a) {
    case Attribute::kColor: return color;
    case Attribute::kScale: return scale;
    case Attribute::kShape: return shape;
  }
  return std::nullopt;
}

BiasProfile ProfileRsm(const Rsm& rsm) {
  BiasProfile p;
  p.overall = Rsa(rsm, TemplateRsm());
  p.color = Rsa(rsm, TemplateRsm(Attribute::kColor));
  p.scale = Rsa(rsm, TemplateRsm(Attribute::kScale));
  p.shape = Rsa(rsm, TemplateRsm(Attribute::kShape));
  return p;
}

void WriteRsmCsv(const Rsm& rsm, std::ostream& out) {
  std::ostringstream line;
  line.precision(17);
  for (std::size_t i = 0; i < rsm.size(); ++i) {
    for (std::size_t j = 0; j < rsm.size(); ++j) {
      if (j) line << ',';
      line << rsm.at(i, j);
    }
    line << '\n';
  }
  out << line.str();
}

void WriteRsmPgm(const Rsm& rsm, std::ostream& out, int cell_pixels) {
  if (cell_pixels < 1) throw std::invalid_argument("cell_pixels must be >= 1");
  const std::size_t side = rsm.size() * static_cast<std::size_t>(cell_pixels);
  out << "P5\n" << side << ' ' << side << "\n255\n";
  std::string row(side, '\0');
  for (std::size_t i = 0; i < rsm.size(); ++i) {
    for (std::size_t j = 0; j < rsm.size(); ++j) {
      const double v = std::clamp(rsm.at(i, j), -1.0, 1.0);
      const auto level = static_cast<unsigned char>(
          std::lround((v + 1.0) * 0.5 * 255.0));
      for (int k = 0; k < cell_pixels; ++k) row[j * cell_pixels + k] = level;
    }
    for (int k = 0; k < cell_pixels; ++k) out.write(row.data(), row.size());
  }
}

// --- information ---------------------------------------------------------

double Entropy(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw std::invalid_argument("Entropy: negative count");
    total += c;
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return std::max(0.0, h);
}

namespace {

double JointEntropyOf(const JointCounts& joint) {
  std::vector<double> flat;
  for (const auto& row : joint) flat.insert(flat.end(), row.begin(), row.end());
  return Entropy(flat);
}

std::vector<double> ColumnMarginal(const JointCounts& joint) {
  std::vector<double> col;
  for (const auto& row : joint) {
    if (col.size() < row.size()) col.resize(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) col[j] += row[j];
  }
  return col;
}

std::vector<double> RowMarginal(const JointCounts& joint) {
  std::vector<double> r;
  for (const auto& row : joint) {
    r.push_back(std::accumulate(row.begin(), row.end(), 0.0));
  }
  return r;
}

using Key = std::array<std::int64_t, 3>;

// Summed over sorted group sizes, so variables with the same partition of
// the samples get bit-identical entropies.
double EntropyOfKeys(std::vector<Key> keys) {
  if (keys.empty()) return 0.0;
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> groups;
  std::size_t i = 0;
  while (i < keys.size()) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    groups.push_back(j - i);
    i = j;
  }
  std::sort(groups.begin(), groups.end());
  const double n = static_cast<double>(keys.size());
  double h = 0.0;
  for (std::size_t g : groups) {
    const double p = static_cast<double>(g) / n;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

std::vector<Key> Zip(std::span<const std::int64_t> x,
                     std::span<const std::int64_t> y,
                     std::span<const std::int64_t> z) {
  const std::size_t n = x.size();
  if ((!y.empty() && y.size() != n) || (!z.empty() && z.size() != n)) {
    throw std::invalid_argument("information measure: length mismatch");
  }
  std::vector<Key> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = {x[i], y.empty() ? 0 : y[i], z.empty() ? 0 : z[i]};
  }
  return keys;
}

}  // namespace

double ConditionalEntropy(const JointCounts& joint) {
  return std::max(0.0, JointEntropyOf(joint) - Entropy(ColumnMarginal(joint)));
}

double MutualInformation(const JointCounts& joint) {
  return std::max(0.0, Entropy(RowMarginal(joint)) +
                           Entropy(ColumnMarginal(joint)) -
                           JointEntropyOf(joint));
}

double Entropy(std::span<const std::int64_t> x) {
  return EntropyOfKeys(Zip(x, {}, {}));
}

double JointEntropy(std::span<const std::int64_t> x,
                    std::span<const std::int64_t> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("JointEntropy: length mismatch");
  }
  return EntropyOfKeys(Zip(x, y, {}));
}

double JointEntropy(std::span<const std::int64_t> x,
                    std::span<const std::int64_t> y,
                    std::span<const std::int64_t> z) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw std::invalid_argument("JointEntropy: length mismatch");
  }
  return EntropyOfKeys(Zip(x, y, z));
}

double ConditionalEntropy(std::span<const std::int64_t> x,
                          std::span<const std::int64_t> given) {
  return std::max(0.0, JointEntropy(x, given) - Entropy(given));
}

double ConditionalEntropy(std::span<const std::int64_t> x,
                          std::span<const std::int64_t> given_y,
                          std::span<const std::int64_t> given_z) {
  return std::max(0.0, JointEntropy(x, given_y, given_z) -
                           JointEntropy(given_y, given_z));
}

double MutualInformation(std::span<const std::int64_t> x,
                         std::span<const std::int64_t> y) {
  return std::max(0.0, Entropy(x) + Entropy(y) - JointEntropy(x, y));
}

double ConditionalMutualInformation(std::span<const std::int64_t> x,
                                    std::span<const std::int64_t> y,
                                    std::span<const std::int64_t> given) {
  const double v = (JointEntropy(x, given) - JointEntropy(x, y, given)) +
                   (JointEntropy(y, given) - Entropy(given));
  return std::max(0.0, v);
}

double InteractionInformation(std::span<const std::int64_t> x,
                              std::span<const std::int64_t> y,
                              std::span<const std::int64_t> z) {
  return MutualInformation(x, y) - ConditionalMutualInformation(x, y, z);
}

// --- message logs --------------------------------------------------------

double MessageLog::MeanReward() const {
  if (rounds.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rounds) total += r.reward;
  return total / static_cast<double>(rounds.size());
}

std::vector<std::int64_t> MessageLog::MessageCodes() const {
  std::vector<std::int64_t> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) {
    std::int64_t code = 0;
    for (int s : r.message) {
      if (s < 0 || s >= vocab_size) {
        throw std::out_of_range("message symbol outside vocabulary");
      }
      code = code * vocab_size + s;
    }
    out.push_back(code);
  }
  return out;
}

std::vector<std::int64_t> MessageLog::Targets() const {
  std::vector<std::int64_t> out;
  for (const auto& r : rounds) out.push_back(r.target_class);
  return out;
}

std::vector<std::int64_t> MessageLog::TargetAttribute(Attribute a) const {
  std::vector<std::int64_t> out;
  for (const auto& r : rounds) out.push_back(AttributeOf(r.target_class, a));
  return out;
}

std::vector<std::int64_t> MessageLog::Selections() const {
  std::vector<std::int64_t> out;
  for (const auto& r : rounds) out.push_back(r.selected_class);
  return out;
}

void WriteMessageLogCsv(const MessageLog& log, std::ostream& out) {
  out << "round,target_class,message,selected_class,reward\n";
  for (std::size_t i = 0; i < log.rounds.size(); ++i) {
    const MessageRecord& r = log.rounds[i];
    out << i << ',' << r.target_class << ',';
    for (std::size_t t = 0; t < r.message.size(); ++t) {
      if (t) out << '-';
      out << r.message[t];
    }
    out << ',' << r.selected_class << ',' << r.reward << '\n';
  }
}

namespace {

int ParseInt(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw FormatError("message log: bad " + what + " '" + s + "'");
  }
  if (used != s.size()) {
    throw FormatError("message log: bad " + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

MessageLog ReadMessageLogCsv(std::istream& in, int vocab_size) {
  MessageLog log;
  log.vocab_size = vocab_size;
  std::string line;
  if (!std::getline(in, line) ||
      line != "round,target_class,message,selected_class,reward") {
    throw FormatError("message log: missing or unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) {
      throw FormatError("message log: expected 5 fields in '" + line + "'");
    }
    MessageRecord r;
    r.target_class = ParseInt(fields[1], "target_class");
    std::stringstream ms(fields[2]);
    std::string sym;
    while (std::getline(ms, sym, '-')) {
      const int s = ParseInt(sym, "symbol");
      if (s < 0 || s >= vocab_size) {
        throw FormatError("message log: symbol outside vocabulary");
      }
      r.message.push_back(s);
    }
    r.selected_class = ParseInt(fields[3], "selected_class");
    r.reward = ParseInt(fields[4], "reward");
    if (r.target_class < 0 || r.target_class >= kNumClasses ||
        r.selected_class < 0 || r.selected_class >= kNumClasses ||
        (r.reward != 0 && r.reward != 1)) {
      throw FormatError("message log: value out of range in '" + line + "'");
    }
    log.rounds.push_back(std::move(r));
  }
  return log;
}

Projection ProjectionOf(Attribute a) {
  switch (a) {
    case Attribute::kColor: return Projection::kColor;
    case Attribute::kScale: return Projection::kScale;
    case Attribute::kShape: return Projection::kShape;
  }
  return Projection::kObject;
}

std::string ProjectionName(Projection p) {
  switch (p) {
    case Projection::kObject: return "object";
    case Projection::kColor: return "color";
    case Projection::kScale: return "scale";
    case Projection::kShape: return "shape";
  }
  return "?";
}

std::optional<double> Effectiveness(const MessageLog& log, Projection p) {
  std::vector<std::int64_t> o;
  switch (p) {
    case Projection::kObject: o = log.Targets(); break;
    case Projection::kColor: o = log.TargetAttribute(Attribute::kColor); break;
    case Projection::kScale: o = log.TargetAttribute(Attribute::kScale); break;
    case Projection::kShape: o = log.TargetAttribute(Attribute::kShape); break;
  }
  const double h = Entropy(o);
  if (h <= 0.0) return std::nullopt;
  const std::vector<std::int64_t> m = log.MessageCodes();
  return std::clamp(1.0 - ConditionalEntropy(o, m) / h, 0.0, 1.0);
}

std::optional<double> AverageEffectiveness(const MessageLog& log) {
  double total = 0.0;
  for (Attribute a : kAllAttributes) {
    const auto e = Effectiveness(log, ProjectionOf(a));
    if (!e) return std::nullopt;
    total += *e;
  }
  return total / kNumAttributes;
}

LogInformation AnalyzeLog(const MessageLog& log) {
  const auto o = log.Targets();
  const auto m = log.MessageCodes();
  const auto s = log.Selections();
  LogInformation r;
  r.h_o = Entropy(o);
  r.h_m = Entropy(m);
  r.h_s = Entropy(s);
  r.h_o_given_m = ConditionalEntropy(o, m);
  r.h_m_given_o = ConditionalEntropy(m, o);
  r.h_s_given_m = ConditionalEntropy(s, m);
  r.i_om = MutualInformation(o, m);
  r.i_sm = MutualInformation(s, m);
  r.i_os = MutualInformation(o, s);
  r.i_os_given_m = ConditionalMutualInformation(o, s, m);
  r.interaction = InteractionInformation(o, s, m);
  r.h_o_given_ms = ConditionalEntropy(o, m, s);
  r.h_s_given_om = ConditionalEntropy(s, o, m);
  return r;
}

// --- bootstrap -----------------------------------------------------------

double Quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("Quantile: empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

double Mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) /
         static_cast<double>(x.size());
}

double ResampledMean(std::span<const double> x, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += x[UniformIndex(rng, x.size())];
  }
  return total / static_cast<double>(x.size());
}

BootstrapCI Finish(double estimate, std::vector<double> stats, double level) {
  std::sort(stats.begin(), stats.end());
  BootstrapCI ci;
  ci.estimate = estimate;
  ci.level = level;
  ci.resamples = static_cast<int>(stats.size());
  const double alpha = 1.0 - level;
  ci.lower = std::min(Quantile(stats, alpha / 2.0), estimate);
  ci.upper = std::max(Quantile(stats, 1.0 - alpha / 2.0), estimate);
  return ci;
}

void CheckBootstrapArgs(int resamples, double level) {
  if (resamples < 1) throw std::invalid_argument("bootstrap: resamples < 1");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bootstrap: level must lie in (0, 1)");
  }
}

}  // namespace

BootstrapCI BootstrapMean(std::span<const double> samples, int resamples,
                          double level, std::uint64_t seed) {
  CheckBootstrapArgs(resamples, level);
  if (samples.empty()) throw std::invalid_argument("bootstrap: no samples");
  Rng rng(seed);
  std::vector<double> stats(resamples);
  for (double& s : stats) s = ResampledMean(samples, rng);
  return Finish(Mean(samples), std::move(stats), level);
}

BootstrapCI BootstrapDiffOfMeans(std::span<const double> a,
                                 std::span<const double> b, int resamples,
                                 double level, std::uint64_t seed) {
  CheckBootstrapArgs(resamples, level);
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("bootstrap: no samples");
  }
  Rng rng(seed);
  std::vector<double> stats(resamples);
  for (double& s : stats) s = ResampledMean(a, rng) - ResampledMean(b, rng);
  return Finish(Mean(a) - Mean(b), std::move(stats), level);
}

}  // namespace emergelab
