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

// Representational similarity, plug-in information measures over game logs
// and percentile bootstrap intervals. All entropies are in bits.

#ifndef EMERGELAB_METRICS_HPP_
#define EMERGELAB_METRICS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emergelab/shapes_world.hpp"
#include "emergelab/tensor.hpp"

namespace emergelab {

class VisionModule;

// --- similarity matrices -------------------------------------------------

class Rsm {
 public:
  Rsm() = default;
  explicit Rsm(std::size_t n, double fill = 0.0)
      : n_(n), values_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& at(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const { return values_; }

  std::vector<double> UpperTriangle() const;
  double MaxAsymmetry() const;
  // The same matrix with classes relabelled: out(p[i], p[j]) = in(i, j).
  Rsm Permuted(std::span<const int> permutation) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// Entry (i, j): mean cosine similarity over all cross pairs of class i and
// class j representations; the diagonal averages the distinct within-class
// pairs. Zero vectors have cosine 0 with everything. representations is
// [N, D] with one class label per row; every class needs >= 2 rows.
Rsm RsmFromRepresentations(const nn::Tensor& representations,
                           std::span<const int> classes);

// Samples min(per_class, available) items of every class (all splits) and
// builds the RSM of the module's representations.
Rsm RsmFromVision(VisionModule& vision, const Dataset& dataset, int per_class,
                  std::uint64_t seed);

// Cosines of 3-hot attribute encodings.
Rsm TemplateRsm();
// Cosines of 1-hot encodings of one attribute: 1 on a shared value, else 0.
Rsm TemplateRsm(Attribute a);

// Pearson correlation of average ranks. Throws std::invalid_argument on
// length mismatch or fewer than 3 values; nullopt when either ranking is
// constant.
std::optional<double> Spearman(std::span<const double> x,
                               std::span<const double> y);

// Spearman over the strictly upper triangles.
std::optional<double> Rsa(const Rsm& a, const Rsm& b);

struct BiasProfile {
  std::optional<double> overall;  // against the 3-hot template
  std::optional<double> color;
  std::optional<double> scale;
  std::optional<double> shape;
  std::optional<double> of(Attribute a) const;
};
BiasProfile ProfileRsm(const Rsm& rsm);

void WriteRsmCsv(const Rsm& rsm, std::ostream& out);
// 8-bit binary PGM, similarity -1 -> 0 and 1 -> 255, each cell scaled up by
// an integer factor.
void WriteRsmPgm(const Rsm& rsm, std::ostream& out, int cell_pixels = 4);

// --- information measures ------------------------------------------------

// Entropy of a histogram (any nonnegative weights).
double Entropy(std::span<const double> counts);

// joint[x][y]: H(X | Y) and I(X; Y) from a joint histogram.
using JointCounts = std::vector<std::vector<double>>;
double ConditionalEntropy(const JointCounts& joint);
double MutualInformation(const JointCounts& joint);

// Empirical versions over paired samples of discrete codes.
double Entropy(std::span<const std::int64_t> x);
double JointEntropy(std::span<const std::int64_t> x,
                    std::span<const std::int64_t> y);
double JointEntropy(std::span<const std::int64_t> x,
                    std::span<const std::int64_t> y,
                    std::span<const std::int64_t> z);
double ConditionalEntropy(std::span<const std::int64_t> x,
                          std::span<const std::int64_t> given);
double ConditionalEntropy(std::span<const std::int64_t> x,
                          std::span<const std::int64_t> given_y,
                          std::span<const std::int64_t> given_z);
double MutualInformation(std::span<const std::int64_t> x,
                         std::span<const std::int64_t> y);
double ConditionalMutualInformation(std::span<const std::int64_t> x,
                                    std::span<const std::int64_t> y,
                                    std::span<const std::int64_t> given);
// I(X; Y; Z) = I(X; Y) - I(X; Y | Z).
double InteractionInformation(std::span<const std::int64_t> x,
                              std::span<const std::int64_t> y,
                              std::span<const std::int64_t> z);

// --- message logs --------------------------------------------------------

struct MessageRecord {
  int target_class = 0;
  std::vector<int> message;
  int selected_class = 0;
  int reward = 0;
  bool operator==(const MessageRecord&) const = default;
};

struct MessageLog {
  int vocab_size = 4;
  std::vector<MessageRecord> rounds;

  double MeanReward() const;
  // Base-|V| integer code of each message.
  std::vector<std::int64_t> MessageCodes() const;
  std::vector<std::int64_t> Targets() const;
  std::vector<std::int64_t> TargetAttribute(Attribute a) const;
  std::vector<std::int64_t> Selections() const;
  bool operator==(const MessageLog&) const = default;
};

// Header: round,target_class,message,selected_class,reward. Messages are
// symbols joined by '-'.
void WriteMessageLogCsv(const MessageLog& log, std::ostream& out);
// Throws FormatError on malformed rows.
MessageLog ReadMessageLogCsv(std::istream& in, int vocab_size);

// Projection of the target object used by Effectiveness.
enum class Projection { kObject, kColor, kScale, kShape };
Projection ProjectionOf(Attribute a);
std::string ProjectionName(Projection p);

// E = 1 - H(O | M) / H(O); nullopt when H(O) = 0.
std::optional<double> Effectiveness(const MessageLog& log, Projection p);
// Mean of the three per-attribute effectiveness scores.
std::optional<double> AverageEffectiveness(const MessageLog& log);

struct LogInformation {
  double h_o = 0, h_m = 0, h_s = 0;
  double h_o_given_m = 0, h_m_given_o = 0, h_s_given_m = 0;
  double i_om = 0, i_sm = 0, i_os = 0;
  double i_os_given_m = 0;
  double interaction = 0;  // I(O; M; S)
  double h_o_given_ms = 0, h_s_given_om = 0;
};
LogInformation AnalyzeLog(const MessageLog& log);

// --- bootstrap -----------------------------------------------------------

struct BootstrapCI {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  int resamples = 0;
  bool ExcludesZero() const { return lower > 0.0 || upper < 0.0; }
};

// Percentile bootstrap of the sample mean. The interval is widened, if
// needed, to contain the point estimate.
BootstrapCI BootstrapMean(std::span<const double> samples, int resamples,
                          double level, std::uint64_t seed);
// mean(a) - mean(b) with a and b resampled independently.
BootstrapCI BootstrapDiffOfMeans(std::span<const double> a,
                                 std::span<const double> b, int resamples,
                                 double level, std::uint64_t seed);

// Linear-interpolation (type 7) quantile of sorted data.
double Quantile(std::span<const double> sorted, double q);

}  // namespace emergelab

#endif  // EMERGELAB_METRICS_HPP_
