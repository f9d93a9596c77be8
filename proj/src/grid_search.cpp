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

#include "emergelab/grid_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "emergelab/agents.hpp"

namespace emergelab {

void GridSearchConfig::Validate() const {
  if (sigmas.empty() || weights.empty()) {
    throw ConfigError("grid search: empty sigma or weight grid");
  }
  for (double sigma : sigmas) {
    if (!(sigma >= 0.0 && sigma <= 1.0)) {
      throw ConfigError("grid search: sigma outside [0, 1]");
    }
  }
  for (const auto& w : weights) {
    if (!(w[0] >= 0.0 && w[1] >= 0.0) || std::abs(w[0] + w[1] - 1.0) > 1e-9) {
      throw ConfigError("grid search: weights must be nonnegative and sum to 1");
    }
  }
  pretrain.Validate();
  if (budget < 0) throw ConfigError("grid search: budget must be >= 0");
  if (rsm_per_class < 2) {
    throw ConfigError("grid search: rsm_per_class must be >= 2");
  }
  if (!(accuracy_floor >= 0.0 && accuracy_floor <= 1.0)) {
    throw ConfigError("grid search: accuracy_floor outside [0, 1]");
  }
}

std::vector<std::array<double, 2>> GridSearchConfig::DefaultWeights() {
  std::vector<std::array<double, 2>> w;
  for (int i = 1; i <= 19; ++i) {
    const double a = 0.05 * i;
    w.push_back({a, 1.0 - a});
  }
  return w;
}

std::optional<double> MixedBiasScore(const BiasProfile& profile,
                                     std::array<Attribute, 2> pair) {
  Attribute other = Attribute::kColor;
  for (Attribute a : {Attribute::kColor, Attribute::kScale, Attribute::kShape}) {
    if (a != pair[0] && a != pair[1]) other = a;
  }
  const auto a = profile.of(pair[0]);
  const auto b = profile.of(pair[1]);
  const auto c = profile.of(other);
  if (!a || !b || !c) return std::nullopt;
  return std::min(*a, *b) - std::abs(*a - *b) - std::abs(*c);
}

GridSearchResult GridSearchMixed(const Dataset& dataset,
                                 std::array<Attribute, 2> pair,
                                 const GridSearchConfig& config,
                                 std::uint64_t seed) {
  config.Validate();
  GridSearchResult result;
  result.pair = pair;
  for (double sigma : config.sigmas) {
    for (const auto& w : config.weights) {
      GridCandidate c;
      c.spec = SmoothingSpec::Mixed(pair[0], pair[1], w, sigma);
      c.spec.Validate();
      result.candidates.push_back(c);
    }
  }
  if (config.budget > 0 &&
      result.candidates.size() > static_cast<std::size_t>(config.budget)) {
    result.candidates.resize(config.budget);
  }
  auto run = [&](std::size_t i) {
    GridCandidate& c = result.candidates[i];
    try {
      Rng rng(DeriveSeed(seed, i));
      VisionModule vision = VisionModule::Create(dataset.image_size(), rng);
      const PretrainResult pr =
          PretrainVision(vision, dataset, c.spec, config.pretrain, rng);
      c.test_accuracy = pr.test_accuracy;
      c.profile = ProfileRsm(RsmFromVision(vision, dataset,
                                           config.rsm_per_class,
                                           DeriveSeed(seed, i, 1)));
      const auto score = MixedBiasScore(c.profile, pair);
      c.score = score ? *score : std::numeric_limits<double>::quiet_NaN();
      c.eligible = score.has_value() && c.test_accuracy >= config.accuracy_floor;
    } catch (const std::exception& e) {
      c.error = e.what();
      c.eligible = false;
      c.score = std::numeric_limits<double>::quiet_NaN();
    }
  };
  const std::size_t n = result.candidates.size();
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(config.workers, 1)), 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const GridCandidate& c = result.candidates[i];
    if (!c.eligible) continue;
    if (!result.selected || c.score > result.candidates[*result.selected].score) {
      result.selected = i;
    }
  }
  return result;
}

void WriteGridSearchCsv(const GridSearchResult& result, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(17);
    if (v) s << *v;
    return s.str();
  };
  std::ostringstream s;
  s.precision(17);
  s << "sigma,w1,w2,test_accuracy,rsa_overall,rsa_color,rsa_scale,rsa_shape,"
       "eligible,score,selected\n";
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const GridCandidate& c = result.candidates[i];
    s << c.spec.sigma << ',' << c.spec.weights[0] << ',' << c.spec.weights[1]
      << ',' << c.test_accuracy << ',' << opt(c.profile.overall) << ','
      << opt(c.profile.color) << ',' << opt(c.profile.scale) << ','
      << opt(c.profile.shape) << ',' << (c.eligible ? 1 : 0) << ',';
    if (!std::isnan(c.score)) s << c.score;
    s << ',' << (result.selected == i ? 1 : 0) << '\n';
  }
  out << s.str();
}

}  // namespace emergelab
