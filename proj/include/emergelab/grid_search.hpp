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

// Grid search over (sigma, weights) for two-attribute smoothing specs.
//
// Each candidate is pretrained and profiled. Candidates below the accuracy
// floor are ineligible. Eligible candidates are scored by
//
//   min(enforced RSA) - |enforced RSA difference| - |unenforced RSA|
//
// and the best score wins; ties go to the earlier candidate.

#ifndef EMERGELAB_GRID_SEARCH_HPP_
#define EMERGELAB_GRID_SEARCH_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "emergelab/metrics.hpp"
#include "emergelab/shapes_world.hpp"
#include "emergelab/smoothing.hpp"
#include "emergelab/training.hpp"

namespace emergelab {

struct GridSearchConfig {
  std::vector<double> sigmas = {0.6, 0.7, 0.8};
  // Default: [0.05, 0.95], [0.10, 0.90], ..., [0.95, 0.05].
  std::vector<std::array<double, 2>> weights = DefaultWeights();
  PretrainConfig pretrain = PretrainConfig::Desk();
  double accuracy_floor = 0.90;
  int rsm_per_class = 50;
  // Maximum number of candidates trained, 0 for the full grid.
  int budget = 0;
  int workers = 1;

  void Validate() const;
  static std::vector<std::array<double, 2>> DefaultWeights();
};

struct GridCandidate {
  SmoothingSpec spec;
  double test_accuracy = 0.0;
  BiasProfile profile;
  bool eligible = false;
  // NaN when an RSA score is undefined.
  double score = 0.0;
  // Non-empty when pretraining failed.
  std::string error;
};

struct GridSearchResult {
  std::array<Attribute, 2> pair{};
  std::vector<GridCandidate> candidates;
  std::optional<std::size_t> selected;
  const GridCandidate* best() const {
    return selected ? &candidates[*selected] : nullptr;
  }
};

// Score of a profile for the given enforced pair; nullopt when any RSA is
// undefined.
std::optional<double> MixedBiasScore(const BiasProfile& profile,
                                     std::array<Attribute, 2> pair);

// Trains candidates in grid order (sigma-major). Failed candidates are
// recorded and skipped. Leaves selected empty when no candidate meets the
// accuracy floor.
GridSearchResult GridSearchMixed(const Dataset& dataset,
                                 std::array<Attribute, 2> pair,
                                 const GridSearchConfig& config,
                                 std::uint64_t seed);

// Header: sigma,w1,w2,test_accuracy,rsa_overall,rsa_color,rsa_scale,
// rsa_shape,eligible,score,selected.
void WriteGridSearchCsv(const GridSearchResult& result, std::ostream& out);

}  // namespace emergelab

#endif  // EMERGELAB_GRID_SEARCH_HPP_
