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

// Relational label smoothing. A smoothed target is
//
//   y = sigma * y_r + (1 - sigma) * y_0
//
// where y_0 is one-hot and y_r spreads unit mass uniformly over the other
// classes that share an attribute value with the true class (the 15 other
// members of its 16-class group). Multi-attribute conditions average the
// per-attribute components, optionally with explicit weights.

#ifndef EMERGELAB_SMOOTHING_HPP_
#define EMERGELAB_SMOOTHING_HPP_

#include <array>
#include <string>
#include <vector>

#include "emergelab/shapes_world.hpp"

namespace emergelab {

using TargetDistribution = std::array<double, kNumClasses>;

enum class Condition { kDefault, kColor, kScale, kShape, kAll, kMixed };

struct SmoothingSpec {
  Condition condition = Condition::kDefault;
  double sigma = 0.0;
  // Only for kMixed.
  std::array<Attribute, 2> pair = {Attribute::kColor, Attribute::kScale};
  std::array<double, 2> weights = {0.5, 0.5};

  // Throws ConfigError on sigma outside [0, 1], negative weights, weights
  // not summing to 1, or a mixed pair naming one attribute twice.
  void Validate() const;

  // "default", "color", "scale", "shape", "all", "color-scale", ...
  std::string Name() const;

  static SmoothingSpec Default() { return {}; }
  static SmoothingSpec Single(Attribute a, double sigma = 0.6);
  static SmoothingSpec All(double sigma = 0.8);
  static SmoothingSpec Mixed(Attribute first, Attribute second,
                             std::array<double, 2> weights,
                             double sigma = 0.8);

  // Named bias types used across experiments: default/color/scale/shape at
  // sigma 0.6, all at 0.8, and the three mixed types with their selected
  // grid-search weights at 0.8.
  static SmoothingSpec Named(const std::string& name);

  // Attributes whose similarity structure this spec enforces.
  std::vector<Attribute> Enforced() const;
};

TargetDistribution OneHot(int class_id);
// 1/15 on every other class sharing the attribute value, 0 elsewhere.
TargetDistribution RelationalComponent(int class_id, Attribute a);
TargetDistribution RelationalComponentAll(int class_id);
TargetDistribution RelationalComponentMixed(int class_id,
                                            std::array<Attribute, 2> pair,
                                            std::array<double, 2> weights);
TargetDistribution SmoothedTarget(int class_id, const SmoothingSpec& spec);

}  // namespace emergelab

#endif  // EMERGELAB_SMOOTHING_HPP_
