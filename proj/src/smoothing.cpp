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

#include "emergelab/smoothing.hpp"

#include <cmath>

namespace emergelab {

void SmoothingSpec::Validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) {
    throw ConfigError("smoothing sigma must lie in [0, 1]");
  }
  if (condition == Condition::kMixed) {
    if (pair[0] == pair[1]) {
      throw ConfigError("mixed smoothing needs two distinct attributes");
    }
    if (weights[0] < 0.0 || weights[1] < 0.0 ||
        std::abs(weights[0] + weights[1] - 1.0) > 1e-9) {
      throw ConfigError("mixed smoothing weights must be >= 0 and sum to 1");
    }
  }
}

std::string SmoothingSpec::Name() const {
  switch (condition) {
    case Condition::kDefault: return "default";
    case Condition::kColor: return "color";
    case Condition::kScale: return "scale";
    case Condition::kShape: return "shape";
    case Condition::kAll: return "all";
    case Condition::kMixed:
      return AttributeName(pair[0]) + "-" + AttributeName(pair[1]);
  }
  return "?";
}

SmoothingSpec SmoothingSpec::Single(Attribute a, double sigma) {
  SmoothingSpec s;
  s.condition = a == Attribute::kColor   ? Condition::kColor
                : a == Attribute::kScale ? Condition::kScale
                                         : Condition::kShape;
  s.sigma = sigma;
  return s;
}

SmoothingSpec SmoothingSpec::All(double sigma) {
  SmoothingSpec s;
  s.condition = Condition::kAll;
  s.sigma = sigma;
  return s;
}

SmoothingSpec SmoothingSpec::Mixed(Attribute first, Attribute second,
                                   std::array<double, 2> weights,
                                   double sigma) {
  SmoothingSpec s;
  s.condition = Condition::kMixed;
  s.sigma = sigma;
  s.pair = {first, second};
  s.weights = weights;
  s.Validate();
  return s;
}

SmoothingSpec SmoothingSpec::Named(const std::string& name) {
  if (name == "default") return Default();
  if (name == "color") return Single(Attribute::kColor);
  if (name == "scale") return Single(Attribute::kScale);
  if (name == "shape") return Single(Attribute::kShape);
  if (name == "all") return All();
  if (name == "color-scale") {
    return Mixed(Attribute::kColor, Attribute::kScale, {0.30, 0.70});
  }
  if (name == "color-shape") {
    return Mixed(Attribute::kColor, Attribute::kShape, {0.25, 0.75});
  }
  if (name == "scale-shape") {
    return Mixed(Attribute::kScale, Attribute::kShape, {0.75, 0.25});
  }
  throw ConfigError("unknown bias type '" + name + "'");
}

std::vector<Attribute> SmoothingSpec::Enforced() const {
  switch (condition) {
    case Condition::kDefault: return {};
    case Condition::kColor: return {Attribute::kColor};
    case Condition::kScale: return {Attribute::kScale};
    case Condition::kShape: return {Attribute::kShape};
    case Condition::kAll:
      return {kAllAttributes.begin(), kAllAttributes.end()};
    case Condition::kMixed: return {pair[0], pair[1]};
  }
  return {};
}

TargetDistribution OneHot(int class_id) {
  AttributesOf(class_id);  // range check
  TargetDistribution t{};
  t[class_id] = 1.0;
  return t;
}

TargetDistribution RelationalComponent(int class_id, Attribute a) {
  const int value = AttributeOf(class_id, a);
  TargetDistribution t{};
  int n = 0;
  for (int j = 0; j < kNumClasses; ++j) {
    if (AttributeOf(j, a) == value) ++n;
  }
  const double w = 1.0 / (n - 1);
  for (int j = 0; j < kNumClasses; ++j) {
    if (j != class_id && AttributeOf(j, a) == value) t[j] = w;
  }
  return t;
}

TargetDistribution RelationalComponentAll(int class_id) {
  TargetDistribution t{};
  for (Attribute a : kAllAttributes) {
    const TargetDistribution c = RelationalComponent(class_id, a);
    for (int j = 0; j < kNumClasses; ++j) t[j] += c[j] / kNumAttributes;
  }
  return t;
}

TargetDistribution RelationalComponentMixed(int class_id,
                                            std::array<Attribute, 2> pair,
                                            std::array<double, 2> weights) {
  const TargetDistribution a = RelationalComponent(class_id, pair[0]);
  const TargetDistribution b = RelationalComponent(class_id, pair[1]);
  TargetDistribution t{};
  for (int j = 0; j < kNumClasses; ++j) {
    t[j] = weights[0] * a[j] + weights[1] * b[j];
  }
  return t;
}

TargetDistribution SmoothedTarget(int class_id, const SmoothingSpec& spec) {
  spec.Validate();
  TargetDistribution relational;
  switch (spec.condition) {
    case Condition::kDefault:
      return OneHot(class_id);
    case Condition::kColor:
      relational = RelationalComponent(class_id, Attribute::kColor);
      break;
    case Condition::kScale:
      relational = RelationalComponent(class_id, Attribute::kScale);
      break;
    case Condition::kShape:
      relational = RelationalComponent(class_id, Attribute::kShape);
      break;
    case Condition::kAll:
      relational = RelationalComponentAll(class_id);
      break;
    case Condition::kMixed:
      relational = RelationalComponentMixed(class_id, spec.pair, spec.weights);
      break;
  }
  TargetDistribution y = OneHot(class_id);
  for (int j = 0; j < kNumClasses; ++j) {
    y[j] = spec.sigma * relational[j] + (1.0 - spec.sigma) * y[j];
  }
  return y;
}

}  // namespace emergelab
