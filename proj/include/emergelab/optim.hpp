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

#ifndef EMERGELAB_OPTIM_HPP_
#define EMERGELAB_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emergelab/tensor.hpp"

namespace emergelab::nn {

// Plain gradient descent. Non-trainable parameters are skipped.
void SgdStep(std::span<Parameter* const> params, double lr);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Bias-corrected Adam. The state is sized on first use and must then be
// used with the same parameter list.
void AdamStep(std::span<Parameter* const> params, AdamState& state, double lr);

// Parameter checkpoint: "EMRGW1", u32 count, then per parameter u32 name
// length, name bytes, u32 rank, rank x u32 dims, little-endian f64 values.
void SaveParameters(const std::string& path,
                    std::span<const Parameter* const> params);
std::vector<Parameter> ReadParameters(const std::string& path);
// Loads values by name; every parameter in `params` must be present with
// the same shape.
void LoadParameters(const std::string& path, std::span<Parameter* const> params);

}  // namespace emergelab::nn

#endif  // EMERGELAB_OPTIM_HPP_
