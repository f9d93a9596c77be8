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

#include "emergelab/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "binary_io.hpp"
#include "emergelab/common.hpp"

namespace emergelab::nn {

void SgdStep(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (!p->trainable || p->grad.size() != p->value.size()) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] -= lr * p->grad[i];
    }
  }
}

void AdamStep(std::span<Parameter* const> params, AdamState& state, double lr) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape(), 0.0);
      state.v.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("AdamStep: state built for a different list");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter* p = params[k];
    if (!p->trainable || p->grad.size() != p->value.size()) continue;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p->value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

namespace {
constexpr char kMagic[] = "EMRGW1";
}

void SaveParameters(const std::string& path,
                    std::span<const Parameter* const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  BinaryWriter w(out);
  w.Bytes(kMagic, 6);
  w.U32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.U32(static_cast<std::uint32_t>(p->name.size()));
    w.Bytes(p->name.data(), p->name.size());
    w.U32(static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape()) w.U32(static_cast<std::uint32_t>(d));
    for (double v : p->value.values()) w.F64(v);
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Parameter> ReadParameters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  BinaryReader r(in, path);
  char magic[6];
  r.Bytes(magic, 6);
  if (std::memcmp(magic, kMagic, 6) != 0) {
    throw FormatError(path + ": bad magic, expected EMRGW1");
  }
  const std::uint32_t count = r.U32();
  std::vector<Parameter> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = r.U32();
    if (len > 4096) throw FormatError(path + ": implausible name length");
    std::string name(len, '\0');
    r.Bytes(name.data(), len);
    const std::uint32_t rank = r.U32();
    if (rank > 8) throw FormatError(path + ": implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.U32();
    if (ShapeSize(shape) > (1u << 28)) {
      throw FormatError(path + ": implausible parameter size");
    }
    Tensor value(shape);
    for (double& v : value.values()) v = r.F64();
    out.emplace_back(std::move(name), std::move(value));
  }
  return out;
}

void LoadParameters(const std::string& path,
                    std::span<Parameter* const> params) {
  std::map<std::string, Parameter> stored;
  for (Parameter& p : ReadParameters(path)) {
    std::string key = p.name;
    stored.emplace(std::move(key), std::move(p));
  }
  for (Parameter* p : params) {
    auto it = stored.find(p->name);
    if (it == stored.end()) {
      throw FormatError(path + ": missing parameter " + p->name);
    }
    if (it->second.value.shape() != p->value.shape()) {
      throw ShapeError(path + ": parameter " + p->name + " has shape " +
                       ShapeString(it->second.value.shape()) + ", expected " +
                       ShapeString(p->value.shape()));
    }
    p->value = it->second.value;
    p->ZeroGrad();
  }
}

}  // namespace emergelab::nn
