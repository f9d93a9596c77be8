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

#include "emergelab/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "emergelab/common.hpp"

namespace emergelab::nn {

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(ShapeSize(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != ShapeSize(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) +
                     " values for shape " + ShapeString(shape_));
  }
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t cols = shape_.back();
  return {values_.data() + i * cols, cols};
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t cols = shape_.back();
  return {values_.data() + i * cols, cols};
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (ShapeSize(shape) != values_.size()) {
    throw ShapeError("Reshape " + ShapeString(shape_) + " -> " +
                     ShapeString(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::Fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeString(shape_));
  }
  return values_[0];
}

Parameter::Parameter(std::string name_in, Tensor value_in)
    : name(std::move(name_in)),
      value(std::move(value_in)),
      grad(value.shape(), 0.0) {}

void Parameter::ZeroGrad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0);
  } else {
    grad.Fill(0.0);
  }
}

void ZeroGrad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->ZeroGrad();
}

}  // namespace emergelab::nn
