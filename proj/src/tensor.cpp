// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#include "faceveil/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace faceveil {

namespace {
size_t shape_product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  if (shape_product(shape) != data.size()) throw std::invalid_argument("tensor data/shape mismatch");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::min_value() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Tensor::max_value() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_str() const {
  std::string s;
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s.empty() ? "[]" : s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace faceveil
