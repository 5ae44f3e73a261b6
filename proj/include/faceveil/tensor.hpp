// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <string>
#include <vector>

namespace faceveil {

/// Dense row-major tensor of doubles. Rank is small (<= 4 in practice);
/// feature maps are stored C x H x W, matrices row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, double fill);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor from(std::vector<int> shape, std::vector<double> data);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  // 2-D access (rows x cols)
  double& at(int i, int j) {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  double at(int i, int j) const {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }

  // 3-D access (channels x height x width)
  double& at(int c, int y, int x) {
    assert(rank() == 3);
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const {
    assert(rank() == 3);
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  // 4-D access (out x in x kh x kw)
  double& at(int o, int c, int y, int x) {
    assert(rank() == 4);
    return data_[((static_cast<size_t>(o) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at(int o, int c, int y, int x) const {
    assert(rank() == 4);
    return data_[((static_cast<size_t>(o) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double min_value() const;
  double max_value() const;
  double sum() const;
  void fill(double v);

  /// Shallow description like "3x64x64" for error messages.
  std::string shape_str() const;

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Max |a-b| over all entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace faceveil
