// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "faceveil/tensor.hpp"

namespace faceveil {

/// Reverse-mode automatic differentiation over Tensor values.
///
/// Graphs are built define-by-run: every op allocates a node holding its
/// result and a closure that routes the incoming gradient to its parents.
/// backward() walks the graph once in reverse topological order. Graphs are
/// discarded when the last Var handle goes out of scope, so one optimization
/// iteration builds a fresh graph and frees it.
///
/// All kernels are sequential and accumulate in a fixed order, so results
/// are bit-reproducible for identical inputs.
class Var {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // reads grad, accumulates into parents

    Tensor& ensure_grad() {
      if (grad.empty()) grad = Tensor::zeros(value.shape());
      return grad;
    }
  };

  Var() = default;
  /// Leaf node. Pass requires_grad=true for optimized parameters or
  /// gradient-checked inputs.
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Gradient accumulated by the last backward(); zeros if none reached here.
  const Tensor& grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::shared_ptr<Node> node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Wrap a tensor as a non-differentiable graph input.
inline Var constant(Tensor t) { return Var(std::move(t), false); }

/// Run reverse-mode differentiation from a scalar root.
void backward(const Var& root);

// ---- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var abs_(const Var& a);
Var square(const Var& a);
Var sqrt_(const Var& a);  // gradient guarded near zero
Var leaky_relu(const Var& a, double slope = 0.2);
Var sigmoid(const Var& a);

// ---- reductions ------------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);  // flattened inner product

// ---- linear algebra --------------------------------------------------------
Var matmul(const Var& a, const Var& b);  // (m x k) * (k x n)
Var transpose(const Var& a);             // 2-D
Var reshape(const Var& a, std::vector<int> shape);
/// y[r][j] = x[r][j] + b[j] for a 2-D x and 1-D b.
Var add_rowvec(const Var& x, const Var& b);
/// Per-row softmax of a 2-D matrix.
Var softmax_rows(const Var& a);
/// Per-row L2 normalization: row / (||row|| + eps). Zero rows map to zero.
Var rows_normalize(const Var& a, double eps = 1e-8);
/// Whole-tensor L2 normalization: x / (||x|| + eps).
Var l2_normalize(const Var& a, double eps = 1e-8);
/// Sum of per-row L2 norms of a 2-D matrix.
Var sum_row_norms(const Var& a);
/// Multiply each row of a 2-D matrix by a fixed scalar.
Var scale_rows(const Var& a, const std::vector<double>& row_scales);

// ---- spatial (C x H x W) ---------------------------------------------------
/// 2-D convolution, stride 1, square kernel, symmetric zero padding.
/// x: C x H x W, w: O x C x K x K, b: O (pass undefined Var for no bias).
Var conv2d(const Var& x, const Var& w, const Var& b, int pad);
Var upsample_nearest2(const Var& x);
Var avg_pool(const Var& x, int k);  // H, W divisible by k
Var bilinear_resize(const Var& x, int out_h, int out_w);
/// Instance-style normalization: per channel, zero mean / unit variance over
/// the spatial extent. No affine part.
Var instance_norm(const Var& x, double eps = 1e-5);
/// Subtract the per-channel spatial mean.
Var centralize_channels(const Var& x);
/// Multiply every channel elementwise by a fixed H x W mask.
Var scale_channels_by_mask(const Var& x, const Tensor& mask);
/// Per-channel affine map y_c = x_c * scale[c] + shift[c] with fixed
/// coefficients, one per channel.
Var channel_affine(const Var& x, const std::vector<double>& scale_c,
                   const std::vector<double>& shift_c);
Var concat_channels(const std::vector<Var>& xs);
/// Dense square patches flattened to rows: output is P x (C*k*k) where
/// patches are taken at the given stride without padding, row-major over
/// the valid grid.
Var patches(const Var& x, int k, int stride);

}  // namespace faceveil
