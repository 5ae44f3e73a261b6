// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#include "faceveil/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "faceveil/errors.hpp"

namespace faceveil {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Var::Node&)> fn) {
  auto node = std::make_shared<Var::Node>();
  node->value = std::move(value);
  bool rg = false;
  node->parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (!p.defined()) throw ArgumentError("autodiff op received an undefined Var");
    node->parents.push_back(p.node());
    rg = rg || p.requires_grad();
  }
  node->requires_grad = rg;
  if (rg) node->backward_fn = std::move(fn);
  return Var::from_node(node);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ArgumentError(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                        b.value().shape_str());
}

bool wants(const Var::Node& self, size_t i) { return self.parents[i]->requires_grad; }

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::grad() const {
  return node_->ensure_grad();
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1)
    throw ArgumentError("backward: root must be a defined scalar");

  using Node = Var::Node;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->requires_grad && n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](Var::Node& self) {
    for (size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      Tensor& g = self.parents[p]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Var::Node& self) {
    if (wants(self, 0)) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Var::Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] *= s;
  return make_op(std::move(out), {a}, [s](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] += s;
  return make_op(std::move(out), {a}, [](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var abs_(const Var& a) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
  return make_op(std::move(out), {a}, [](Var::Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) {
      const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
      g[i] += s * self.grad[i];
    }
  });
}

Var square(const Var& a) { return mul(a, a); }

Var sqrt_(const Var& a) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
  Tensor y = out;
  return make_op(std::move(out), {a}, [y = std::move(y)](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] / (2.0 * std::max(y[i], 1e-12));
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return make_op(std::move(out), {a}, [slope](Var::Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (x[i] > 0.0 ? 1.0 : slope);
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  Tensor y = out;
  return make_op(std::move(out), {a}, [y = std::move(y)](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a.value().sum());
  return make_op(std::move(out), {a}, [](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const double gv = self.grad[0];
    for (int i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Var mean(const Var& a) {
  const int n = a.value().size();
  if (n == 0) throw ArgumentError("mean of empty tensor");
  Tensor out = Tensor::scalar(a.value().sum() / n);
  return make_op(std::move(out), {a}, [n](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    const double gv = self.grad[0] / n;
    for (int i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Var dot(const Var& a, const Var& b) {
  if (a.value().size() != b.value().size()) throw ArgumentError("dot: size mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.value().size(); ++i) acc += a.value()[i] * b.value()[i];
  return make_op(Tensor::scalar(acc), {a, b}, [](Var::Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const double gv = self.grad[0];
    if (wants(self, 0)) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += gv * bv[i];
    }
    if (wants(self, 1)) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += gv * av[i];
    }
  });
}

// ---- linear algebra --------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.value().dim(1) != b.value().dim(0))
    throw ArgumentError("matmul: incompatible shapes " + a.value().shape_str() + " * " +
                        b.value().shape_str());
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  Tensor out({m, n});
  MapMat(out.data(), m, n) = MapConst(a.value().data(), m, k) * MapConst(b.value().data(), k, n);
  return make_op(std::move(out), {a, b}, [m, k, n](Var::Node& self) {
    MapConst g(self.grad.data(), m, n);
    if (wants(self, 0)) {
      MapMat ga(self.parents[0]->ensure_grad().data(), m, k);
      ga.noalias() += g * MapConst(self.parents[1]->value.data(), k, n).transpose();
    }
    if (wants(self, 1)) {
      MapMat gb(self.parents[1]->ensure_grad().data(), k, n);
      gb.noalias() += MapConst(self.parents[0]->value.data(), m, k).transpose() * g;
    }
  });
}

Var transpose(const Var& a) {
  if (a.value().rank() != 2) throw ArgumentError("transpose: rank-2 tensor required");
  const int m = a.value().dim(0), n = a.value().dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
  return make_op(std::move(out), {a}, [m, n](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) g.at(i, j) += self.grad.at(j, i);
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = Tensor::from(shape, std::vector<double>(a.value().data(), a.value().data() + a.value().size()));
  if (out.size() != a.value().size()) throw ArgumentError("reshape: size mismatch");
  return make_op(std::move(out), {a}, [](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  if (x.value().rank() != 2 || b.value().rank() != 1 || x.value().dim(1) != b.value().dim(0))
    throw ArgumentError("add_rowvec: incompatible shapes");
  const int r = x.value().dim(0), c = x.value().dim(1);
  Tensor out = x.value();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) += b.value()[j];
  return make_op(std::move(out), {x, b}, [r, c](Var::Node& self) {
    if (wants(self, 0)) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) g[j] += self.grad.at(i, j);
    }
  });
}

Var softmax_rows(const Var& a) {
  if (a.value().rank() != 2) throw ArgumentError("softmax_rows: rank-2 tensor required");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor out = a.value();
  for (int i = 0; i < r; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (int j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  Tensor y = out;
  return make_op(std::move(out), {a}, [r, c, y = std::move(y)](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += self.grad.at(i, j) * y.at(i, j);
      for (int j = 0; j < c; ++j) g.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - s);
    }
  });
}

Var rows_normalize(const Var& a, double eps) {
  if (a.value().rank() != 2) throw ArgumentError("rows_normalize: rank-2 tensor required");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor out = a.value();
  std::vector<double> norms(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    double n2 = 0.0;
    for (int j = 0; j < c; ++j) n2 += out.at(i, j) * out.at(i, j);
    const double n = std::sqrt(n2);
    norms[static_cast<size_t>(i)] = n;
    const double inv = 1.0 / (n + eps);
    for (int j = 0; j < c; ++j) out.at(i, j) *= inv;
  }
  return make_op(std::move(out), {a}, [r, c, eps, norms = std::move(norms)](Var::Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double n = norms[static_cast<size_t>(i)];
      if (n < 1e-12) continue;  // zero row maps to zero; treat as constant
      const double s = n + eps;
      double gr = 0.0;
      for (int j = 0; j < c; ++j) gr += self.grad.at(i, j) * x.at(i, j);
      const double coef = gr / (n * s * s);
      for (int j = 0; j < c; ++j) g.at(i, j) += self.grad.at(i, j) / s - x.at(i, j) * coef;
    }
  });
}

Var l2_normalize(const Var& a, double eps) {
  const int n = a.value().size();
  double n2 = 0.0;
  for (int i = 0; i < n; ++i) n2 += a.value()[i] * a.value()[i];
  const double norm = std::sqrt(n2);
  const double inv = 1.0 / (norm + eps);
  Tensor out = a.value();
  for (int i = 0; i < n; ++i) out[i] *= inv;
  return make_op(std::move(out), {a}, [norm, eps](Var::Node& self) {
    if (norm < 1e-12) return;
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    const double s = norm + eps;
    double gx = 0.0;
    for (int i = 0; i < g.size(); ++i) gx += self.grad[i] * x[i];
    const double coef = gx / (norm * s * s);
    for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i] / s - x[i] * coef;
  });
}

Var sum_row_norms(const Var& a) {
  if (a.value().rank() != 2) throw ArgumentError("sum_row_norms: rank-2 tensor required");
  const int r = a.value().dim(0), c = a.value().dim(1);
  std::vector<double> norms(static_cast<size_t>(r));
  double total = 0.0;
  for (int i = 0; i < r; ++i) {
    double n2 = 0.0;
    for (int j = 0; j < c; ++j) n2 += a.value().at(i, j) * a.value().at(i, j);
    norms[static_cast<size_t>(i)] = std::sqrt(n2);
    total += norms[static_cast<size_t>(i)];
  }
  return make_op(Tensor::scalar(total), {a}, [r, c, norms = std::move(norms)](Var::Node& self) {
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    const double gv = self.grad[0];
    for (int i = 0; i < r; ++i) {
      const double n = norms[static_cast<size_t>(i)];
      if (n < 1e-12) continue;
      for (int j = 0; j < c; ++j) g.at(i, j) += gv * x.at(i, j) / n;
    }
  });
}

Var scale_rows(const Var& a, const std::vector<double>& row_scales) {
  if (a.value().rank() != 2 || a.value().dim(0) != static_cast<int>(row_scales.size()))
    throw ArgumentError("scale_rows: scale count must equal row count");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor out = a.value();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) *= row_scales[static_cast<size_t>(i)];
  return make_op(std::move(out), {a}, [r, c, row_scales](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) g.at(i, j) += self.grad.at(i, j) * row_scales[static_cast<size_t>(i)];
  });
}

// ---- spatial ---------------------------------------------------------------

namespace {

// im2col for stride-1 convolution with symmetric zero padding:
// col is (C*K*K) x (Ho*Wo).
Tensor im2col_conv(const Tensor& x, int k, int pad, int ho, int wo) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor col({c * k * k, ho * wo});
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        double* dst = col.data() + static_cast<size_t>(row) * ho * wo;
        for (int y = 0; y < ho; ++y) {
          const int sy = y + ky - pad;
          for (int xo = 0; xo < wo; ++xo) {
            const int sx = xo + kx - pad;
            dst[y * wo + xo] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? x.at(ch, sy, sx) : 0.0;
          }
        }
      }
  return col;
}

void col2im_conv(const Tensor& dcol, int k, int pad, int ho, int wo, Tensor& dx) {
  const int c = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        const double* src = dcol.data() + static_cast<size_t>(row) * ho * wo;
        for (int y = 0; y < ho; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xo = 0; xo < wo; ++xo) {
            const int sx = xo + kx - pad;
            if (sx < 0 || sx >= w) continue;
            dx.at(ch, sy, sx) += src[y * wo + xo];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 4) throw ArgumentError("conv2d: x must be CxHxW, w OxCxKxK");
  if (wv.dim(1) != xv.dim(0))
    throw ArgumentError("conv2d: input channels " + std::to_string(xv.dim(0)) +
                        " != kernel channels " + std::to_string(wv.dim(1)));
  if (wv.dim(2) != wv.dim(3)) throw ArgumentError("conv2d: kernel must be square");
  const int o = wv.dim(0), c = xv.dim(0), k = wv.dim(2);
  const int ho = xv.dim(1) + 2 * pad - k + 1;
  const int wo = xv.dim(2) + 2 * pad - k + 1;
  if (ho <= 0 || wo <= 0) throw ArgumentError("conv2d: kernel larger than padded input");
  const bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.value().dim(0) != o))
    throw ArgumentError("conv2d: bias must have one entry per output channel");

  Tensor col = im2col_conv(xv, k, pad, ho, wo);
  Tensor out({o, ho, wo});
  MapMat(out.data(), o, ho * wo) =
      MapConst(wv.data(), o, c * k * k) * MapConst(col.data(), c * k * k, ho * wo);
  if (has_bias) {
    for (int oc = 0; oc < o; ++oc) {
      const double bv = b.value()[oc];
      for (int i = 0; i < ho * wo; ++i) out.data()[oc * ho * wo + i] += bv;
    }
  }

  std::vector<Var> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_op(std::move(out), std::move(parents),
                 [o, c, k, pad, ho, wo, has_bias, col = std::move(col)](Var::Node& self) {
                   MapConst g(self.grad.data(), o, ho * wo);
                   if (wants(self, 1)) {
                     MapMat gw(self.parents[1]->ensure_grad().data(), o, c * k * k);
                     gw.noalias() += g * MapConst(col.data(), c * k * k, ho * wo).transpose();
                   }
                   if (has_bias && wants(self, 2)) {
                     Tensor& gb = self.parents[2]->ensure_grad();
                     for (int oc = 0; oc < o; ++oc) gb[oc] += g.row(oc).sum();
                   }
                   if (wants(self, 0)) {
                     Tensor dcol({c * k * k, ho * wo});
                     MapMat(dcol.data(), c * k * k, ho * wo).noalias() =
                         MapConst(self.parents[1]->value.data(), o, c * k * k).transpose() * g;
                     col2im_conv(dcol, k, pad, ho, wo, self.parents[0]->ensure_grad());
                   }
                 });
}

Var upsample_nearest2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("upsample_nearest2: CxHxW tensor required");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y)
      for (int xo = 0; xo < 2 * w; ++xo) out.at(ch, y, xo) = xv.at(ch, y / 2, xo / 2);
  return make_op(std::move(out), {x}, [c, h, w](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < 2 * h; ++y)
        for (int xo = 0; xo < 2 * w; ++xo) g.at(ch, y / 2, xo / 2) += self.grad.at(ch, y, xo);
  });
}

Var avg_pool(const Var& x, int k) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("avg_pool: CxHxW tensor required");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (k <= 0 || h % k != 0 || w % k != 0)
    throw ArgumentError("avg_pool: spatial dims must be divisible by the pool size");
  const int ho = h / k, wo = w / k;
  const double inv = 1.0 / (k * k);
  Tensor out({c, ho, wo});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xo = 0; xo < wo; ++xo) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) acc += xv.at(ch, y * k + dy, xo * k + dx);
        out.at(ch, y, xo) = acc * inv;
      }
  return make_op(std::move(out), {x}, [c, ho, wo, k, inv](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < ho; ++y)
        for (int xo = 0; xo < wo; ++xo) {
          const double gv = self.grad.at(ch, y, xo) * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) g.at(ch, y * k + dy, xo * k + dx) += gv;
        }
  });
}

namespace {
struct LerpCoord {
  int lo, hi;
  double w_hi;  // weight of hi sample; lo gets (1 - w_hi)
};

// half-pixel sampling, clamped to the valid range
LerpCoord lerp_coord(int out_i, int out_n, int in_n) {
  double s = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, in_n - 1);
  return {lo, hi, s - lo};
}
}  // namespace

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("bilinear_resize: CxHxW tensor required");
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("bilinear_resize: output size must be positive");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h == out_h && w == out_w) {
    // identity resize keeps the graph simple
    return make_op(xv, {x}, [](Var::Node& self) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (int i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
  }
  std::vector<LerpCoord> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
  for (int i = 0; i < out_h; ++i) ys[static_cast<size_t>(i)] = lerp_coord(i, out_h, h);
  for (int i = 0; i < out_w; ++i) xs[static_cast<size_t>(i)] = lerp_coord(i, out_w, w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < out_h; ++y) {
      const auto& cy = ys[static_cast<size_t>(y)];
      for (int xo = 0; xo < out_w; ++xo) {
        const auto& cx = xs[static_cast<size_t>(xo)];
        const double top = (1.0 - cx.w_hi) * xv.at(ch, cy.lo, cx.lo) + cx.w_hi * xv.at(ch, cy.lo, cx.hi);
        const double bot = (1.0 - cx.w_hi) * xv.at(ch, cy.hi, cx.lo) + cx.w_hi * xv.at(ch, cy.hi, cx.hi);
        out.at(ch, y, xo) = (1.0 - cy.w_hi) * top + cy.w_hi * bot;
      }
    }
  return make_op(std::move(out), {x},
                 [c, out_h, out_w, ys = std::move(ys), xs = std::move(xs)](Var::Node& self) {
                   Tensor& g = self.parents[0]->ensure_grad();
                   for (int ch = 0; ch < c; ++ch)
                     for (int y = 0; y < out_h; ++y) {
                       const auto& cy = ys[static_cast<size_t>(y)];
                       for (int xo = 0; xo < out_w; ++xo) {
                         const auto& cx = xs[static_cast<size_t>(xo)];
                         const double gv = self.grad.at(ch, y, xo);
                         g.at(ch, cy.lo, cx.lo) += gv * (1.0 - cy.w_hi) * (1.0 - cx.w_hi);
                         g.at(ch, cy.lo, cx.hi) += gv * (1.0 - cy.w_hi) * cx.w_hi;
                         g.at(ch, cy.hi, cx.lo) += gv * cy.w_hi * (1.0 - cx.w_hi);
                         g.at(ch, cy.hi, cx.hi) += gv * cy.w_hi * cx.w_hi;
                       }
                     }
                 });
}

Var instance_norm(const Var& x, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("instance_norm: CxHxW tensor required");
  const int c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
  Tensor out = xv;
  std::vector<double> inv_sigma(static_cast<size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    double* p = out.data() + static_cast<size_t>(ch) * n;
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += p[i];
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (p[i] - mu) * (p[i] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(ch)] = is;
    for (int i = 0; i < n; ++i) p[i] = (p[i] - mu) * is;
  }
  Tensor y = out;
  return make_op(std::move(out), {x},
                 [c, n, inv_sigma = std::move(inv_sigma), y = std::move(y)](Var::Node& self) {
                   Tensor& g = self.parents[0]->ensure_grad();
                   for (int ch = 0; ch < c; ++ch) {
                     const double* gp = self.grad.data() + static_cast<size_t>(ch) * n;
                     const double* yp = y.data() + static_cast<size_t>(ch) * n;
                     double* dx = g.data() + static_cast<size_t>(ch) * n;
                     double gmean = 0.0, gymean = 0.0;
                     for (int i = 0; i < n; ++i) {
                       gmean += gp[i];
                       gymean += gp[i] * yp[i];
                     }
                     gmean /= n;
                     gymean /= n;
                     const double is = inv_sigma[static_cast<size_t>(ch)];
                     for (int i = 0; i < n; ++i) dx[i] += is * (gp[i] - gmean - yp[i] * gymean);
                   }
                 });
}

Var centralize_channels(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("centralize_channels: CxHxW tensor required");
  const int c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
  Tensor out = xv;
  for (int ch = 0; ch < c; ++ch) {
    double* p = out.data() + static_cast<size_t>(ch) * n;
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += p[i];
    mu /= n;
    for (int i = 0; i < n; ++i) p[i] -= mu;
  }
  return make_op(std::move(out), {x}, [c, n](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double* gp = self.grad.data() + static_cast<size_t>(ch) * n;
      double* dx = g.data() + static_cast<size_t>(ch) * n;
      double gmean = 0.0;
      for (int i = 0; i < n; ++i) gmean += gp[i];
      gmean /= n;
      for (int i = 0; i < n; ++i) dx[i] += gp[i] - gmean;
    }
  });
}

Var scale_channels_by_mask(const Var& x, const Tensor& mask) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || mask.rank() != 2 || mask.dim(0) != xv.dim(1) || mask.dim(1) != xv.dim(2))
    throw ArgumentError("scale_channels_by_mask: mask must match spatial dims");
  const int c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
  Tensor out = xv;
  for (int ch = 0; ch < c; ++ch) {
    double* p = out.data() + static_cast<size_t>(ch) * n;
    for (int i = 0; i < n; ++i) p[i] *= mask[i];
  }
  return make_op(std::move(out), {x}, [c, n, mask](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double* gp = self.grad.data() + static_cast<size_t>(ch) * n;
      double* dx = g.data() + static_cast<size_t>(ch) * n;
      for (int i = 0; i < n; ++i) dx[i] += gp[i] * mask[i];
    }
  });
}

Var channel_affine(const Var& x, const std::vector<double>& scale_c,
                   const std::vector<double>& shift_c) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || scale_c.size() != static_cast<size_t>(xv.dim(0)) ||
      shift_c.size() != scale_c.size())
    throw ArgumentError("channel_affine: need one scale/shift per channel");
  const int c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
  Tensor out = xv;
  for (int ch = 0; ch < c; ++ch) {
    double* p = out.data() + static_cast<size_t>(ch) * n;
    const double s = scale_c[static_cast<size_t>(ch)], t = shift_c[static_cast<size_t>(ch)];
    for (int i = 0; i < n; ++i) p[i] = p[i] * s + t;
  }
  return make_op(std::move(out), {x}, [c, n, scale_c](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double* gp = self.grad.data() + static_cast<size_t>(ch) * n;
      double* dx = g.data() + static_cast<size_t>(ch) * n;
      const double s = scale_c[static_cast<size_t>(ch)];
      for (int i = 0; i < n; ++i) dx[i] += gp[i] * s;
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ArgumentError("concat_channels: need at least one input");
  const int h = xs[0].value().dim(1), w = xs[0].value().dim(2);
  int total_c = 0;
  for (const auto& v : xs) {
    if (v.value().rank() != 3 || v.value().dim(1) != h || v.value().dim(2) != w)
      throw ArgumentError("concat_channels: spatial dims must match");
    total_c += v.value().dim(0);
  }
  Tensor out({total_c, h, w});
  std::vector<int> channels;
  int offset = 0;
  for (const auto& v : xs) {
    const int c = v.value().dim(0);
    channels.push_back(c);
    std::copy(v.value().data(), v.value().data() + v.value().size(),
              out.data() + static_cast<size_t>(offset) * h * w);
    offset += c;
  }
  return make_op(std::move(out), xs, [h, w, channels = std::move(channels)](Var::Node& self) {
    int off = 0;
    for (size_t p = 0; p < self.parents.size(); ++p) {
      const int c = channels[p];
      if (wants(self, p)) {
        Tensor& g = self.parents[p]->ensure_grad();
        const double* src = self.grad.data() + static_cast<size_t>(off) * h * w;
        for (int i = 0; i < c * h * w; ++i) g[i] += src[i];
      }
      off += c;
    }
  });
}

Var patches(const Var& x, int k, int stride) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ArgumentError("patches: CxHxW tensor required");
  if (k <= 0 || stride <= 0) throw ArgumentError("patches: size and stride must be positive");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (k > h || k > w) throw ArgumentError("patches: patch size exceeds feature map");
  const int ph = (h - k) / stride + 1;
  const int pw = (w - k) / stride + 1;
  Tensor out({ph * pw, c * k * k});
  for (int py = 0; py < ph; ++py)
    for (int px = 0; px < pw; ++px) {
      const int row = py * pw + px;
      for (int ch = 0; ch < c; ++ch)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            out.at(row, (ch * k + ky) * k + kx) = xv.at(ch, py * stride + ky, px * stride + kx);
    }
  return make_op(std::move(out), {x}, [c, k, stride, ph, pw](Var::Node& self) {
    Tensor& g = self.parents[0]->ensure_grad();
    for (int py = 0; py < ph; ++py)
      for (int px = 0; px < pw; ++px) {
        const int row = py * pw + px;
        for (int ch = 0; ch < c; ++ch)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              g.at(ch, py * stride + ky, px * stride + kx) +=
                  self.grad.at(row, (ch * k + ky) * k + kx);
      }
  });
}

}  // namespace faceveil
