// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#include "faceveil/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "faceveil/errors.hpp"

namespace faceveil {

Tensor gaussian_blur(const Tensor& map, double sigma) {
  if (map.rank() != 2) throw ArgumentError("gaussian_blur: rank-2 map required");
  if (sigma < 0.0) throw ArgumentError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return map;

  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= norm;

  const int h = map.dim(0), w = map.dim(1);
  Tensor tmp({h, w});
  // horizontal pass, clamped edges
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * map.at(y, sx);
      }
      tmp.at(y, x) = acc;
    }
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * tmp.at(sy, x);
      }
      out.at(y, x) = acc;
    }
  return out;
}

Tensor area_downsample(const Tensor& map, int out_h, int out_w) {
  if (map.rank() != 2) throw ArgumentError("area_downsample: rank-2 map required");
  const int h = map.dim(0), w = map.dim(1);
  if (out_h <= 0 || out_w <= 0 || h % out_h != 0 || w % out_w != 0)
    throw ArgumentError("area_downsample: input dims must be multiples of output dims");
  const int ry = h / out_h, rx = w / out_w;
  const double inv = 1.0 / (ry * rx);
  Tensor out({out_h, out_w});
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < ry; ++dy)
        for (int dx = 0; dx < rx; ++dx) acc += map.at(y * ry + dy, x * rx + dx);
      out.at(y, x) = acc * inv;
    }
  return out;
}

namespace {
struct Coord {
  int lo, hi;
  double w_hi;
};
Coord coord(int out_i, int out_n, int in_n) {
  double s = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  const int lo = static_cast<int>(std::floor(s));
  return {lo, std::min(lo + 1, in_n - 1), s - lo};
}
}  // namespace

Tensor bilinear_resize_plain(const Tensor& chw, int out_h, int out_w) {
  if (chw.rank() != 3) throw ArgumentError("bilinear_resize_plain: CxHxW tensor required");
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (h == out_h && w == out_w) return chw;
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < out_h; ++y) {
      const Coord cy = coord(y, out_h, h);
      for (int x = 0; x < out_w; ++x) {
        const Coord cx = coord(x, out_w, w);
        const double top = (1.0 - cx.w_hi) * chw.at(ch, cy.lo, cx.lo) + cx.w_hi * chw.at(ch, cy.lo, cx.hi);
        const double bot = (1.0 - cx.w_hi) * chw.at(ch, cy.hi, cx.lo) + cx.w_hi * chw.at(ch, cy.hi, cx.hi);
        out.at(ch, y, x) = (1.0 - cy.w_hi) * top + cy.w_hi * bot;
      }
    }
  return out;
}

}  // namespace faceveil
