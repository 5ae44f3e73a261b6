// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "faceveil/tensor.hpp"

namespace faceveil {

/// Separable Gaussian blur of a 2-D map, truncated at 3 sigma, with edge
/// clamping. sigma == 0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& map, double sigma);

/// Downsample a 2-D map by area averaging. Input dims must be integer
/// multiples of the output dims.
Tensor area_downsample(const Tensor& map, int out_h, int out_w);

/// Plain (non-differentiable) bilinear resize of a CxHxW tensor,
/// half-pixel convention.
Tensor bilinear_resize_plain(const Tensor& chw, int out_h, int out_w);

}  // namespace faceveil
