// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faceveil/backends.hpp"

namespace faceveil {

/// Deterministic frozen-random networks standing in for pretrained models.
/// They are small, differentiable end-to-end and fully reproducible from a
/// seed, which is what the test suite and desk-scale experiments run on.

/// Three conv stages with 2x average pooling each; levels exposed at 1/8
/// (coarse) and 1/4 (fine) of the input resolution.
class ToyEncoder : public EncoderBackend {
 public:
  explicit ToyEncoder(uint64_t seed, std::array<int, 3> channels = {12, 16, 24},
                      std::string name = "");

  std::string name() const override { return name_; }
  std::vector<LevelSpec> level_specs() const override;
  int input_multiple() const override { return 8; }
  std::vector<Var> forward(const Var& image) const override;

 private:
  std::string name_;
  std::array<int, 3> channels_;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Linear embedder on a pooled raster: resize to input_size, normalize,
/// average-pool to an 8x8 grid, then a frozen random projection followed by
/// L2 normalization. All toy embedders share the pooled trunk layout and
/// differ in their projections, which is what makes attacks crafted on one
/// subset transfer to a held-out one.
class ToyEmbedder : public EmbedderBackend {
 public:
  ToyEmbedder(std::string name, uint64_t seed, int embed_dim, int input_size = 32);
  /// Explicit weights (for hand-computed tests). weight is d x (3*grid*grid),
  /// bias is d. Preprocessing defaults to identity.
  ToyEmbedder(std::string name, Tensor weight, Tensor bias, int input_size, int pool_grid,
              Preprocessing prep = {});

  std::string name() const override { return name_; }
  int embed_dim() const override { return weight_.dim(0); }
  int input_size() const override { return input_size_; }
  Preprocessing preprocessing() const override { return prep_; }
  Var embed(const Var& image) const override;

 private:
  std::string name_;
  int input_size_;
  int pool_grid_;
  Preprocessing prep_;
  Tensor weight_, bias_;
};

/// Patch projection plus a stack of per-patch MLP layers; layer l keys are
/// the activations after the l-th projection. Carries a constant class-token
/// key per layer.
class ToyViT : public ViTBackend {
 public:
  ToyViT(uint64_t seed, int patch = 16, int key_dim = 32, int depth = 4, bool class_token = true,
         std::string name = "");

  std::string name() const override { return name_; }
  int depth() const override { return depth_; }
  int patch_size() const override { return patch_; }
  int key_dim() const override { return key_dim_; }
  bool has_class_token() const override { return class_token_; }
  Var patch_keys(const Var& image, int layer) const override;
  Tensor class_token_key(int layer) const override;

 private:
  std::string name_;
  int patch_, key_dim_, depth_;
  bool class_token_;
  std::vector<Tensor> weights_, biases_;  // weights_[l]: in x key_dim
  std::vector<Tensor> class_keys_;
};

/// Content-independent synthetic parser: emits rectangles and an ellipse in
/// its own label space, scaled to the image size. Geometry is configurable so
/// tests can produce empty regions or unknown labels.
struct ToyParserGeometry {
  struct Rect {
    double y0, x0, y1, x1;  // fractions of height/width; empty when y1 <= y0
  };
  Rect left_eye{0.34, 0.26, 0.44, 0.42};
  Rect right_eye{0.34, 0.58, 0.44, 0.74};
  Rect left_brow{0.26, 0.24, 0.31, 0.44};
  Rect right_brow{0.26, 0.56, 0.31, 0.76};
  Rect upper_lip{0.68, 0.38, 0.73, 0.62};
  Rect lower_lip{0.73, 0.38, 0.79, 0.62};
  Rect nose{0.48, 0.44, 0.62, 0.56};
  // face ellipse: center and radii as fractions
  double face_cy = 0.52, face_cx = 0.50, face_ry = 0.38, face_rx = 0.30;
  /// When set, a rectangle emitted with this raw label; used to exercise the
  /// unknown-label path.
  std::optional<int> extra_label;
  Rect extra_rect{0.02, 0.02, 0.10, 0.30};
};

class ToyParser : public ParserBackend {
 public:
  // raw label space
  static constexpr int kBackground = 0;
  static constexpr int kLeftEye = 1;
  static constexpr int kRightEye = 2;
  static constexpr int kLeftBrow = 3;
  static constexpr int kRightBrow = 4;
  static constexpr int kUpperLip = 10;
  static constexpr int kLowerLip = 11;
  static constexpr int kSkin = 20;
  static constexpr int kNose = 21;

  explicit ToyParser(ToyParserGeometry geometry = {}, std::string name = "toy:parser");

  std::string name() const override { return name_; }
  Tensor raw_labels(const Image& img) const override;
  std::string label_name(int raw_label) const override;
  const ToyParserGeometry& geometry() const { return geometry_; }

 private:
  std::string name_;
  ToyParserGeometry geometry_;
};

/// Canonical semantic name for a toy raw label ("eye_l", "lip_upper", ...).
/// parse_face consumes these names; unknown ints map to "unknown:<raw>".
std::string toy_label_name(int raw_label);

/// Deterministic toy suite: one encoder, one ViT, one parser and four
/// pairwise-distinct embedders, all derived from the seed.
BackendSuite make_toy_suite(uint64_t seed, int embed_dim);

}  // namespace faceveil
