// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "faceveil/autodiff.hpp"
#include "faceveil/tensor.hpp"

namespace faceveil {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Aligned RGB face raster, 3 x H x W, values in [0, 1].
struct Image {
  Tensor pixels;

  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

/// Throws ArgumentError unless the raster is finite, within [0, 1], at least
/// min_side on each side and divisible by the pipeline downsampling factor.
void validate_image(const Image& img, int min_side = 32, int downsample_factor = 16);

/// One level of a multi-scale feature stack: C x H x W features plus the
/// spatial scale relative to the input image (e.g. 0.125 for 1/8).
struct PyramidLevel {
  Tensor features;
  double scale = 1.0;
};

/// Multi-scale deep features, ordered coarse-to-fine (smallest scale first).
struct FeaturePyramid {
  std::vector<PyramidLevel> levels;

  const PyramidLevel& coarsest() const { return levels.front(); }
};

/// Key vectors from one self-attention layer. When a class token is present
/// it occupies row 0 and is excluded from all spatial computations.
struct KeySet {
  Tensor keys;  // N x C
  int layer_index = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  bool has_class_token = false;

  int num_patches() const { return grid_rows * grid_cols; }
  /// Keys without the class-token row.
  Tensor patch_keys() const;
};

enum class Region { Eyes, Lips, Skin, Background };
const char* region_name(Region r);

/// The three makeup regions in canonical order (background excluded).
inline constexpr std::array<Region, 3> kMakeupRegions = {Region::Eyes, Region::Lips, Region::Skin};

/// Per-region soft masks for one image, each H x W in [0, 1], with
/// background == clamp(1 - eyes - lips - skin, 0, 1).
struct RegionMaskSet {
  Tensor eyes, lips, skin, background;
  double smoothing_sigma = 0.0;
  std::vector<std::string> warnings;  // unknown labels, empty regions

  const Tensor& mask(Region r) const;
  /// True when the region mask carries no weight at all.
  bool region_empty(Region r) const;
  int height() const { return eyes.dim(0); }
  int width() const { return eyes.dim(1); }
};

/// Per-channel normalization an embedder expects, applied by the adapter.
struct Preprocessing {
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
  std::array<double, 3> stddev = {1.0, 1.0, 1.0};
};

// ---------------------------------------------------------------------------
// Backend interfaces. Backends are immutable after construction and are pure
// functions of (weights, input); all forward passes are differentiable so the
// optimization loop can run gradients through them.
// ---------------------------------------------------------------------------

class EncoderBackend {
 public:
  struct LevelSpec {
    int channels;
    double scale;
  };

  virtual ~EncoderBackend() = default;
  virtual std::string name() const = 0;
  /// Declared level signatures, coarse-to-fine.
  virtual std::vector<LevelSpec> level_specs() const = 0;
  /// Input sides must be divisible by this.
  virtual int input_multiple() const = 0;
  /// Differentiable forward; one Var per level, coarse-to-fine.
  virtual std::vector<Var> forward(const Var& image) const = 0;
};

class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  virtual std::string name() const = 0;
  virtual int embed_dim() const = 0;
  virtual int input_size() const = 0;
  virtual Preprocessing preprocessing() const = 0;
  /// Differentiable forward on a 3 x H x W image in [0, 1]. The adapter
  /// resizes to input_size, applies preprocessing and L2-normalizes, so the
  /// result always has unit norm.
  virtual Var embed(const Var& image) const = 0;
};

class ViTBackend {
 public:
  virtual ~ViTBackend() = default;
  virtual std::string name() const = 0;
  virtual int depth() const = 0;
  virtual int patch_size() const = 0;
  virtual int key_dim() const = 0;
  virtual bool has_class_token() const = 0;
  /// Differentiable keys of the given layer (0-based; depth-1 is deepest),
  /// patch rows only. Throws ArgumentError when layer is out of range.
  virtual Var patch_keys(const Var& image, int layer) const = 0;
  /// Class-token key row for the given layer; empty tensor when absent.
  virtual Tensor class_token_key(int layer) const = 0;
};

class ParserBackend {
 public:
  virtual ~ParserBackend() = default;
  virtual std::string name() const = 0;
  /// Raw integer label raster (H x W) in the parser's own label space.
  virtual Tensor raw_labels(const Image& img) const = 0;
  /// Canonical semantic name for a raw label. Recognized names: "eye_l",
  /// "eye_r", "brow_l", "brow_r", "lip_upper", "lip_lower", "skin", "nose",
  /// "background". Any other name is mapped to background with a warning.
  virtual std::string label_name(int raw_label) const = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Run the encoder on an image and collect the pyramid. Verifies the declared
/// level signatures and that all activations are finite (BackendFault
/// otherwise).
FeaturePyramid extract_content_features(const EncoderBackend& backend, const Image& img);

/// Unit-norm embedding as a plain tensor. BackendFault on non-finite output.
Tensor embed_face(const EmbedderBackend& backend, const Image& img);

/// Keys of one attention layer, with the class-token row prepended when the
/// backend has one. Pass layer = -1 for the deepest layer.
KeySet extract_keys(const ViTBackend& backend, const Image& img, int layer = -1);

/// Collapse raw parser labels into {eyes, lips, skin, background} soft masks
/// and smooth them.
///
/// Label map: left/right eye and both brows -> eyes; upper/lower lip -> lips;
/// face skin and nose -> skin; anything else -> background. Unknown labels
/// map to background and leave a warning in the result. Empty regions are
/// legal and flagged in warnings as "empty-region:<name>".
RegionMaskSet parse_face(const ParserBackend& backend, const Image& img, double smoothing_sigma);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Everything one protection run needs.
struct BackendSuite {
  std::shared_ptr<EncoderBackend> encoder;
  std::shared_ptr<ViTBackend> vit;
  std::shared_ptr<ParserBackend> parser;
  std::vector<std::shared_ptr<EmbedderBackend>> surrogates;
};

/// Resolve a backend name. Toy backends use "toy:<kind>:<seed>" (embedders
/// additionally "toy:embedder:<seed>:<index>", index 0..3). Anything else is
/// looked up as an adapter for pretrained weights under weights_dir; no such
/// adapters ship with this build, so unknown names raise ConfigError.
std::shared_ptr<EncoderBackend> make_encoder_backend(const std::string& name,
                                                     const std::string& weights_dir = "");
std::shared_ptr<EmbedderBackend> make_embedder_backend(const std::string& name,
                                                       const std::string& weights_dir = "");
std::shared_ptr<ViTBackend> make_vit_backend(const std::string& name,
                                             const std::string& weights_dir = "");
std::shared_ptr<ParserBackend> make_parser_backend(const std::string& name,
                                                   const std::string& weights_dir = "");

}  // namespace faceveil
