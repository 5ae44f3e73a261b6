// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#include "faceveil/toy_backends.hpp"

#include <algorithm>
#include <cmath>

#include "faceveil/errors.hpp"
#include "faceveil/rng.hpp"

namespace faceveil {

namespace {

Tensor random_normal(Rng& rng, std::vector<int> shape, double stddev) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Tensor kaiming_conv(Rng& rng, int out_c, int in_c, int k) {
  return random_normal(rng, {out_c, in_c, k, k}, std::sqrt(2.0 / (in_c * k * k)));
}

}  // namespace

// ---------------------------------------------------------------------------
// ToyEncoder
// ---------------------------------------------------------------------------

ToyEncoder::ToyEncoder(uint64_t seed, std::array<int, 3> channels, std::string name)
    : name_(name.empty() ? "toy:encoder:" + std::to_string(seed) : std::move(name)),
      channels_(channels) {
  Rng rng(seed);
  w1_ = kaiming_conv(rng, channels_[0], 3, 3);
  b1_ = Tensor({channels_[0]});
  w2_ = kaiming_conv(rng, channels_[1], channels_[0], 3);
  b2_ = Tensor({channels_[1]});
  w3_ = kaiming_conv(rng, channels_[2], channels_[1], 3);
  b3_ = Tensor({channels_[2]});
  // small random biases so zero input still produces structured activations
  for (int i = 0; i < b1_.size(); ++i) b1_[i] = rng.normal(0.0, 0.1);
  for (int i = 0; i < b2_.size(); ++i) b2_[i] = rng.normal(0.0, 0.1);
  for (int i = 0; i < b3_.size(); ++i) b3_[i] = rng.normal(0.0, 0.1);
}

std::vector<EncoderBackend::LevelSpec> ToyEncoder::level_specs() const {
  return {{channels_[2], 0.125}, {channels_[1], 0.25}};
}

std::vector<Var> ToyEncoder::forward(const Var& image) const {
  Var h1 = avg_pool(leaky_relu(conv2d(image, constant(w1_), constant(b1_), 1)), 2);
  Var h2 = avg_pool(leaky_relu(conv2d(h1, constant(w2_), constant(b2_), 1)), 2);
  Var h3 = avg_pool(leaky_relu(conv2d(h2, constant(w3_), constant(b3_), 1)), 2);
  return {h3, h2};  // coarse to fine
}

// ---------------------------------------------------------------------------
// ToyEmbedder
// ---------------------------------------------------------------------------

ToyEmbedder::ToyEmbedder(std::string name, uint64_t seed, int embed_dim, int input_size)
    : name_(std::move(name)), input_size_(input_size), pool_grid_(8) {
  if (embed_dim <= 0) throw ArgumentError("ToyEmbedder: embed_dim must be positive");
  if (input_size_ % pool_grid_ != 0)
    throw ArgumentError("ToyEmbedder: input_size must be divisible by the pooled grid");
  prep_.mean = {0.5, 0.5, 0.5};
  prep_.stddev = {0.5, 0.5, 0.5};
  Rng rng(seed);
  const int in_dim = 3 * pool_grid_ * pool_grid_;
  weight_ = random_normal(rng, {embed_dim, in_dim}, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  bias_ = random_normal(rng, {embed_dim, 1}, 0.05);
}

ToyEmbedder::ToyEmbedder(std::string name, Tensor weight, Tensor bias, int input_size,
                         int pool_grid, Preprocessing prep)
    : name_(std::move(name)),
      input_size_(input_size),
      pool_grid_(pool_grid),
      prep_(prep),
      weight_(std::move(weight)),
      bias_(std::move(bias)) {
  if (weight_.rank() != 2 || weight_.dim(1) != 3 * pool_grid_ * pool_grid_)
    throw ArgumentError("ToyEmbedder: weight must be d x (3*grid*grid)");
  if (input_size_ % pool_grid_ != 0)
    throw ArgumentError("ToyEmbedder: input_size must be divisible by the pooled grid");
  if (bias_.rank() == 1) bias_ = Tensor::from({bias_.dim(0), 1},
                                              std::vector<double>(bias_.data(), bias_.data() + bias_.size()));
}

Var ToyEmbedder::embed(const Var& image) const {
  Var r = bilinear_resize(image, input_size_, input_size_);
  std::vector<double> inv_std(3), shift(3);
  for (int c = 0; c < 3; ++c) {
    inv_std[static_cast<size_t>(c)] = 1.0 / prep_.stddev[static_cast<size_t>(c)];
    shift[static_cast<size_t>(c)] = -prep_.mean[static_cast<size_t>(c)] / prep_.stddev[static_cast<size_t>(c)];
  }
  Var p = channel_affine(r, inv_std, shift);
  Var pooled = avg_pool(p, input_size_ / pool_grid_);
  Var col = reshape(pooled, {3 * pool_grid_ * pool_grid_, 1});
  Var e = add(matmul(constant(weight_), col), constant(bias_));
  return l2_normalize(reshape(e, {weight_.dim(0)}));
}

// ---------------------------------------------------------------------------
// ToyViT
// ---------------------------------------------------------------------------

ToyViT::ToyViT(uint64_t seed, int patch, int key_dim, int depth, bool class_token, std::string name)
    : name_(name.empty() ? "toy:vit:" + std::to_string(seed) : std::move(name)),
      patch_(patch),
      key_dim_(key_dim),
      depth_(depth),
      class_token_(class_token) {
  if (depth_ < 1) throw ArgumentError("ToyViT: depth must be >= 1");
  Rng rng(seed);
  int in_dim = 3 * patch_ * patch_;
  for (int l = 0; l < depth_; ++l) {
    weights_.push_back(random_normal(rng, {in_dim, key_dim_}, std::sqrt(2.0 / in_dim)));
    biases_.push_back(random_normal(rng, {key_dim_}, 0.05));
    class_keys_.push_back(random_normal(rng, {key_dim_}, 1.0));
    in_dim = key_dim_;
  }
}

Var ToyViT::patch_keys(const Var& image, int layer) const {
  if (layer < 0 || layer >= depth_)
    throw ArgumentError("ToyViT: layer " + std::to_string(layer) + " out of range [0," +
                        std::to_string(depth_ - 1) + "]");
  Var k = patches(image, patch_, patch_);
  k = add_rowvec(matmul(k, constant(weights_[0])), constant(biases_[0]));
  for (int l = 1; l <= layer; ++l)
    k = add_rowvec(matmul(leaky_relu(k), constant(weights_[static_cast<size_t>(l)])),
                   constant(biases_[static_cast<size_t>(l)]));
  return k;
}

Tensor ToyViT::class_token_key(int layer) const {
  if (!class_token_) return Tensor();
  if (layer < 0 || layer >= depth_) throw ArgumentError("ToyViT: class token layer out of range");
  return class_keys_[static_cast<size_t>(layer)];
}

// ---------------------------------------------------------------------------
// ToyParser
// ---------------------------------------------------------------------------

ToyParser::ToyParser(ToyParserGeometry geometry, std::string name)
    : name_(std::move(name)), geometry_(geometry) {}

namespace {
void paint_rect(Tensor& labels, const ToyParserGeometry::Rect& r, int label) {
  const int h = labels.dim(0), w = labels.dim(1);
  const int y0 = std::clamp(static_cast<int>(std::floor(r.y0 * h)), 0, h);
  const int y1 = std::clamp(static_cast<int>(std::floor(r.y1 * h)), 0, h);
  const int x0 = std::clamp(static_cast<int>(std::floor(r.x0 * w)), 0, w);
  const int x1 = std::clamp(static_cast<int>(std::floor(r.x1 * w)), 0, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) labels.at(y, x) = label;
}
}  // namespace

Tensor ToyParser::raw_labels(const Image& img) const {
  const int h = img.height(), w = img.width();
  Tensor labels({h, w});
  const auto& g = geometry_;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double fy = (y + 0.5) / h, fx = (x + 0.5) / w;
      const double dy = (fy - g.face_cy) / g.face_ry, dx = (fx - g.face_cx) / g.face_rx;
      if (dy * dy + dx * dx <= 1.0) labels.at(y, x) = kSkin;
    }
  paint_rect(labels, g.nose, kNose);
  paint_rect(labels, g.left_brow, kLeftBrow);
  paint_rect(labels, g.right_brow, kRightBrow);
  paint_rect(labels, g.left_eye, kLeftEye);
  paint_rect(labels, g.right_eye, kRightEye);
  paint_rect(labels, g.upper_lip, kUpperLip);
  paint_rect(labels, g.lower_lip, kLowerLip);
  if (g.extra_label) paint_rect(labels, g.extra_rect, *g.extra_label);
  return labels;
}

std::string toy_label_name(int raw_label) {
  switch (raw_label) {
    case ToyParser::kBackground: return "background";
    case ToyParser::kLeftEye: return "eye_l";
    case ToyParser::kRightEye: return "eye_r";
    case ToyParser::kLeftBrow: return "brow_l";
    case ToyParser::kRightBrow: return "brow_r";
    case ToyParser::kUpperLip: return "lip_upper";
    case ToyParser::kLowerLip: return "lip_lower";
    case ToyParser::kSkin: return "skin";
    case ToyParser::kNose: return "nose";
    default: return "unknown:" + std::to_string(raw_label);
  }
}

std::string ToyParser::label_name(int raw_label) const { return toy_label_name(raw_label); }

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

BackendSuite make_toy_suite(uint64_t seed, int embed_dim) {
  if (embed_dim <= 0) throw ArgumentError("make_toy_suite: embed_dim must be positive");
  BackendSuite suite;
  const std::string s = std::to_string(seed);
  suite.encoder = std::make_shared<ToyEncoder>(derive_seed(seed, 1), std::array<int, 3>{12, 16, 24},
                                               "toy:encoder:" + s);
  suite.vit = std::make_shared<ToyViT>(derive_seed(seed, 2), 16, 32, 4, true, "toy:vit:" + s);
  suite.parser = std::make_shared<ToyParser>(ToyParserGeometry{}, "toy:parser:" + s);
  for (int i = 0; i < 4; ++i) {
    suite.surrogates.push_back(std::make_shared<ToyEmbedder>(
        "toy:embedder:" + s + ":" + std::to_string(i) + ":" + std::to_string(embed_dim),
        derive_seed(seed, static_cast<uint64_t>(10 + i)), embed_dim));
  }
  return suite;
}

}  // namespace faceveil
