// Copyright (c) 2026 The faceveil authors
// SPDX-License-Identifier: Apache-2.0

#include "faceveil/backends.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "faceveil/errors.hpp"
#include "faceveil/imageproc.hpp"
#include "faceveil/toy_backends.hpp"

namespace faceveil {

void validate_image(const Image& img, int min_side, int downsample_factor) {
  const Tensor& p = img.pixels;
  if (p.rank() != 3 || p.dim(0) != 3)
    throw ArgumentError("image must be 3xHxW, got " + p.shape_str());
  if (!p.all_finite()) throw ArgumentError("image contains non-finite values");
  if (p.min_value() < 0.0 || p.max_value() > 1.0)
    throw ArgumentError("image values must lie in [0,1]");
  const int h = p.dim(1), w = p.dim(2);
  if (h < min_side || w < min_side)
    throw ArgumentError("image sides must be >= " + std::to_string(min_side));
  if (h % downsample_factor != 0 || w % downsample_factor != 0)
    throw ArgumentError("image sides must be divisible by " + std::to_string(downsample_factor));
}

Tensor KeySet::patch_keys() const {
  if (!has_class_token) return keys;
  const int n = keys.dim(0) - 1, c = keys.dim(1);
  Tensor out({n, c});
  std::copy(keys.data() + c, keys.data() + keys.size(), out.data());
  return out;
}

const char* region_name(Region r) {
  switch (r) {
    case Region::Eyes: return "eyes";
    case Region::Lips: return "lips";
    case Region::Skin: return "skin";
    case Region::Background: return "background";
  }
  return "?";
}

const Tensor& RegionMaskSet::mask(Region r) const {
  switch (r) {
    case Region::Eyes: return eyes;
    case Region::Lips: return lips;
    case Region::Skin: return skin;
    case Region::Background: return background;
  }
  return background;
}

bool RegionMaskSet::region_empty(Region r) const { return mask(r).sum() <= 0.0; }

FeaturePyramid extract_content_features(const EncoderBackend& backend, const Image& img) {
  const int h = img.height(), w = img.width();
  const int m = backend.input_multiple();
  if (h % m != 0 || w % m != 0)
    throw ConfigError("encoder '" + backend.name() + "' needs input divisible by " +
                      std::to_string(m) + ", got " + img.pixels.shape_str());
  std::vector<Var> levels = backend.forward(constant(img.pixels));
  const auto specs = backend.level_specs();
  if (levels.size() != specs.size())
    throw ConfigError("encoder '" + backend.name() + "' produced " +
                      std::to_string(levels.size()) + " levels, declared " +
                      std::to_string(specs.size()));
  FeaturePyramid pyr;
  for (size_t i = 0; i < levels.size(); ++i) {
    const Tensor& f = levels[i].value();
    if (!f.all_finite())
      throw BackendFault("encoder '" + backend.name() + "' produced non-finite activations");
    const int expect_h = static_cast<int>(std::lround(h * specs[i].scale));
    const int expect_w = static_cast<int>(std::lround(w * specs[i].scale));
    if (f.dim(0) != specs[i].channels || f.dim(1) != expect_h || f.dim(2) != expect_w)
      throw ConfigError("encoder '" + backend.name() + "' level " + std::to_string(i) +
                        " shape " + f.shape_str() + " does not match its declared signature");
    pyr.levels.push_back({f, specs[i].scale});
  }
  return pyr;
}

Tensor embed_face(const EmbedderBackend& backend, const Image& img) {
  Var e = backend.embed(constant(img.pixels));
  if (!e.value().all_finite())
    throw BackendFault("embedder '" + backend.name() + "' produced non-finite output");
  if (e.value().size() != backend.embed_dim())
    throw BackendFault("embedder '" + backend.name() + "' produced wrong dimension");
  return e.value();
}

KeySet extract_keys(const ViTBackend& backend, const Image& img, int layer) {
  if (layer == -1) layer = backend.depth() - 1;
  if (layer < 0 || layer >= backend.depth())
    throw ArgumentError("extract_keys: layer " + std::to_string(layer) + " out of range [0," +
                        std::to_string(backend.depth() - 1) + "]");
  const int p = backend.patch_size();
  if (img.height() % p != 0 || img.width() % p != 0)
    throw ArgumentError("extract_keys: image sides must be divisible by patch size " +
                        std::to_string(p));
  Var k = backend.patch_keys(constant(img.pixels), layer);
  if (!k.value().all_finite()) throw BackendFault("vit '" + backend.name() + "' produced non-finite keys");

  KeySet out;
  out.layer_index = layer;
  out.grid_rows = img.height() / p;
  out.grid_cols = img.width() / p;
  out.has_class_token = backend.has_class_token();
  const int n = k.value().dim(0), c = k.value().dim(1);
  if (n != out.grid_rows * out.grid_cols)
    throw BackendFault("vit '" + backend.name() + "' key count does not match patch arithmetic");
  if (out.has_class_token) {
    Tensor cls = backend.class_token_key(layer);
    out.keys = Tensor({n + 1, c});
    std::copy(cls.data(), cls.data() + c, out.keys.data());
    std::copy(k.value().data(), k.value().data() + k.value().size(), out.keys.data() + c);
  } else {
    out.keys = k.value();
  }
  return out;
}

namespace {

Region region_for_label_name(const std::string& name, bool& known) {
  static const std::map<std::string, Region> kMap = {
      {"eye_l", Region::Eyes},     {"eye_r", Region::Eyes},
      {"brow_l", Region::Eyes},    {"brow_r", Region::Eyes},
      {"lip_upper", Region::Lips}, {"lip_lower", Region::Lips},
      {"skin", Region::Skin},      {"nose", Region::Skin},
      {"background", Region::Background}};
  auto it = kMap.find(name);
  known = it != kMap.end();
  return known ? it->second : Region::Background;
}

}  // namespace

RegionMaskSet parse_face(const ParserBackend& backend, const Image& img, double smoothing_sigma) {
  if (smoothing_sigma < 0.0) throw ArgumentError("parse_face: smoothing_sigma must be >= 0");
  Tensor labels = backend.raw_labels(img);
  const int h = labels.dim(0), w = labels.dim(1);

  RegionMaskSet set;
  set.smoothing_sigma = smoothing_sigma;
  Tensor eyes({h, w}), lips({h, w}), skin({h, w});
  std::set<int> unknown_seen;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int raw = static_cast<int>(std::lround(labels.at(y, x)));
      bool known = false;
      const Region r = region_for_label_name(backend.label_name(raw), known);
      if (!known) unknown_seen.insert(raw);
      switch (r) {
        case Region::Eyes: eyes.at(y, x) = 1.0; break;
        case Region::Lips: lips.at(y, x) = 1.0; break;
        case Region::Skin: skin.at(y, x) = 1.0; break;
        case Region::Background: break;
      }
    }
  for (int raw : unknown_seen)
    set.warnings.push_back("unknown label '" + backend.label_name(raw) + "' (raw " +
                           std::to_string(raw) + ") mapped to background");

  eyes = gaussian_blur(eyes, smoothing_sigma);
  lips = gaussian_blur(lips, smoothing_sigma);
  skin = gaussian_blur(skin, smoothing_sigma);
  // smoothing can push region sums above 1 near boundaries; renormalize so
  // the background complement stays in [0,1]
  Tensor bg({h, w});
  for (int i = 0; i < h * w; ++i) {
    const double s = eyes[i] + lips[i] + skin[i];
    if (s > 1.0) {
      eyes[i] /= s;
      lips[i] /= s;
      skin[i] /= s;
    }
    bg[i] = std::clamp(1.0 - eyes[i] - lips[i] - skin[i], 0.0, 1.0);
  }
  set.eyes = std::move(eyes);
  set.lips = std::move(lips);
  set.skin = std::move(skin);
  set.background = std::move(bg);
  for (Region r : kMakeupRegions)
    if (set.region_empty(r)) set.warnings.push_back(std::string("empty-region:") + region_name(r));
  return set;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_name(const std::string& name) {
  std::vector<std::string> parts;
  std::stringstream ss(name);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  return parts;
}

uint64_t parse_seed(const std::string& s, const std::string& name) {
  try {
    return static_cast<uint64_t>(std::stoull(s));
  } catch (...) {
    throw ConfigError("backend name '" + name + "': bad seed field '" + s + "'");
  }
}

[[noreturn]] void unknown_backend(const std::string& name, const char* kind) {
  throw ConfigError("no " + std::string(kind) + " adapter registered for '" + name +
                    "'; toy backends use toy:<kind>:<seed>");
}

constexpr int kDefaultToyEmbedDim = 64;

}  // namespace

std::shared_ptr<EncoderBackend> make_encoder_backend(const std::string& name,
                                                     const std::string& /*weights_dir*/) {
  const auto parts = split_name(name);
  if (parts.size() == 3 && parts[0] == "toy" && parts[1] == "encoder")
    return std::make_shared<ToyEncoder>(parse_seed(parts[2], name));
  unknown_backend(name, "encoder");
}

std::shared_ptr<EmbedderBackend> make_embedder_backend(const std::string& name,
                                                       const std::string& /*weights_dir*/) {
  const auto parts = split_name(name);
  if ((parts.size() == 4 || parts.size() == 5) && parts[0] == "toy" && parts[1] == "embedder") {
    const uint64_t seed = parse_seed(parts[2], name);
    const int index = static_cast<int>(parse_seed(parts[3], name));
    if (index < 0 || index > 3) throw ConfigError("toy embedder index must be 0..3 in '" + name + "'");
    const int dim = parts.size() == 5 ? static_cast<int>(parse_seed(parts[4], name)) : kDefaultToyEmbedDim;
    return std::make_shared<ToyEmbedder>(name, derive_seed(seed, static_cast<uint64_t>(10 + index)), dim);
  }
  unknown_backend(name, "embedder");
}

std::shared_ptr<ViTBackend> make_vit_backend(const std::string& name,
                                             const std::string& /*weights_dir*/) {
  const auto parts = split_name(name);
  if (parts.size() == 3 && parts[0] == "toy" && parts[1] == "vit")
    return std::make_shared<ToyViT>(parse_seed(parts[2], name));
  unknown_backend(name, "vit");
}

std::shared_ptr<ParserBackend> make_parser_backend(const std::string& name,
                                                   const std::string& /*weights_dir*/) {
  const auto parts = split_name(name);
  if (parts.size() >= 2 && parts[0] == "toy" && parts[1] == "parser") return std::make_shared<ToyParser>();
  unknown_backend(name, "parser");
}

}  // namespace faceveil
