#pragma once

// Scene model, Wald-protocol degradation, synthetic scenes, patching and
// value-range normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dcnet/data/resample.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet::data {

/// Native digital-number range of a sensor (11-bit by default).
struct ValueRange {
  double lo = 0.0;
  double hi = 2047.0;
};

/// PAN [H,W], MS [B,H/r,W/r] and optional ground truth [B,H,W].
struct SceneTriple {
  Tensor pan;
  Tensor ms;
  std::optional<Tensor> truth;
  std::size_t ratio = 4;
  ValueRange range;

  std::size_t bands() const { return ms.dim(0); }

  void validate() const {
    if (pan.ndim() != 2 || ms.ndim() != 3) {
      throw DimensionError("scene: pan must be [H,W] and ms [B,h,w], got " + shape_str(pan.shape()) + " and " +
                           shape_str(ms.shape()));
    }
    if (pan.dim(0) != ratio * ms.dim(1) || pan.dim(1) != ratio * ms.dim(2)) {
      throw DimensionError("scene: pan " + shape_str(pan.shape()) + " is not " + std::to_string(ratio) + "x ms " +
                           shape_str(ms.shape()));
    }
    if (truth) {
      if (truth->ndim() != 3 || truth->dim(0) != ms.dim(0) || truth->dim(1) != pan.dim(0) ||
          truth->dim(2) != pan.dim(1)) {
        throw DimensionError("scene: truth " + shape_str(truth->shape()) + " does not match pan/ms");
      }
    }
  }
};

/// Wald-protocol simulation: the original MS becomes the reference and both
/// inputs are bicubic-decimated by `ratio`.
///
/// `pan_full` is either the original PAN at ratio x the truth resolution (it is
/// decimated) or already at the truth resolution (it is used as is).
inline SceneTriple degrade_wald(const Tensor& truth, const Tensor& pan_full, std::size_t ratio = 4,
                                ValueRange range = {}) {
  if (truth.ndim() != 3 || pan_full.ndim() != 2) {
    throw DimensionError("degrade_wald: truth must be [B,H,W] and pan [H,W]");
  }
  const std::size_t H = truth.dim(1), W = truth.dim(2);
  if (H % ratio != 0 || W % ratio != 0) {
    throw DimensionError("degrade_wald: " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by ratio " +
                         std::to_string(ratio));
  }
  SceneTriple s;
  s.ratio = ratio;
  s.range = range;
  s.truth = truth.clone();
  s.ms = bicubic_resample(truth, 1, ratio);
  if (pan_full.dim(0) == H * ratio && pan_full.dim(1) == W * ratio) {
    s.pan = bicubic_resample(pan_full, 1, ratio);
  } else if (pan_full.dim(0) == H && pan_full.dim(1) == W) {
    s.pan = pan_full.clone();
  } else {
    throw DimensionError("degrade_wald: pan " + shape_str(pan_full.shape()) + " matches neither the truth size nor " +
                         std::to_string(ratio) + "x it");
  }
  s.validate();
  return s;
}

struct SynthScene {
  Tensor truth;     // [B,H,W]
  Tensor pan_full;  // [4H,4W]
  ValueRange range;
};

/// Deterministic procedural scene. A latent multispectral field is drawn at
/// 4x the truth resolution from a handful of materials (spectral signatures)
/// laid out as smooth background, Gaussian blobs, rectangles and half-plane
/// edges. The truth is the latent field decimated by 4; the PAN is a weighted
/// band average of the latent field with faint sensor noise.
inline SynthScene synth_scene(std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width,
                              ValueRange range = {}) {
  if (height % 4 != 0 || width % 4 != 0) throw DimensionError("synth_scene: H and W must be divisible by 4");
  if (bands == 0) throw ConfigError("synth_scene: need at least one band");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t HH = height * 4, WW = width * 4;
  const double span = range.hi - range.lo;

  // Materials: smooth spectral signatures in [0.08, 0.85] of the range.
  const std::size_t n_materials = 6;
  std::vector<std::vector<double>> materials(n_materials, std::vector<double>(bands));
  for (auto& m : materials) {
    const double base = 0.15 + 0.4 * U(rng);
    const double tilt = 0.5 * (U(rng) - 0.5);
    const double bump = 0.3 * (U(rng) - 0.5);
    const double bump_at = U(rng) * static_cast<double>(bands);
    for (std::size_t b = 0; b < bands; ++b) {
      const double t = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.0;
      const double db = static_cast<double>(b) - bump_at;
      m[b] = std::clamp(base + tilt * (t - 0.5) + bump * std::exp(-db * db / 2.0), 0.08, 0.85);
    }
  }

  std::vector<double> latent(bands * HH * WW);
  auto at = [&](std::size_t b, std::size_t y, std::size_t x) -> double& { return latent[(b * HH + y) * WW + x]; };

  // Background: blend of two materials along a slow sinusoidal field.
  const double fx = (0.5 + U(rng)) * 2 * std::numbers::pi / static_cast<double>(WW);
  const double fy = (0.5 + U(rng)) * 2 * std::numbers::pi / static_cast<double>(HH);
  const double ph = U(rng) * 2 * std::numbers::pi;
  const auto& bg0 = materials[0];
  const auto& bg1 = materials[1];
  for (std::size_t y = 0; y < HH; ++y)
    for (std::size_t x = 0; x < WW; ++x) {
      const double t = 0.5 + 0.5 * std::sin(fx * static_cast<double>(x) + fy * static_cast<double>(y) + ph);
      for (std::size_t b = 0; b < bands; ++b) at(b, y, x) = (1 - t) * bg0[b] + t * bg1[b];
    }

  // Half-plane edges.
  const std::size_t n_edges = 2;
  for (std::size_t e = 0; e < n_edges; ++e) {
    const double theta = U(rng) * 2 * std::numbers::pi;
    const double nx = std::cos(theta), ny = std::sin(theta);
    const double cx = U(rng) * WW, cy = U(rng) * HH;
    const auto& mat = materials[2 + e % 2];
    const double alpha = 0.5 + 0.4 * U(rng);
    for (std::size_t y = 0; y < HH; ++y)
      for (std::size_t x = 0; x < WW; ++x) {
        if ((static_cast<double>(x) - cx) * nx + (static_cast<double>(y) - cy) * ny <= 0) continue;
        for (std::size_t b = 0; b < bands; ++b) at(b, y, x) = (1 - alpha) * at(b, y, x) + alpha * mat[b];
      }
  }

  // Rectangles (buildings, fields).
  const std::size_t n_rects = 4 + (HH * WW) / (96 * 96);
  for (std::size_t r = 0; r < n_rects; ++r) {
    const std::size_t rh = 6 + static_cast<std::size_t>(U(rng) * HH / 5);
    const std::size_t rw = 6 + static_cast<std::size_t>(U(rng) * WW / 5);
    const std::size_t y0 = static_cast<std::size_t>(U(rng) * HH), x0 = static_cast<std::size_t>(U(rng) * WW);
    const auto& mat = materials[static_cast<std::size_t>(U(rng) * n_materials) % n_materials];
    for (std::size_t y = y0; y < std::min(HH, y0 + rh); ++y)
      for (std::size_t x = x0; x < std::min(WW, x0 + rw); ++x)
        for (std::size_t b = 0; b < bands; ++b) at(b, y, x) = mat[b];
  }

  // Gaussian blobs (vegetation patches, shadows).
  const std::size_t n_blobs = 3 + (HH * WW) / (128 * 128);
  for (std::size_t k = 0; k < n_blobs; ++k) {
    const double cy = U(rng) * HH, cx = U(rng) * WW;
    const double sigma = (0.03 + 0.12 * U(rng)) * static_cast<double>(std::min(HH, WW));
    const double amp = 0.6 * (U(rng) - 0.4);
    const auto& mat = materials[static_cast<std::size_t>(U(rng) * n_materials) % n_materials];
    const long y_lo = std::max<long>(0, static_cast<long>(cy - 3 * sigma));
    const long y_hi = std::min<long>(static_cast<long>(HH), static_cast<long>(cy + 3 * sigma) + 1);
    const long x_lo = std::max<long>(0, static_cast<long>(cx - 3 * sigma));
    const long x_hi = std::min<long>(static_cast<long>(WW), static_cast<long>(cx + 3 * sigma) + 1);
    for (long y = y_lo; y < y_hi; ++y)
      for (long x = x_lo; x < x_hi; ++x) {
        const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2 * sigma * sigma);
        const double g = amp * std::exp(-d2);
        for (std::size_t b = 0; b < bands; ++b) at(b, y, x) += g * mat[b];
      }
  }

  // PAN spectral response: smooth, all bands positive.
  std::vector<double> response(bands);
  for (std::size_t b = 0; b < bands; ++b) response[b] = 1.0 + 0.5 * std::sin(static_cast<double>(b) + 0.3);
  const double rsum = std::accumulate(response.begin(), response.end(), 0.0);
  for (auto& r : response) r /= rsum;

  std::normal_distribution<double> noise(0.0, 0.002);
  Tensor latent_t({bands, HH, WW});
  Tensor pan({HH, WW});
  for (std::size_t y = 0; y < HH; ++y)
    for (std::size_t x = 0; x < WW; ++x) {
      double p = 0.0;
      for (std::size_t b = 0; b < bands; ++b) {
        const double v = std::clamp(at(b, y, x), 0.0, 1.0);
        latent_t[(b * HH + y) * WW + x] = static_cast<float>(range.lo + span * v);
        p += response[b] * v;
      }
      p = std::clamp(p + noise(rng), 0.0, 1.0);
      pan[y * WW + x] = static_cast<float>(range.lo + span * p);
    }

  SynthScene out;
  out.truth = bicubic_resample(latent_t, 1, 4);
  for (auto& v : out.truth.values()) v = std::clamp(v, static_cast<float>(range.lo), static_cast<float>(range.hi));
  out.pan_full = std::move(pan);
  out.range = range;
  return out;
}

// ---------------------------------------------------------------------------
// Patching

struct Patch {
  SceneTriple scene;
  std::size_t y = 0;  // origin in truth/pan pixels
  std::size_t x = 0;
};

struct SplitFractions {
  double train = 400.0 / 550.0;
  double val = 100.0 / 550.0;
  double test = 50.0 / 550.0;
};

struct PatchSet {
  std::vector<Patch> train;
  std::vector<Patch> val;
  std::vector<Patch> test;
  std::size_t size = 0;

  std::size_t total() const { return train.size() + val.size() + test.size(); }
};

inline Tensor crop2(const Tensor& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  const std::size_t W = img.dim(1);
  Tensor out({h, w});
  for (std::size_t r = 0; r < h; ++r)
    std::copy_n(img.values().begin() + (y + r) * W + x, w, out.values().begin() + r * w);
  return out;
}

inline Tensor crop3(const Tensor& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  const std::size_t B = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor out({B, h, w});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(img.values().begin() + (b * H + y + r) * W + x, w, out.values().begin() + (b * h + r) * w);
  return out;
}

/// Cuts `scene` into size x size grid patches (PAN/truth pixels) with the given
/// stride, shuffles them with `seed` and splits them by `fractions`.
inline PatchSet patchify(const SceneTriple& scene, std::size_t size, std::size_t stride, SplitFractions fractions,
                         std::uint64_t seed) {
  scene.validate();
  const std::size_t H = scene.pan.dim(0), W = scene.pan.dim(1), r = scene.ratio;
  if (size == 0 || stride == 0) throw ConfigError("patchify: size and stride must be positive");
  if (size > H || size > W) {
    throw DimensionError("patchify: patch size " + std::to_string(size) + " exceeds image " + std::to_string(H) + "x" +
                         std::to_string(W));
  }
  if (size % r != 0 || stride % r != 0) throw ConfigError("patchify: size and stride must be multiples of the ratio");
  const double fsum = fractions.train + fractions.val + fractions.test;
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 || fsum <= 0) {
    throw ConfigError("patchify: split fractions must be non-negative with a positive sum");
  }

  std::vector<Patch> all;
  for (std::size_t y = 0; y + size <= H; y += stride)
    for (std::size_t x = 0; x + size <= W; x += stride) {
      Patch p;
      p.y = y;
      p.x = x;
      p.scene.ratio = r;
      p.scene.range = scene.range;
      p.scene.pan = crop2(scene.pan, y, x, size, size);
      p.scene.ms = crop3(scene.ms, y / r, x / r, size / r, size / r);
      if (scene.truth) p.scene.truth = crop3(*scene.truth, y, x, size, size);
      all.push_back(std::move(p));
    }

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = all.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train / fsum * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions.val / fsum * static_cast<double>(n))));
  PatchSet set;
  set.size = size;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? set.train : (i < n_train + n_val ? set.val : set.test);
    dst.push_back(std::move(all[order[i]]));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Normalization

inline void check_range(const ValueRange& r) {
  if (!(r.hi > r.lo)) throw ConfigError("value range is degenerate (hi must exceed lo)");
}

/// Affine map of [lo, hi] onto [0, 1].
template <typename T>
BasicTensor<T> normalize(const BasicTensor<T>& x, ValueRange r) {
  check_range(r);
  BasicTensor<T> out(x.shape());
  const double span = r.hi - r.lo;
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = static_cast<T>((static_cast<double>(x[i]) - r.lo) / span);
  return out;
}

template <typename T>
BasicTensor<T> denormalize(const BasicTensor<T>& x, ValueRange r) {
  check_range(r);
  BasicTensor<T> out(x.shape());
  const double span = r.hi - r.lo;
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = static_cast<T>(static_cast<double>(x[i]) * span + r.lo);
  return out;
}

}  // namespace dcnet::data
