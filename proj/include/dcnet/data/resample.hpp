#pragma once

// Separable bicubic resampling (Catmull-Rom, a = -0.5) with clamp-to-edge
// sampling. When shrinking, the kernel is stretched by the inverse scale so
// every input pixel contributes (antialiased decimation, as in MATLAB's
// imresize); weights are renormalized to sum to one.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dcnet/tensor.hpp"

namespace dcnet::data {

inline double cubic_kernel(double x, double a = -0.5) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Contributions {
  std::size_t taps = 0;
  std::vector<std::size_t> index;  // out_size * taps, clamped source indices
  std::vector<double> weight;      // out_size * taps
};

inline Contributions contributions(std::size_t in_size, std::size_t out_size) {
  const double scale = static_cast<double>(out_size) / static_cast<double>(in_size);
  const double kscale = scale < 1.0 ? scale : 1.0;
  const double width = 4.0 / kscale;  // kernel support in input pixels
  Contributions c;
  c.taps = static_cast<std::size_t>(std::ceil(width)) + 2;
  c.index.resize(out_size * c.taps);
  c.weight.resize(out_size * c.taps);
  for (std::size_t o = 0; o < out_size; ++o) {
    const double center = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const long left = static_cast<long>(std::floor(center - width / 2.0));
    double total = 0.0;
    for (std::size_t t = 0; t < c.taps; ++t) {
      const long src = left + static_cast<long>(t);
      const double w = kscale * cubic_kernel((center - static_cast<double>(src)) * kscale);
      const long clamped = std::min<long>(std::max<long>(src, 0), static_cast<long>(in_size) - 1);
      c.index[o * c.taps + t] = static_cast<std::size_t>(clamped);
      c.weight[o * c.taps + t] = w;
      total += w;
    }
    for (std::size_t t = 0; t < c.taps; ++t) c.weight[o * c.taps + t] /= total;
  }
  return c;
}

}  // namespace detail

/// Resizes the last two axes of `img` to (out_h, out_w); leading axes are
/// treated as independent planes (bands, batch, ...).
template <typename T>
BasicTensor<T> bicubic_resize(const BasicTensor<T>& img, std::size_t out_h, std::size_t out_w) {
  if (img.ndim() < 2) throw DimensionError("bicubic_resize: need at least 2 axes, got " + shape_str(img.shape()));
  if (out_h == 0 || out_w == 0) throw DimensionError("bicubic_resize: non-positive target size");
  const std::size_t H = img.dim(img.ndim() - 2), W = img.dim(img.ndim() - 1);
  const std::size_t planes = img.numel() / (H * W);
  const auto ch = detail::contributions(W, out_w);
  const auto cv = detail::contributions(H, out_h);

  Shape out_shape = img.shape();
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  BasicTensor<T> out(out_shape);
  std::vector<double> tmp(H * out_w);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = img.data().data() + p * H * W;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < ch.taps; ++t)
          acc += ch.weight[x * ch.taps + t] * static_cast<double>(src[y * W + ch.index[x * ch.taps + t]]);
        tmp[y * out_w + x] = acc;
      }
    T* dst = out.data().data() + p * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cv.taps; ++t)
          acc += cv.weight[y * cv.taps + t] * tmp[cv.index[y * cv.taps + t] * out_w + x];
        dst[y * out_w + x] = static_cast<T>(acc);
      }
  }
  return out;
}

/// Rational scale factor num/den applied to both spatial axes. The target
/// extent must be an exact integer.
template <typename T>
BasicTensor<T> bicubic_resample(const BasicTensor<T>& img, std::size_t num, std::size_t den) {
  if (num == 0 || den == 0) throw DimensionError("bicubic_resample: non-positive target size");
  const std::size_t H = img.dim(img.ndim() - 2), W = img.dim(img.ndim() - 1);
  if ((H * num) % den != 0 || (W * num) % den != 0) {
    throw DimensionError("bicubic_resample: " + std::to_string(H) + "x" + std::to_string(W) + " is not divisible by " +
                         std::to_string(den) + "/" + std::to_string(num));
  }
  return bicubic_resize(img, H * num / den, W * num / den);
}

}  // namespace dcnet::data
