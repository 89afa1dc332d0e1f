#pragma once

// Differentiable tensor operations.
//
// Every op is a pure function of its inputs. When a tape is active on the
// calling thread and an input requires a gradient, the op appends a node whose
// closure accumulates the vector-Jacobian product into the inputs.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "dcnet/conv_kernels.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

namespace detail {

template <typename T>
Tape<T>* recording_tape(std::initializer_list<const BasicTensor<T>*> inputs) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs)
    if (t != nullptr && t->defined() && t->requires_grad()) return tape;
  return nullptr;
}

template <typename T>
bool wants_grad(const ImplPtr<T>& p) {
  return p && p->requires_grad;
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Broadcasting is limited to identical shapes or a single-element operand.
template <typename T>
Shape broadcast_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

// Reduces an output gradient onto an operand that may have been broadcast.
template <typename T, typename F>
void accumulate_broadcast(const ImplPtr<T>& dst, const std::vector<T>& g, F&& scale_at) {
  auto& buf = dst->grad_buffer();
  if (buf.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * scale_at(i);
  } else {
    T s{0};
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * scale_at(i);
    buf[0] += s;
  }
}

inline std::size_t channel_count(const Shape& s) { return s.size() >= 2 ? s[1] : 1; }
inline std::size_t inner_extent(const Shape& s) {
  std::size_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return inner;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out(detail::broadcast_shape(a, b, "add"));
  const std::size_t n = out.numel();
  const bool ab = a.numel() == 1 && n != 1, bb = b.numel() == 1 && n != 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = a[ab ? 0 : i] + b[bb ? 0 : i];
  if (auto* tape = detail::recording_tape({&a, &b})) {
    tape->record("add", {a.impl(), b.impl()}, out.impl(), [ai = a.impl(), bi = b.impl()](const std::vector<T>& g) {
      if (detail::wants_grad(ai)) detail::accumulate_broadcast(ai, g, [](std::size_t) { return T{1}; });
      if (detail::wants_grad(bi)) detail::accumulate_broadcast(bi, g, [](std::size_t) { return T{1}; });
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out(detail::broadcast_shape(a, b, "sub"));
  const std::size_t n = out.numel();
  const bool ab = a.numel() == 1 && n != 1, bb = b.numel() == 1 && n != 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = a[ab ? 0 : i] - b[bb ? 0 : i];
  if (auto* tape = detail::recording_tape({&a, &b})) {
    tape->record("sub", {a.impl(), b.impl()}, out.impl(), [ai = a.impl(), bi = b.impl()](const std::vector<T>& g) {
      if (detail::wants_grad(ai)) detail::accumulate_broadcast(ai, g, [](std::size_t) { return T{1}; });
      if (detail::wants_grad(bi)) detail::accumulate_broadcast(bi, g, [](std::size_t) { return T{-1}; });
    });
  }
  return out;
}

/// Hadamard product.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out(detail::broadcast_shape(a, b, "mul"));
  const std::size_t n = out.numel();
  const bool ab = a.numel() == 1 && n != 1, bb = b.numel() == 1 && n != 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = a[ab ? 0 : i] * b[bb ? 0 : i];
  if (auto* tape = detail::recording_tape({&a, &b})) {
    tape->record("mul", {a.impl(), b.impl()}, out.impl(),
                 [ai = a.impl(), bi = b.impl(), ab, bb](const std::vector<T>& g) {
                   if (detail::wants_grad(ai))
                     detail::accumulate_broadcast(ai, g, [&](std::size_t i) { return bi->data[bb ? 0 : i]; });
                   if (detail::wants_grad(bi))
                     detail::accumulate_broadcast(bi, g, [&](std::size_t i) { return ai->data[ab ? 0 : i]; });
                 });
  }
  return out;
}

/// Elementwise maximum; ties route the gradient to `a`.
template <typename T>
BasicTensor<T> maximum(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "maximum");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(a[i], b[i]);
  if (auto* tape = detail::recording_tape({&a, &b})) {
    tape->record("maximum", {a.impl(), b.impl()}, out.impl(),
                 [ai = a.impl(), bi = b.impl()](const std::vector<T>& g) {
                   const auto& av = ai->data;
                   const auto& bv = bi->data;
                   if (detail::wants_grad(ai)) {
                     auto& ga = ai->grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i)
                       if (av[i] >= bv[i]) ga[i] += g[i];
                   }
                   if (detail::wants_grad(bi)) {
                     auto& gb = bi->grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i)
                       if (av[i] < bv[i]) gb[i] += g[i];
                   }
                 });
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * s;
  if (auto* tape = detail::recording_tape({&a})) {
    tape->record("scale", {a.impl()}, out.impl(), [ai = a.impl(), s](const std::vector<T>& g) {
      auto& ga = ai->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = T{1} / (T{1} + std::exp(-x[i]));
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("sigmoid", {x.impl()}, out.impl(),
                 [xi = x.impl(), yi = std::weak_ptr(out.impl())](const std::vector<T>& g) {
                   const auto y = yi.lock();
                   auto& gx = xi->grad_buffer();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y->data[i] * (T{1} - y->data[i]);
                 });
  }
  return out;
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x[i]);
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("tanh", {x.impl()}, out.impl(),
                 [xi = x.impl(), yi = std::weak_ptr(out.impl())](const std::vector<T>& g) {
                   const auto y = yi.lock();
                   auto& gx = xi->grad_buffer();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T{1} - y->data[i] * y->data[i]);
                 });
  }
  return out;
}

/// PReLU with one learnable slope per channel (axis 1). A single-element
/// slope is shared by all channels.
template <typename T>
BasicTensor<T> prelu(const BasicTensor<T>& x, const BasicTensor<T>& slope) {
  const std::size_t channels = detail::channel_count(x.shape());
  if (slope.numel() != channels && slope.numel() != 1) {
    throw DimensionError("prelu: slope has " + std::to_string(slope.numel()) + " entries, channel axis 1 has " +
                         std::to_string(channels));
  }
  const std::size_t inner = detail::inner_extent(x.shape());
  const bool shared = slope.numel() == 1;
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T a = slope[shared ? 0 : (i / inner) % channels];
    out[i] = x[i] > T{0} ? x[i] : a * x[i];
  }
  if (auto* tape = detail::recording_tape({&x, &slope})) {
    tape->record("prelu", {x.impl(), slope.impl()}, out.impl(),
                 [xi = x.impl(), ai = slope.impl(), inner, channels, shared](const std::vector<T>& g) {
                   const auto& xv = xi->data;
                   if (detail::wants_grad(xi)) {
                     auto& gx = xi->grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const T a = ai->data[shared ? 0 : (i / inner) % channels];
                       gx[i] += xv[i] > T{0} ? g[i] : g[i] * a;
                     }
                   }
                   if (detail::wants_grad(ai)) {
                     auto& ga = ai->grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i)
                       if (xv[i] <= T{0}) ga[shared ? 0 : (i / inner) % channels] += g[i] * xv[i];
                   }
                 });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  BasicTensor<T> out(std::move(shape), x.values());
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("reshape", {x.impl()}, out.impl(), [xi = x.impl()](const std::vector<T>& g) {
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t a = 0; a < first.size(); ++a) {
      if (a != axis && p.shape()[a] != first[a]) {
        throw DimensionError("concat: extent mismatch on axis " + std::to_string(a));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
  BasicTensor<T> out(out_shape);
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const std::size_t row = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.values().begin() + o * row, row, out.values().begin() + o * out_row + offset);
    offsets.push_back(offset);
    offset += row;
  }
  Tape<T>* tape = active_tape<T>();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape != nullptr && any) {
    std::vector<detail::ImplPtr<T>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    tape->record("concat", impls, out.impl(),
                 [impls, offsets, outer, inner, out_row, axis](const std::vector<T>& g) {
                   for (std::size_t k = 0; k < impls.size(); ++k) {
                     if (!detail::wants_grad(impls[k])) continue;
                     auto& gp = impls[k]->grad_buffer();
                     const std::size_t row = impls[k]->shape[axis] * inner;
                     for (std::size_t o = 0; o < outer; ++o)
                       for (std::size_t i = 0; i < row; ++i) gp[o * row + i] += g[o * out_row + offsets[k] + i];
                   }
                 });
  }
  return out;
}

/// Slice [start, start + length) of `axis`.
template <typename T>
BasicTensor<T> narrow(const BasicTensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.ndim()) throw DimensionError("narrow: axis " + std::to_string(axis) + " out of range");
  if (length == 0 || start + length > x.dim(axis)) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.ndim(); ++a) inner *= x.dim(a);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  BasicTensor<T> out(out_shape);
  const std::size_t in_row = x.dim(axis) * inner, row = length * inner, offset = start * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(x.values().begin() + o * in_row + offset, row, out.values().begin() + o * row);
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("narrow", {x.impl()}, out.impl(), [xi = x.impl(), outer, in_row, row, offset](const std::vector<T>& g) {
      auto& gx = xi->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < row; ++i) gx[o * in_row + offset + i] += g[o * row + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T s{0};
  for (const T v : x.data()) s += v;
  auto out = BasicTensor<T>::scalar(s);
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("sum", {x.impl()}, out.impl(), [xi = x.impl()](const std::vector<T>& g) {
      auto& gx = xi->grad_buffer();
      for (auto& v : gx) v += g[0];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

/// Sum of squared entries.
template <typename T>
BasicTensor<T> sum_squares(const BasicTensor<T>& x) {
  T s{0};
  for (const T v : x.data()) s += v * v;
  auto out = BasicTensor<T>::scalar(s);
  if (auto* tape = detail::recording_tape({&x})) {
    tape->record("sum_squares", {x.impl()}, out.impl(), [xi = x.impl()](const std::vector<T>& g) {
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T{2} * xi->data[i] * g[0];
    });
  }
  return out;
}

/// Mean absolute difference. The subgradient at a == b is taken as zero.
template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "l1_loss");
  T s{0};
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
  const T inv_n = T{1} / static_cast<T>(a.numel());
  auto out = BasicTensor<T>::scalar(s * inv_n);
  if (auto* tape = detail::recording_tape({&a, &b})) {
    tape->record("l1_loss", {a.impl(), b.impl()}, out.impl(),
                 [ai = a.impl(), bi = b.impl(), inv_n](const std::vector<T>& g) {
                   const T k = g[0] * inv_n;
                   for (std::size_t i = 0; i < ai->data.size(); ++i) {
                     const T d = ai->data[i] - bi->data[i];
                     const T sgn = d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0});
                     if (detail::wants_grad(ai)) ai->grad_buffer()[i] += k * sgn;
                     if (detail::wants_grad(bi)) bi->grad_buffer()[i] -= k * sgn;
                   }
                 });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

namespace detail {

template <typename T>
void add_channel_bias(std::vector<T>& y, const BasicTensor<T>& bias, std::size_t batch, std::size_t channels,
                      std::size_t inner) {
  if (!bias.defined()) return;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      T* row = y.data() + (n * channels + c) * inner;
      const T b = bias[c];
      for (std::size_t i = 0; i < inner; ++i) row[i] += b;
    }
}

template <typename T>
void bias_grad(const std::vector<T>& g, const ImplPtr<T>& bias, std::size_t batch, std::size_t channels,
               std::size_t inner) {
  if (!wants_grad(bias)) return;
  auto& gb = bias->grad_buffer();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const T* row = g.data() + (n * channels + c) * inner;
      T s{0};
      for (std::size_t i = 0; i < inner; ++i) s += row[i];
      gb[c] += s;
    }
}

// Spatial extents of a [b, c, (d,) h, w] tensor as (d, h, w).
inline std::array<std::size_t, 3> spatial3(const Shape& s) {
  return s.size() == 4 ? std::array<std::size_t, 3>{1, s[2], s[3]} : std::array<std::size_t, 3>{s[2], s[3], s[4]};
}

inline std::array<std::size_t, 3> lift3(std::size_t v, std::size_t rank, std::size_t depth_value) {
  return rank == 4 ? std::array<std::size_t, 3>{depth_value, v, v} : std::array<std::size_t, 3>{v, v, v};
}

inline Shape make_shape(std::size_t batch, std::size_t channels, const std::array<std::size_t, 3>& sp,
                        std::size_t rank) {
  if (rank == 4) return {batch, channels, sp[1], sp[2]};
  return {batch, channels, sp[0], sp[1], sp[2]};
}

template <typename T>
void check_conv_ranks(const BasicTensor<T>& x, const BasicTensor<T>& w, const char* op) {
  if (x.ndim() != 4 && x.ndim() != 5) {
    throw DimensionError(std::string(op) + ": input must be rank 4 or 5, got " + shape_str(x.shape()));
  }
  if (w.ndim() != x.ndim()) {
    throw DimensionError(std::string(op) + ": weight rank " + std::to_string(w.ndim()) + " differs from input rank " +
                         std::to_string(x.ndim()));
  }
}

}  // namespace detail

/// Cross-correlation with zero padding over rank-4 ([b,c,h,w]) or rank-5
/// ([b,c,d,h,w]) inputs. Weight layout is [c_out, c_in/groups, k...].
template <typename T>
BasicTensor<T> conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                    ConvOptions opt = {}) {
  detail::check_conv_ranks(x, w, "conv");
  const std::size_t rank = x.ndim();
  if (opt.groups == 0 || x.dim(1) % opt.groups != 0) {
    throw ConfigError("conv: groups=" + std::to_string(opt.groups) + " does not divide " + std::to_string(x.dim(1)) +
                      " input channels");
  }
  if (w.dim(0) % opt.groups != 0) {
    throw ConfigError("conv: groups=" + std::to_string(opt.groups) + " does not divide " + std::to_string(w.dim(0)) +
                      " output channels");
  }
  if (w.dim(1) * opt.groups != x.dim(1)) {
    throw DimensionError("conv: channel axis 1 has " + std::to_string(x.dim(1)) + " entries, weight expects " +
                         std::to_string(w.dim(1) * opt.groups));
  }
  kernels::ConvGeometry geo;
  geo.batch = x.dim(0);
  geo.c_in = x.dim(1);
  geo.c_out = w.dim(0);
  geo.groups = opt.groups;
  geo.in = detail::spatial3(x.shape());
  geo.kernel = detail::spatial3(w.shape());
  geo.stride = detail::lift3(opt.stride, rank, 1);
  geo.pad = detail::lift3(opt.padding, rank, 0);
  geo.resolve_output();
  if (bias.defined() && bias.numel() != geo.c_out) {
    throw DimensionError("conv: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                         std::to_string(geo.c_out));
  }

  BasicTensor<T> out(detail::make_shape(geo.batch, geo.c_out, geo.out, rank));
  kernels::conv_forward<T>(geo, x.data(), w.data(), out.data());
  detail::add_channel_bias(out.values(), bias, geo.batch, geo.c_out, geo.out[0] * geo.out_plane());

  if (auto* tape = detail::recording_tape({&x, &w, &bias})) {
    tape->record("conv", {x.impl(), w.impl(), bias.defined() ? bias.impl() : nullptr}, out.impl(),
                 [geo, xi = x.impl(), wi = w.impl(), bi = bias.defined() ? bias.impl() : nullptr](
                     const std::vector<T>& g) {
                   if (detail::wants_grad(xi))
                     kernels::conv_backward_data<T>(geo, g, wi->data, xi->grad_buffer());
                   if (detail::wants_grad(wi))
                     kernels::conv_backward_weight<T>(geo, xi->data, g, wi->grad_buffer());
                   detail::bias_grad(g, bi, geo.batch, geo.c_out, geo.out[0] * geo.out_plane());
                 });
  }
  return out;
}

template <typename T>
BasicTensor<T> conv(const BasicTensor<T>& x, const BasicTensor<T>& w, ConvOptions opt = {}) {
  return conv(x, w, BasicTensor<T>{}, opt);
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                      std::size_t stride = 1, std::size_t padding = 0) {
  if (x.ndim() != 4) throw DimensionError("conv2d: input must be [b,c,h,w], got " + shape_str(x.shape()));
  return conv(x, w, bias, ConvOptions{stride, padding, 1});
}

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                      std::size_t stride = 1, std::size_t padding = 0) {
  if (x.ndim() != 5) throw DimensionError("conv3d: input must be [b,c,d,h,w], got " + shape_str(x.shape()));
  return conv(x, w, bias, ConvOptions{stride, padding, 1});
}

/// Channel-grouped convolution; depthwise when groups equals the channel count.
template <typename T>
BasicTensor<T> grouped_conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                            std::size_t groups, std::size_t padding = 0) {
  return conv(x, w, bias, ConvOptions{1, padding, groups});
}

/// Transposed convolution (the adjoint of conv in its input).
///
/// Weight layout is [c_in, c_out/groups, k...]. `output_spatial` lists the
/// output spatial extents (h,w or d,h,w) and disambiguates strided cases; when
/// empty, the smallest consistent size is used.
template <typename T>
BasicTensor<T> conv_transpose(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                              ConvOptions opt = {}, const std::vector<std::size_t>& output_spatial = {}) {
  detail::check_conv_ranks(x, w, "conv_transpose");
  const std::size_t rank = x.ndim();
  if (opt.groups == 0 || x.dim(1) % opt.groups != 0) {
    throw ConfigError("conv_transpose: groups does not divide input channels");
  }
  if (w.dim(0) != x.dim(1)) {
    throw DimensionError("conv_transpose: channel axis 1 has " + std::to_string(x.dim(1)) +
                         " entries, weight axis 0 has " + std::to_string(w.dim(0)));
  }
  // Geometry of the forward convolution this op is the adjoint of.
  kernels::ConvGeometry geo;
  geo.batch = x.dim(0);
  geo.c_in = w.dim(1) * opt.groups;
  geo.c_out = x.dim(1);
  geo.groups = opt.groups;
  geo.kernel = detail::spatial3(w.shape());
  geo.stride = detail::lift3(opt.stride, rank, 1);
  geo.pad = detail::lift3(opt.padding, rank, 0);
  const auto in_sp = detail::spatial3(x.shape());
  if (output_spatial.empty()) {
    for (int a = 0; a < 3; ++a) {
      const std::size_t full = (in_sp[a] - 1) * geo.stride[a] + geo.kernel[a];
      if (full <= 2 * geo.pad[a]) throw DimensionError("conv_transpose: padding consumes the whole output");
      geo.in[a] = full - 2 * geo.pad[a];
    }
  } else {
    const std::size_t want = rank - 2;
    if (output_spatial.size() != want) {
      throw DimensionError("conv_transpose: output shape hint needs " + std::to_string(want) + " extents");
    }
    geo.in = rank == 4 ? std::array<std::size_t, 3>{1, output_spatial[0], output_spatial[1]}
                       : std::array<std::size_t, 3>{output_spatial[0], output_spatial[1], output_spatial[2]};
  }
  geo.resolve_output();
  if (geo.out != in_sp) {
    throw DimensionError("conv_transpose: output shape hint is inconsistent with stride/padding arithmetic");
  }
  if (bias.defined() && bias.numel() != geo.c_in) {
    throw DimensionError("conv_transpose: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                         std::to_string(geo.c_in));
  }

  BasicTensor<T> out(detail::make_shape(geo.batch, geo.c_in, geo.in, rank));
  kernels::conv_backward_data<T>(geo, x.data(), w.data(), out.data());
  detail::add_channel_bias(out.values(), bias, geo.batch, geo.c_in, geo.in[0] * geo.in_plane());

  if (auto* tape = detail::recording_tape({&x, &w, &bias})) {
    tape->record("conv_transpose", {x.impl(), w.impl(), bias.defined() ? bias.impl() : nullptr}, out.impl(),
                 [geo, xi = x.impl(), wi = w.impl(), bi = bias.defined() ? bias.impl() : nullptr](
                     const std::vector<T>& g) {
                   if (detail::wants_grad(xi)) {
                     std::vector<T> tmp(geo.out_numel());
                     kernels::conv_forward<T>(geo, g, wi->data, tmp);
                     auto& gx = xi->grad_buffer();
                     for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
                   }
                   if (detail::wants_grad(wi)) kernels::conv_backward_weight<T>(geo, g, xi->data, wi->grad_buffer());
                   detail::bias_grad(g, bi, geo.batch, geo.c_in, geo.in[0] * geo.in_plane());
                 });
  }
  return out;
}

}  // namespace dcnet
