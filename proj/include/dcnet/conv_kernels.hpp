#pragma once

// im2col + GEMM convolution kernels shared by conv2d, conv3d, grouped and
// transposed convolution.
//
// Every tensor is viewed as [batch, channel, depth, height, width]; 2D
// convolution is the depth-1 case. The im2col buffer is built one input depth
// slice at a time and reused by every kernel depth tap that reads that slice,
// so memory stays at (c_in/groups * kh * kw) x (out_h * out_w).
//
// The three kernels are the forward pass and its two adjoints. The transposed
// convolution runs them with roles swapped.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcnet/errors.hpp"

namespace dcnet::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t groups = 1;
  std::array<std::size_t, 3> in{1, 1, 1};      // d, h, w
  std::array<std::size_t, 3> kernel{1, 1, 1};  // kd, kh, kw
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};
  std::array<std::size_t, 3> out{1, 1, 1};

  std::size_t cin_g() const { return c_in / groups; }
  std::size_t cout_g() const { return c_out / groups; }
  std::size_t in_plane() const { return in[1] * in[2]; }
  std::size_t out_plane() const { return out[1] * out[2]; }
  std::size_t in_numel() const { return batch * c_in * in[0] * in_plane(); }
  std::size_t out_numel() const { return batch * c_out * out[0] * out_plane(); }
  std::size_t weight_numel() const { return c_out * cin_g() * kernel[0] * kernel[1] * kernel[2]; }

  bool pointwise_hw() const {
    return kernel[1] == 1 && kernel[2] == 1 && stride[1] == 1 && stride[2] == 1 && pad[1] == 0 && pad[2] == 0;
  }

  /// Derives `out` from in/kernel/stride/pad. Throws when the kernel does not fit.
  void resolve_output() {
    static constexpr const char* axis_names[3] = {"depth", "height", "width"};
    for (int a = 0; a < 3; ++a) {
      if (stride[a] == 0) throw ConfigError("conv: stride must be positive");
      if (in[a] + 2 * pad[a] < kernel[a]) {
        throw DimensionError(std::string("conv: kernel larger than padded input along ") + axis_names[a]);
      }
      out[a] = (in[a] + 2 * pad[a] - kernel[a]) / stride[a] + 1;
    }
  }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Output depth fed by input depth `id` through kernel tap `kd`, or -1.
inline long tap_target(const ConvGeometry& g, std::size_t id, std::size_t kd) {
  const long t = static_cast<long>(id) + static_cast<long>(g.pad[0]) - static_cast<long>(kd);
  if (t < 0 || t % static_cast<long>(g.stride[0]) != 0) return -1;
  const long od = t / static_cast<long>(g.stride[0]);
  return od < static_cast<long>(g.out[0]) ? od : -1;
}

// Weights [c_out, cin_g, kd, kh, kw] repacked as [group][kd] blocks of
// cout_g x (cin_g * kh * kw).
template <typename T>
std::vector<T> pack_weights(const ConvGeometry& g, std::span<const T> w) {
  const std::size_t KD = g.kernel[0], K2 = g.kernel[1] * g.kernel[2];
  const std::size_t rows = g.cin_g() * K2;
  std::vector<T> packed(g.groups * KD * g.cout_g() * rows);
  for (std::size_t grp = 0; grp < g.groups; ++grp)
    for (std::size_t kd = 0; kd < KD; ++kd) {
      T* block = packed.data() + (grp * KD + kd) * g.cout_g() * rows;
      for (std::size_t co = 0; co < g.cout_g(); ++co)
        for (std::size_t ci = 0; ci < g.cin_g(); ++ci)
          for (std::size_t k2 = 0; k2 < K2; ++k2)
            block[co * rows + ci * K2 + k2] = w[(((grp * g.cout_g() + co) * g.cin_g() + ci) * KD + kd) * K2 + k2];
    }
  return packed;
}

template <typename T>
void unpack_add_weights(const ConvGeometry& g, const std::vector<T>& packed, std::span<T> w) {
  const std::size_t KD = g.kernel[0], K2 = g.kernel[1] * g.kernel[2];
  const std::size_t rows = g.cin_g() * K2;
  for (std::size_t grp = 0; grp < g.groups; ++grp)
    for (std::size_t kd = 0; kd < KD; ++kd) {
      const T* block = packed.data() + (grp * KD + kd) * g.cout_g() * rows;
      for (std::size_t co = 0; co < g.cout_g(); ++co)
        for (std::size_t ci = 0; ci < g.cin_g(); ++ci)
          for (std::size_t k2 = 0; k2 < K2; ++k2)
            w[(((grp * g.cout_g() + co) * g.cin_g() + ci) * KD + kd) * K2 + k2] += block[co * rows + ci * K2 + k2];
    }
}

// Pointer to (n, channel, depth) plane of a [b, c, d, h, w] buffer.
inline std::size_t plane_offset(std::size_t n, std::size_t c, std::size_t d, std::size_t channels, std::size_t depth,
                                std::size_t plane) {
  return ((n * channels + c) * depth + d) * plane;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, std::size_t n, std::size_t grp, std::size_t id, T* col) {
  const std::size_t H = g.in[1], W = g.in[2], KH = g.kernel[1], KW = g.kernel[2];
  const std::size_t OH = g.out[1], OW = g.out[2], P = OH * OW;
  for (std::size_t ci = 0; ci < g.cin_g(); ++ci) {
    const T* src = x + plane_offset(n, grp * g.cin_g() + ci, id, g.c_in, g.in[0], H * W);
    for (std::size_t ky = 0; ky < KH; ++ky)
      for (std::size_t kx = 0; kx < KW; ++kx) {
        T* dst = col + ((ci * KH + ky) * KW + kx) * P;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          const long iy = static_cast<long>(oy * g.stride[1] + ky) - static_cast<long>(g.pad[1]);
          T* row = dst + oy * OW;
          if (iy < 0 || iy >= static_cast<long>(H)) {
            std::fill(row, row + OW, T{0});
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(iy) * W;
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const long ix = static_cast<long>(ox * g.stride[2] + kx) - static_cast<long>(g.pad[2]);
            row[ox] = (ix < 0 || ix >= static_cast<long>(W)) ? T{0} : src_row[ix];
          }
        }
      }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, std::size_t n, std::size_t grp, std::size_t id, T* x) {
  const std::size_t H = g.in[1], W = g.in[2], KH = g.kernel[1], KW = g.kernel[2];
  const std::size_t OH = g.out[1], OW = g.out[2], P = OH * OW;
  for (std::size_t ci = 0; ci < g.cin_g(); ++ci) {
    T* dst = x + plane_offset(n, grp * g.cin_g() + ci, id, g.c_in, g.in[0], H * W);
    for (std::size_t ky = 0; ky < KH; ++ky)
      for (std::size_t kx = 0; kx < KW; ++kx) {
        const T* src = col + ((ci * KH + ky) * KW + kx) * P;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          const long iy = static_cast<long>(oy * g.stride[1] + ky) - static_cast<long>(g.pad[1]);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          T* dst_row = dst + static_cast<std::size_t>(iy) * W;
          const T* row = src + oy * OW;
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const long ix = static_cast<long>(ox * g.stride[2] + kx) - static_cast<long>(g.pad[2]);
            if (ix >= 0 && ix < static_cast<long>(W)) dst_row[ix] += row[ox];
          }
        }
      }
  }
}

}  // namespace detail

/// y = conv(x, w). `y` must hold out_numel() elements; it is overwritten.
template <typename T>
void conv_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<T> y) {
  using namespace detail;
  std::fill(y.begin(), y.end(), T{0});
  const std::size_t KD = g.kernel[0];
  const std::size_t rows = g.cin_g() * g.kernel[1] * g.kernel[2];
  const std::size_t P = g.out_plane();
  const std::size_t in_depth_stride = g.in[0] * g.in_plane();
  const std::size_t out_depth_stride = g.out[0] * P;
  const auto packed = pack_weights(g, w);
  const bool direct = g.pointwise_hw();
  std::vector<T> col(direct ? 0 : rows * P);

  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t grp = 0; grp < g.groups; ++grp)
      for (std::size_t id = 0; id < g.in[0]; ++id) {
        bool used = false;
        for (std::size_t kd = 0; kd < KD && !used; ++kd) used = tap_target(g, id, kd) >= 0;
        if (!used) continue;
        const T* col_ptr;
        std::size_t col_stride;
        if (direct) {
          col_ptr = x.data() + plane_offset(n, grp * g.cin_g(), id, g.c_in, g.in[0], g.in_plane());
          col_stride = in_depth_stride;
        } else {
          im2col(g, x.data(), n, grp, id, col.data());
          col_ptr = col.data();
          col_stride = P;
        }
        ConstMatMap<T> colm(col_ptr, rows, P, Eigen::OuterStride<>(col_stride));
        for (std::size_t kd = 0; kd < KD; ++kd) {
          const long od = tap_target(g, id, kd);
          if (od < 0) continue;
          ConstMatMap<T> wm(packed.data() + (grp * KD + kd) * g.cout_g() * rows, g.cout_g(), rows,
                            Eigen::OuterStride<>(rows));
          MatMap<T> ym(y.data() + plane_offset(n, grp * g.cout_g(), od, g.c_out, g.out[0], P), g.cout_g(), P,
                       Eigen::OuterStride<>(out_depth_stride));
          ym.noalias() += wm * colm;
        }
      }
}

/// dx += conv_backward_data(dy, w): the adjoint of conv_forward in x.
template <typename T>
void conv_backward_data(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w, std::span<T> dx) {
  using namespace detail;
  const std::size_t KD = g.kernel[0];
  const std::size_t rows = g.cin_g() * g.kernel[1] * g.kernel[2];
  const std::size_t P = g.out_plane();
  const std::size_t in_depth_stride = g.in[0] * g.in_plane();
  const std::size_t out_depth_stride = g.out[0] * P;
  const auto packed = pack_weights(g, w);
  const bool direct = g.pointwise_hw();
  RowMat<T> dcol(rows, P);

  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t grp = 0; grp < g.groups; ++grp)
      for (std::size_t id = 0; id < g.in[0]; ++id) {
        bool used = false;
        dcol.setZero();
        for (std::size_t kd = 0; kd < KD; ++kd) {
          const long od = tap_target(g, id, kd);
          if (od < 0) continue;
          used = true;
          ConstMatMap<T> wm(packed.data() + (grp * KD + kd) * g.cout_g() * rows, g.cout_g(), rows,
                            Eigen::OuterStride<>(rows));
          ConstMatMap<T> dym(dy.data() + plane_offset(n, grp * g.cout_g(), od, g.c_out, g.out[0], P), g.cout_g(), P,
                             Eigen::OuterStride<>(out_depth_stride));
          dcol.noalias() += wm.transpose() * dym;
        }
        if (!used) continue;
        if (direct) {
          MatMap<T> dxm(dx.data() + plane_offset(n, grp * g.cin_g(), id, g.c_in, g.in[0], g.in_plane()), rows, P,
                        Eigen::OuterStride<>(in_depth_stride));
          dxm += dcol;
        } else {
          col2im_add(g, dcol.data(), n, grp, id, dx.data());
        }
      }
}

/// dw += conv_backward_weight(x, dy): the adjoint of conv_forward in w.
template <typename T>
void conv_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy, std::span<T> dw) {
  using namespace detail;
  const std::size_t KD = g.kernel[0];
  const std::size_t rows = g.cin_g() * g.kernel[1] * g.kernel[2];
  const std::size_t P = g.out_plane();
  const std::size_t in_depth_stride = g.in[0] * g.in_plane();
  const std::size_t out_depth_stride = g.out[0] * P;
  std::vector<T> packed(g.groups * KD * g.cout_g() * rows, T{0});
  const bool direct = g.pointwise_hw();
  std::vector<T> col(direct ? 0 : rows * P);

  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t grp = 0; grp < g.groups; ++grp)
      for (std::size_t id = 0; id < g.in[0]; ++id) {
        bool used = false;
        for (std::size_t kd = 0; kd < KD && !used; ++kd) used = tap_target(g, id, kd) >= 0;
        if (!used) continue;
        const T* col_ptr;
        std::size_t col_stride;
        if (direct) {
          col_ptr = x.data() + plane_offset(n, grp * g.cin_g(), id, g.c_in, g.in[0], g.in_plane());
          col_stride = in_depth_stride;
        } else {
          im2col(g, x.data(), n, grp, id, col.data());
          col_ptr = col.data();
          col_stride = P;
        }
        ConstMatMap<T> colm(col_ptr, rows, P, Eigen::OuterStride<>(col_stride));
        for (std::size_t kd = 0; kd < KD; ++kd) {
          const long od = tap_target(g, id, kd);
          if (od < 0) continue;
          MatMap<T> dwm(packed.data() + (grp * KD + kd) * g.cout_g() * rows, g.cout_g(), rows,
                        Eigen::OuterStride<>(rows));
          ConstMatMap<T> dym(dy.data() + plane_offset(n, grp * g.cout_g(), od, g.c_out, g.out[0], P), g.cout_g(), P,
                             Eigen::OuterStride<>(out_depth_stride));
          dwm.noalias() += dym * colm.transpose();
        }
      }
  unpack_add_weights(g, packed, dw);
}

}  // namespace dcnet::kernels
