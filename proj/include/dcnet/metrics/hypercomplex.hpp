#pragma once

// Cayley-Dickson hypercomplex numbers with N = 2^k real coefficients.
// N=1 reals, N=2 complex, N=4 quaternions, N=8 octonions, N=16 sedenions.
// Multiplication is bilinear for every N; it is associative only up to N=4
// and the norm is multiplicative only up to N=8.

#include <array>
#include <cmath>
#include <cstddef>

namespace dcnet::metrics {

namespace detail {

// (a,b)(c,d) = (ac - conj(d) b, d a + b conj(c))
inline void cd_conj(const double* x, double* out, std::size_t n) {
  out[0] = x[0];
  for (std::size_t i = 1; i < n; ++i) out[i] = -x[i];
}

inline void cd_mul(const double* x, const double* y, double* out, std::size_t n) {
  if (n == 1) {
    out[0] = x[0] * y[0];
    return;
  }
  const std::size_t h = n / 2;
  const double *a = x, *b = x + h, *c = y, *d = y + h;
  double t1[32], t2[32], cc[32], dc[32];
  cd_conj(d, dc, h);
  cd_conj(c, cc, h);
  cd_mul(a, c, t1, h);
  cd_mul(dc, b, t2, h);
  for (std::size_t i = 0; i < h; ++i) out[i] = t1[i] - t2[i];
  cd_mul(d, a, t1, h);
  cd_mul(b, cc, t2, h);
  for (std::size_t i = 0; i < h; ++i) out[h + i] = t1[i] + t2[i];
}

}  // namespace detail

template <std::size_t N>
struct Hypercomplex {
  static_assert(N >= 1 && N <= 32 && (N & (N - 1)) == 0, "N must be a power of two up to 32");
  std::array<double, N> c{};

  static constexpr std::size_t size = N;

  double real() const { return c[0]; }

  Hypercomplex conj() const {
    Hypercomplex r;
    detail::cd_conj(c.data(), r.c.data(), N);
    return r;
  }

  double norm2() const {
    double s = 0;
    for (double v : c) s += v * v;
    return s;
  }
  double abs() const { return std::sqrt(norm2()); }

  Hypercomplex& operator+=(const Hypercomplex& o) {
    for (std::size_t i = 0; i < N; ++i) c[i] += o.c[i];
    return *this;
  }
  Hypercomplex& operator-=(const Hypercomplex& o) {
    for (std::size_t i = 0; i < N; ++i) c[i] -= o.c[i];
    return *this;
  }
  Hypercomplex& operator*=(double s) {
    for (double& v : c) v *= s;
    return *this;
  }
  friend Hypercomplex operator+(Hypercomplex a, const Hypercomplex& b) { return a += b; }
  friend Hypercomplex operator-(Hypercomplex a, const Hypercomplex& b) { return a -= b; }
  friend Hypercomplex operator*(Hypercomplex a, double s) { return a *= s; }
  friend Hypercomplex operator*(const Hypercomplex& a, const Hypercomplex& b) {
    Hypercomplex r;
    detail::cd_mul(a.c.data(), b.c.data(), r.c.data(), N);
    return r;
  }
  friend bool operator==(const Hypercomplex&, const Hypercomplex&) = default;
};

}  // namespace dcnet::metrics
