#pragma once

// Pan-sharpening quality indices.
//
// Full-reference: SAM (degrees), ERGAS, UIQI, Q2^n (Q4/Q8), SCC.
// Reference-free: D_lambda, D_s, QNR.
//
// Every metric takes float tensors and accumulates in double. Windowed
// indices use non-overlapping window x window blocks (stride = window);
// trailing rows/columns that do not fill a block are ignored.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcnet/metrics/hypercomplex.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet::metrics {

inline constexpr std::size_t kDefaultWindow = 32;

namespace detail {

inline void require_same(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline void require_bands(const Tensor& t, const char* who) {
  if (t.ndim() != 3) throw DimensionError(std::string(who) + ": expected [B,H,W], got " + shape_str(t.shape()));
}

// Means closer to zero than this fraction of the spread count as zero, so the
// luminance factor is taken as 1 instead of 0/0.
inline constexpr double kZeroMeanRel = 1e-12;
inline constexpr double kFlatRel = 1e-20;

// Result of one window: nullopt when degenerate (skipped).
inline std::optional<double> window_quality(double cov, double var_a, double var_b, double mean_a2,
                                            double mean_b2, double mean_ab_signed) {
  const double spread = var_a + var_b;
  const double energy = mean_a2 + mean_b2;
  if (spread <= kFlatRel * energy) {
    // Both blocks (numerically) constant: equal nonzero means agree exactly.
    if (energy == 0) return std::nullopt;
    const double diff2 = mean_a2 + mean_b2 - 2 * mean_ab_signed;
    return diff2 <= 1e-12 * energy ? std::optional<double>(1.0) : std::nullopt;
  }
  const double contrast = 2 * cov / spread;
  const double lum = energy <= kZeroMeanRel * spread ? 1.0 : 2 * mean_ab_signed / energy;
  return contrast * lum;
}

struct Windows {
  std::size_t rows, cols;
};

inline Windows windows_for(std::size_t H, std::size_t W, std::size_t window, const char* who) {
  if (window == 0 || window > H || window > W) {
    throw DimensionError(std::string(who) + ": window " + std::to_string(window) + " exceeds image " +
                         std::to_string(H) + "x" + std::to_string(W));
  }
  return {H / window, W / window};
}

}  // namespace detail

/// Spectral angle mapper in degrees, averaged over pixels where neither
/// spectral vector is zero.
inline double sam(const Tensor& fused, const Tensor& ref) {
  detail::require_same(fused, ref, "sam");
  detail::require_bands(fused, "sam");
  const std::size_t B = fused.dim(0), P = fused.dim(1) * fused.dim(2);
  if (B < 2) throw DimensionError("sam: need at least 2 bands");
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t p = 0; p < P; ++p) {
    double dot = 0, nf = 0, nr = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const double f = fused[b * P + p], r = ref[b * P + p];
      dot += f * r;
      nf += f * f;
      nr += r * r;
    }
    if (nf == 0 || nr == 0) continue;
    total += std::acos(std::clamp(dot / std::sqrt(nf * nr), -1.0, 1.0));
    ++counted;
  }
  if (counted == 0) throw MetricError("sam: every pixel is a zero vector");
  return total / static_cast<double>(counted) * 180.0 / std::numbers::pi;
}

inline double ergas(const Tensor& fused, const Tensor& ref, double ratio = 4.0) {
  detail::require_same(fused, ref, "ergas");
  detail::require_bands(fused, "ergas");
  if (!(ratio > 0)) throw ConfigError("ergas: ratio must be positive");
  const std::size_t B = fused.dim(0), P = fused.dim(1) * fused.dim(2);
  double acc = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double se = 0, mu = 0;
    for (std::size_t p = 0; p < P; ++p) {
      const double d = static_cast<double>(fused[b * P + p]) - ref[b * P + p];
      se += d * d;
      mu += ref[b * P + p];
    }
    mu /= static_cast<double>(P);
    if (mu == 0) throw MetricError("ergas: reference band " + std::to_string(b) + " has zero mean");
    acc += (se / static_cast<double>(P)) / (mu * mu);
  }
  return 100.0 / ratio * std::sqrt(acc / static_cast<double>(B));
}

/// Wang-Bovik universal image quality index of two [H,W] planes, averaged
/// over non-degenerate windows.
inline double uiqi_plane(const float* a, const float* b, std::size_t H, std::size_t W, std::size_t window) {
  const auto grid = detail::windows_for(H, W, window, "uiqi");
  const double n = static_cast<double>(window * window);
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t wy = 0; wy < grid.rows; ++wy)
    for (std::size_t wx = 0; wx < grid.cols; ++wx) {
      double ma = 0, mb = 0;
      for (std::size_t y = wy * window; y < (wy + 1) * window; ++y)
        for (std::size_t x = wx * window; x < (wx + 1) * window; ++x) {
          ma += a[y * W + x];
          mb += b[y * W + x];
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cab = 0;
      for (std::size_t y = wy * window; y < (wy + 1) * window; ++y)
        for (std::size_t x = wx * window; x < (wx + 1) * window; ++x) {
          const double da = a[y * W + x] - ma, db = b[y * W + x] - mb;
          va += da * da;
          vb += db * db;
          cab += da * db;
        }
      if (auto q = detail::window_quality(cab / n, va / n, vb / n, ma * ma, mb * mb, ma * mb)) {
        total += *q;
        ++counted;
      }
    }
  if (counted == 0) throw MetricError("uiqi: every window is degenerate");
  return total / static_cast<double>(counted);
}

/// UIQI of [H,W] planes, or the mean over bands of [B,H,W] stacks.
inline double uiqi(const Tensor& a, const Tensor& b, std::size_t window = kDefaultWindow) {
  detail::require_same(a, b, "uiqi");
  if (a.ndim() == 2) return uiqi_plane(a.data().data(), b.data().data(), a.dim(0), a.dim(1), window);
  detail::require_bands(a, "uiqi");
  const std::size_t B = a.dim(0), H = a.dim(1), W = a.dim(2);
  double total = 0;
  for (std::size_t k = 0; k < B; ++k)
    total += uiqi_plane(a.data().data() + k * H * W, b.data().data() + k * H * W, H, W, window);
  return total / static_cast<double>(B);
}

namespace detail {

template <std::size_t N>
double q2n_impl(const Tensor& f, const Tensor& r, std::size_t window) {
  using Z = Hypercomplex<N>;
  const std::size_t B = f.dim(0), H = f.dim(1), W = f.dim(2), P = H * W;
  const auto grid = windows_for(H, W, window, "q2n");
  const double n = static_cast<double>(window * window);
  auto pixel = [&](const Tensor& t, std::size_t y, std::size_t x) {
    Z z;
    for (std::size_t b = 0; b < B; ++b) z.c[b] = t[b * P + y * W + x];
    return z;
  };
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t wy = 0; wy < grid.rows; ++wy)
    for (std::size_t wx = 0; wx < grid.cols; ++wx) {
      Z mf, mr;
      for (std::size_t y = wy * window; y < (wy + 1) * window; ++y)
        for (std::size_t x = wx * window; x < (wx + 1) * window; ++x) {
          mf += pixel(f, y, x);
          mr += pixel(r, y, x);
        }
      mf *= 1.0 / n;
      mr *= 1.0 / n;
      double vf = 0, vr = 0;
      Z cov;
      for (std::size_t y = wy * window; y < (wy + 1) * window; ++y)
        for (std::size_t x = wx * window; x < (wx + 1) * window; ++x) {
          const Z df = pixel(f, y, x) - mf, dr = pixel(r, y, x) - mr;
          vf += df.norm2();
          vr += dr.norm2();
          cov += df * dr.conj();
        }
      cov *= 1.0 / n;
      // Magnitudes replace signed products; the mean cross term uses |mf||mr|
      // for the luminance factor and the real inner product for equality.
      double mean_dot = 0;
      for (std::size_t i = 0; i < N; ++i) mean_dot += mf.c[i] * mr.c[i];
      const double spread = vf / n + vr / n;
      const double energy = mf.norm2() + mr.norm2();
      if (spread <= kFlatRel * energy) {
        if (energy == 0) continue;
        if (energy - 2 * mean_dot <= 1e-12 * energy) {
          total += 1.0;
          ++counted;
        }
        continue;
      }
      const double contrast = 2 * cov.abs() / spread;
      const double lum = energy <= kZeroMeanRel * spread ? 1.0 : 2 * mf.abs() * mr.abs() / energy;
      total += contrast * lum;
      ++counted;
    }
  if (counted == 0) throw MetricError("q2n: every window is degenerate");
  return total / static_cast<double>(counted);
}

}  // namespace detail

/// Hypercomplex extension of UIQI (Q4 for 4 bands, Q8 for 8). Bands are
/// zero-padded to the next power of two.
inline double q2n(const Tensor& fused, const Tensor& ref, std::size_t window = kDefaultWindow) {
  detail::require_same(fused, ref, "q2n");
  detail::require_bands(fused, "q2n");
  const std::size_t B = fused.dim(0);
  if (B <= 1) return detail::q2n_impl<1>(fused, ref, window);
  if (B <= 2) return detail::q2n_impl<2>(fused, ref, window);
  if (B <= 4) return detail::q2n_impl<4>(fused, ref, window);
  if (B <= 8) return detail::q2n_impl<8>(fused, ref, window);
  if (B <= 16) return detail::q2n_impl<16>(fused, ref, window);
  if (B <= 32) return detail::q2n_impl<32>(fused, ref, window);
  throw DimensionError("q2n: at most 32 bands supported");
}

/// Spatial correlation coefficient: Pearson correlation of 3x3 Laplacian
/// high-pass responses (valid pixels only), averaged over bands.
inline double scc(const Tensor& fused, const Tensor& ref) {
  detail::require_same(fused, ref, "scc");
  detail::require_bands(fused, "scc");
  const std::size_t B = fused.dim(0), H = fused.dim(1), W = fused.dim(2);
  if (H < 3 || W < 3) throw DimensionError("scc: need at least 3x3 pixels");
  auto highpass = [&](const Tensor& t, std::size_t b, std::size_t y, std::size_t x) {
    const float* p = t.data().data() + b * H * W;
    double s = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) s += p[(y + dy) * W + (x + dx)];
    return 9.0 * p[y * W + x] - s;  // 8 * centre minus the 8 neighbours
  };
  const double n = static_cast<double>((H - 2) * (W - 2));
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double mf = 0, mr = 0;
    for (std::size_t y = 1; y + 1 < H; ++y)
      for (std::size_t x = 1; x + 1 < W; ++x) {
        mf += highpass(fused, b, y, x);
        mr += highpass(ref, b, y, x);
      }
    mf /= n;
    mr /= n;
    double sff = 0, srr = 0, sfr = 0;
    for (std::size_t y = 1; y + 1 < H; ++y)
      for (std::size_t x = 1; x + 1 < W; ++x) {
        const double df = highpass(fused, b, y, x) - mf, dr = highpass(ref, b, y, x) - mr;
        sff += df * df;
        srr += dr * dr;
        sfr += df * dr;
      }
    if (sff == 0 || srr == 0) throw MetricError("scc: band " + std::to_string(b) + " has a flat high-pass response");
    total += sfr / std::sqrt(sff * srr);
  }
  return total / static_cast<double>(B);
}

namespace detail {

inline Tensor band(const Tensor& t, std::size_t b) {
  const std::size_t H = t.dim(1), W = t.dim(2);
  return Tensor({H, W}, std::vector<float>(t.values().begin() + static_cast<long>(b * H * W),
                                           t.values().begin() + static_cast<long>((b + 1) * H * W)));
}

inline std::size_t low_window(std::size_t window, std::size_t ratio) { return std::max<std::size_t>(1, window / ratio); }

}  // namespace detail

/// Spectral distortion: inter-band UIQI of the fused image against the same
/// at MS scale. The MS-scale window is window / ratio.
inline double d_lambda(const Tensor& fused, const Tensor& ms, double p = 1.0, std::size_t window = kDefaultWindow,
                       std::size_t ratio = 4) {
  detail::require_bands(fused, "d_lambda");
  detail::require_bands(ms, "d_lambda");
  const std::size_t B = fused.dim(0);
  if (ms.dim(0) != B) throw DimensionError("d_lambda: band count mismatch");
  if (B < 2) throw DimensionError("d_lambda: need at least 2 bands");
  const std::size_t wl = detail::low_window(window, ratio);
  double acc = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = b + 1; r < B; ++r) {
      const double qf = uiqi(detail::band(fused, b), detail::band(fused, r), window);
      const double qm = uiqi(detail::band(ms, b), detail::band(ms, r), wl);
      acc += 2 * std::pow(std::abs(qf - qm), p);  // both ordered pairs; UIQI is symmetric
    }
  return std::pow(acc / static_cast<double>(B * (B - 1)), 1.0 / p);
}

/// Spatial distortion: per-band UIQI against PAN at full scale versus against
/// the degraded PAN at MS scale.
inline double d_s(const Tensor& fused, const Tensor& ms, const Tensor& pan, const Tensor& pan_low, double q = 1.0,
                  std::size_t window = kDefaultWindow, std::size_t ratio = 4) {
  detail::require_bands(fused, "d_s");
  detail::require_bands(ms, "d_s");
  const std::size_t B = fused.dim(0);
  if (ms.dim(0) != B) throw DimensionError("d_s: band count mismatch");
  if (pan.ndim() != 2 || pan.dim(0) != fused.dim(1) || pan.dim(1) != fused.dim(2)) {
    throw DimensionError("d_s: pan " + shape_str(pan.shape()) + " does not match fused " + shape_str(fused.shape()));
  }
  if (pan_low.ndim() != 2 || pan_low.dim(0) != ms.dim(1) || pan_low.dim(1) != ms.dim(2)) {
    throw DimensionError("d_s: pan_low " + shape_str(pan_low.shape()) + " does not match ms " + shape_str(ms.shape()));
  }
  const std::size_t wl = detail::low_window(window, ratio);
  double acc = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const double qf = uiqi(detail::band(fused, b), pan, window);
    const double qm = uiqi(detail::band(ms, b), pan_low, wl);
    acc += std::pow(std::abs(qf - qm), q);
  }
  return std::pow(acc / static_cast<double>(B), 1.0 / q);
}

inline double qnr(double d_lambda_value, double d_s_value, double alpha = 1.0, double beta = 1.0) {
  return std::pow(1.0 - d_lambda_value, alpha) * std::pow(1.0 - d_s_value, beta);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricReport {
  std::optional<double> q2n, uiqi, sam_deg, ergas, scc;
  std::optional<double> d_lambda, d_s, qnr;

  static const std::vector<std::string>& columns() {
    static const std::vector<std::string> cols = {"q2n", "uiqi", "sam_deg", "ergas", "scc", "d_lambda", "d_s", "qnr"};
    return cols;
  }

  std::vector<std::optional<double>> values() const { return {q2n, uiqi, sam_deg, ergas, scc, d_lambda, d_s, qnr}; }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    const auto vals = values();
    for (std::size_t i = 0; i < vals.size(); ++i)
      if (vals[i]) j[columns()[i]] = *vals[i];
    return j;
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    std::optional<double>* slots[] = {&r.q2n, &r.uiqi, &r.sam_deg, &r.ergas, &r.scc, &r.d_lambda, &r.d_s, &r.qnr};
    for (std::size_t i = 0; i < columns().size(); ++i)
      if (j.contains(columns()[i])) *slots[i] = j.at(columns()[i]).get<double>();
    return r;
  }

  static std::string csv_header() {
    std::string s = "scene";
    for (const auto& c : columns()) s += "," + c;
    return s;
  }

  /// Missing values are empty fields; numbers use 17 significant digits.
  std::string csv_row(const std::string& scene) const {
    std::string s = scene;
    char buf[32];
    for (const auto& v : values()) {
      s += ",";
      if (v) {
        std::snprintf(buf, sizeof buf, "%.17g", *v);
        s += buf;
      }
    }
    return s;
  }
};

/// Field-wise mean; a field is present when it is present in every report.
inline MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport out;
  if (reports.empty()) return out;
  std::optional<double>* slots[] = {&out.q2n, &out.uiqi, &out.sam_deg, &out.ergas, &out.scc,
                                    &out.d_lambda, &out.d_s, &out.qnr};
  for (std::size_t i = 0; i < MetricReport::columns().size(); ++i) {
    double s = 0;
    bool all = true;
    for (const auto& r : reports) {
      const auto v = r.values()[i];
      if (!v) {
        all = false;
        break;
      }
      s += *v;
    }
    if (all) *slots[i] = s / static_cast<double>(reports.size());
  }
  return out;
}

/// All five full-reference indices.
inline MetricReport full_reference(const Tensor& fused, const Tensor& ref, std::size_t window = kDefaultWindow,
                                   double ratio = 4.0) {
  MetricReport r;
  r.q2n = q2n(fused, ref, window);
  r.uiqi = uiqi(fused, ref, window);
  r.sam_deg = sam(fused, ref);
  r.ergas = ergas(fused, ref, ratio);
  r.scc = scc(fused, ref);
  return r;
}

/// D_lambda, D_s and QNR with p = q = alpha = beta = 1.
inline MetricReport reference_free(const Tensor& fused, const Tensor& ms, const Tensor& pan, const Tensor& pan_low,
                                   std::size_t window = kDefaultWindow, std::size_t ratio = 4) {
  MetricReport r;
  r.d_lambda = d_lambda(fused, ms, 1.0, window, ratio);
  r.d_s = d_s(fused, ms, pan, pan_low, 1.0, window, ratio);
  r.qnr = qnr(*r.d_lambda, *r.d_s);
  return r;
}

}  // namespace dcnet::metrics
