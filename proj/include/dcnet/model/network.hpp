#pragma once

// Dual-channel pan-sharpening network.
//
// Layouts (batch first):
//   spatial features   [b, beta*C, H, W]
//   spectral features  [b, C, B, H, W]        (2d3d backbone)
//                      [b, C*B, H, W]         (2d2d backbone)
//   fusion state       [b, C, B, H, W]
// A spatial map with beta*C = B*C channels is viewed as a spectral volume by a
// plain reshape: channel k <-> (c = k / B, band = k % B).

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/data/resample.hpp"
#include "dcnet/model/config.hpp"
#include "dcnet/ops.hpp"
#include "dcnet/params.hpp"

namespace dcnet {

/// Hidden and cell state of the fusion cell.
template <typename T>
struct ClstmState {
  BasicTensor<T> h;
  BasicTensor<T> c;

  static ClstmState zeros(const Shape& volume) { return {BasicTensor<T>(volume), BasicTensor<T>(volume)}; }
};

/// Named intermediate shapes recorded during a forward pass.
struct ForwardTrace {
  std::vector<std::pair<std::string, Shape>> entries;

  void add(std::string name, Shape shape) { entries.emplace_back(std::move(name), std::move(shape)); }

  bool contains(const std::string& name) const {
    for (const auto& e : entries)
      if (e.first == name) return true;
    return false;
  }

  const Shape& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.first == name) return e.second;
    throw ConfigError("trace has no entry '" + name + "'");
  }
};

/// Feedback produced by one fusion step.
template <typename T>
struct FusionOutput {
  BasicTensor<T> to_spatial;   // spatial layout
  BasicTensor<T> to_spectral;  // spectral layout of the configured backbone
};

template <typename T>
class DCNet {
 public:
  explicit DCNet(ModelConfig config, std::uint64_t seed = 0) : cfg_(std::move(config)) {
    cfg_.validate();
    build(seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// pan [b,1,H,W] and ms [b,B,H/r,W/r] (normalized) -> [b,B,H,W].
  BasicTensor<T> forward(const BasicTensor<T>& pan, const BasicTensor<T>& ms, ForwardTrace* trace = nullptr) const {
    check_inputs(pan, ms);
    const std::size_t b = pan.dim(0), H = pan.dim(2), W = pan.dim(3);
    auto fp = spatial_stem(pan);
    auto fm = spectral_stem(upsample_ms(ms));
    if (trace) {
      trace->add("spatial.stem", fp.shape());
      trace->add("spectral.stem", volume_shape_of(fm));
    }
    auto state = ClstmState<T>::zeros(volume_shape(b, H, W));
    for (std::size_t l = 1; l <= cfg_.levels; ++l) {
      auto fp_c = residual("spatial.level" + std::to_string(l), fp);
      auto fm_c = residual("spectral.level" + std::to_string(l), fm);
      if (trace) {
        trace->add(level_key(l, "F_P_CLSTM"), to_volume(fp_c).shape());
        trace->add(level_key(l, "F_M_CLSTM"), volume_shape_of(fm_c));
      }
      std::optional<FusionOutput<T>> fb;
      if (cfg_.fuses(l)) {
        fb = fuse(l, fp_c, fm_c, state);
        if (trace) {
          trace->add(level_key(l, "F_CLSTM_P"), fb->to_spatial.shape());
          trace->add(level_key(l, "F_CLSTM_M"), volume_shape_of(fb->to_spectral));
        }
      }
      if (l < cfg_.levels && fb) {
        fp = add(fp_c, fb->to_spatial);
        fm = add(fm_c, fb->to_spectral);
      } else {
        fp = fp_c;
        fm = fm_c;
      }
      if (trace && l < cfg_.levels) {
        trace->add(level_key(l, "F_P"), fp.shape());
        trace->add(level_key(l, "F_M"), volume_shape_of(fm));
      }
    }
    auto y = reconstruct(fp, fm, state.h);
    if (trace) trace->add("output", y.shape());
    return y;
  }

  // -- Building blocks (public for composition tests) ------------------------

  /// Bicubic x ratio of the MS input; a data transform, never differentiated.
  BasicTensor<T> upsample_ms(const BasicTensor<T>& ms) const {
    return data::bicubic_resample(ms.detach(), cfg_.ratio, 1);
  }

  /// [b,1,H,W] -> [b,beta*C,H,W]
  BasicTensor<T> spatial_stem(const BasicTensor<T>& pan) const {
    if (pan.ndim() != 4 || pan.dim(1) != 1) {
      throw DimensionError("spatial_stem: PAN must be [b,1,H,W], got " + shape_str(pan.shape()));
    }
    return conv_act("spatial.stem", pan);
  }

  /// Upsampled MS [b,B,H,W] -> spectral features.
  BasicTensor<T> spectral_stem(const BasicTensor<T>& ms_up) const {
    if (ms_up.ndim() != 4 || ms_up.dim(1) != cfg_.bands) {
      throw DimensionError("spectral_stem: MS must be [b," + std::to_string(cfg_.bands) + ",H,W], got " +
                           shape_str(ms_up.shape()));
    }
    if (cfg_.backbone == Backbone::homo_2d2d) return conv_act("spectral.stem", ms_up);
    const std::size_t b = ms_up.dim(0), H = ms_up.dim(2), W = ms_up.dim(3);
    return conv_act("spectral.stem", reshape(ms_up, {b, 1, cfg_.bands, H, W}));
  }

  /// x + PReLU(conv1(PReLU(conv0(x)))); 2D or 3D by the rank of x.
  BasicTensor<T> residual(const std::string& prefix, const BasicTensor<T>& x) const {
    return add(x, conv_act(prefix + ".conv1", conv_act(prefix + ".conv0", x)));
  }

  /// One fusion step at `level`: updates `state` and returns the feedback.
  FusionOutput<T> fuse(std::size_t level, const BasicTensor<T>& fp, const BasicTensor<T>& fm,
                       ClstmState<T>& state) const {
    const auto fm_vol = to_volume(fm);
    if (state.h.shape() != fm_vol.shape() || state.c.shape() != fm_vol.shape()) {
      throw DimensionError("fuse: state " + shape_str(state.h.shape()) + " does not match feature " +
                           shape_str(fm_vol.shape()));
    }
    if (fp.ndim() != 4 || fp.dim(1) != cfg_.spatial_channels()) {
      throw DimensionError("fuse: spatial feature must have " + std::to_string(cfg_.spatial_channels()) +
                           " channels, got " + shape_str(fp.shape()));
    }
    if (cfg_.fusion_op == FusionOp::s2clstm) {
      clstm_step(fp, fm_vol, state);
    } else {
      state.h = alt_fusion(level, to_volume(fp), fm_vol);
    }
    return {to_planes(state.h), spectral_layout(state.h)};
  }

  /// Gated fusion cell:
  ///   i = sig(Wp.P + Wm.M + Wh.H' + Wci (*)_g C' + b_i)
  ///   f = sig(Wp.P + Wm.M + Wh.H' + Wcf (*)_g C' + b_f)
  ///   C = f o C' + i o tanh(Wp.P + Wm.M + Wh.H' + b_c)
  ///   o = sig(Wp.P + Wm.M + Wh.H' + Wco (*)_g C + b_o)
  ///   H = o o tanh(C)
  /// P is the spatial feature viewed as a volume and projected by a 3D conv
  /// (or a transposed conv); (*)_g is a depthwise conv. Wp, Wm, Wh stack the
  /// four gates along the output channels in the order i, f, o, c.
  void clstm_step(const BasicTensor<T>& fp, const BasicTensor<T>& fm_vol, ClstmState<T>& state) const {
    const std::size_t C = cfg_.spectral_channels;
    const auto& P = params_;
    const ConvOptions same{1, cfg_.kernel / 2, 1};
    const auto p_vol = to_volume(fp);
    auto proj = cfg_.use_conv_transpose ? conv_transpose(p_vol, P.get("clstm.wp"), BasicTensor<T>{}, same)
                                        : conv(p_vol, P.get("clstm.wp"), same);
    auto z = add(add(proj, conv(fm_vol, P.get("clstm.wm"), P.get("clstm.b"), same)), conv(state.h, P.get("clstm.wh"), same));
    auto peep = [&](const char* name, const BasicTensor<T>& cell) {
      return conv(cell, P.get(name), ConvOptions{1, cfg_.peephole_kernel / 2, C});
    };
    auto i = sigmoid(add(narrow(z, 1, 0, C), peep("clstm.wci", state.c)));
    auto f = sigmoid(add(narrow(z, 1, C, C), peep("clstm.wcf", state.c)));
    auto cand = dcnet::tanh(narrow(z, 1, 3 * C, C));
    auto c_new = add(mul(f, state.c), mul(i, cand));
    auto o = sigmoid(add(narrow(z, 1, 2 * C, C), peep("clstm.wco", c_new)));
    state.h = mul(o, dcnet::tanh(c_new));
    state.c = c_new;
  }

  /// Non-recurrent fusion of two volumes.
  BasicTensor<T> alt_fusion(std::size_t level, const BasicTensor<T>& p_vol, const BasicTensor<T>& m_vol) const {
    switch (cfg_.fusion_op) {
      case FusionOp::sum: return add(p_vol, m_vol);
      case FusionOp::max: return maximum(p_vol, m_vol);
      case FusionOp::average: return scale(add(p_vol, m_vol), T(0.5));
      case FusionOp::product: return mul(p_vol, m_vol);
      case FusionOp::conv: {
        const std::string pre = "fusion" + std::to_string(level);
        return conv(concat<T>({p_vol, m_vol}, 1), params_.get(pre + ".w"), params_.get(pre + ".b"));
      }
      case FusionOp::s2clstm: break;
    }
    throw ConfigError("alt_fusion: " + to_string(cfg_.fusion_op) + " is not a stateless fusion");
  }

  /// Level-L spatial/spectral features and final hidden state -> [b,B,H,W].
  BasicTensor<T> reconstruct(const BasicTensor<T>& fp, const BasicTensor<T>& fm, const BasicTensor<T>& h) const {
    const auto fm_vol = to_volume(fm);
    const auto p_vol = to_volume(fp);
    if (p_vol.shape() != fm_vol.shape() || h.shape() != fm_vol.shape()) {
      throw DimensionError("reconstruct: inputs disagree: " + shape_str(p_vol.shape()) + ", " +
                           shape_str(fm_vol.shape()) + ", " + shape_str(h.shape()));
    }
    const ConvOptions same{1, cfg_.kernel / 2, 1};
    const auto& P = params_;
    auto proj = cfg_.use_conv_transpose ? conv_transpose(p_vol, P.get("recon.proj.w"), P.get("recon.proj.b"), same)
                                        : conv(p_vol, P.get("recon.proj.w"), P.get("recon.proj.b"), same);
    auto z = conv_act("recon.bottleneck", concat<T>({proj, fm_vol, h}, 1));
    z = residual("recon.res", z);
    auto y = conv(z, P.get("recon.out.w"), P.get("recon.out.b"), same);
    return reshape(y, {y.dim(0), cfg_.bands, y.dim(3), y.dim(4)});
  }

  // -- Layout helpers --------------------------------------------------------

  Shape volume_shape(std::size_t b, std::size_t H, std::size_t W) const {
    return {b, cfg_.spectral_channels, cfg_.bands, H, W};
  }

  /// Spatial or 2D spectral map [b,C*B,H,W] -> [b,C,B,H,W]; volumes pass through.
  BasicTensor<T> to_volume(const BasicTensor<T>& x) const {
    if (x.ndim() == 5) return x;
    return reshape(x, volume_shape(x.dim(0), x.dim(2), x.dim(3)));
  }

  BasicTensor<T> to_planes(const BasicTensor<T>& vol) const {
    return reshape(vol, {vol.dim(0), vol.dim(1) * vol.dim(2), vol.dim(3), vol.dim(4)});
  }

  BasicTensor<T> spectral_layout(const BasicTensor<T>& vol) const {
    return cfg_.backbone == Backbone::homo_2d2d ? to_planes(vol) : vol;
  }

 private:
  static std::string level_key(std::size_t l, const char* what) { return "level" + std::to_string(l) + "." + what; }

  Shape volume_shape_of(const BasicTensor<T>& spectral) const {
    if (spectral.ndim() == 5) return spectral.shape();
    return volume_shape(spectral.dim(0), spectral.dim(2), spectral.dim(3));
  }

  void check_inputs(const BasicTensor<T>& pan, const BasicTensor<T>& ms) const {
    if (pan.ndim() != 4 || pan.dim(1) != 1) {
      throw DimensionError("forward: PAN must be [b,1,H,W], got " + shape_str(pan.shape()));
    }
    if (ms.ndim() != 4 || ms.dim(1) != cfg_.bands) {
      throw DimensionError("forward: MS must be [b," + std::to_string(cfg_.bands) + ",h,w], got " +
                           shape_str(ms.shape()));
    }
    if (ms.dim(0) != pan.dim(0) || pan.dim(2) != cfg_.ratio * ms.dim(2) || pan.dim(3) != cfg_.ratio * ms.dim(3)) {
      throw DimensionError("forward: PAN " + shape_str(pan.shape()) + " is not " + std::to_string(cfg_.ratio) +
                           "x MS " + shape_str(ms.shape()));
    }
  }

  /// PReLU(conv(x)) with "same" padding, using <prefix>.w/.b/.a.
  BasicTensor<T> conv_act(const std::string& prefix, const BasicTensor<T>& x) const {
    const auto& w = params_.get(prefix + ".w");
    const ConvOptions same{1, w.dim(w.ndim() - 1) / 2, 1};
    return prelu(conv(x, w, params_.get(prefix + ".b"), same), params_.get(prefix + ".a"));
  }

  // -- Parameter construction -----------------------------------------------

  Shape kernel_shape(std::size_t c_out, std::size_t c_in, std::size_t k, bool volumetric) const {
    return volumetric ? Shape{c_out, c_in, k, k, k} : Shape{c_out, c_in, k, k};
  }

  void add_weight(const std::string& name, Shape shape, std::size_t fan_in, double gain) {
    const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
    std::normal_distribution<double> N(0.0, stddev);
    BasicTensor<T> w(std::move(shape));
    for (auto& v : w.values()) v = static_cast<T>(N(rng_));
    params_.add(name, ParamKind::weight, std::move(w));
  }

  void add_bias(const std::string& name, std::size_t n, double value = 0.0) {
    params_.add(name, ParamKind::bias, BasicTensor<T>({n}, static_cast<T>(value)));
  }

  void add_conv_act(const std::string& prefix, std::size_t c_out, std::size_t c_in, std::size_t k, bool volumetric) {
    const std::size_t fan_in = c_in * k * k * (volumetric ? k : 1);
    add_weight(prefix + ".w", kernel_shape(c_out, c_in, k, volumetric), fan_in, kPreluGain);
    add_bias(prefix + ".b", c_out);
    params_.add(prefix + ".a", ParamKind::slope, BasicTensor<T>({c_out}, T(0.25)));
  }

  void add_residual(const std::string& prefix, std::size_t channels, bool volumetric) {
    add_conv_act(prefix + ".conv0", channels, channels, cfg_.kernel, volumetric);
    add_conv_act(prefix + ".conv1", channels, channels, cfg_.kernel, volumetric);
  }

  void build(std::uint64_t seed) {
    rng_.seed(seed);
    const std::size_t B = cfg_.bands, C = cfg_.spectral_channels, S = cfg_.spatial_channels(), k = cfg_.kernel;
    const bool spectral3d = cfg_.backbone == Backbone::hetero_2d3d;
    const std::size_t k3 = k * k * k;

    add_conv_act("spatial.stem", S, 1, k, false);
    if (spectral3d) {
      add_conv_act("spectral.stem", C, 1, k, true);
    } else {
      add_conv_act("spectral.stem", C * B, B, k, false);
    }
    for (std::size_t l = 1; l <= cfg_.levels; ++l) {
      add_residual("spatial.level" + std::to_string(l), S, false);
      add_residual("spectral.level" + std::to_string(l), spectral3d ? C : C * B, spectral3d);
    }

    if (!cfg_.fusion_levels.empty()) {
      if (cfg_.fusion_op == FusionOp::s2clstm) {
        const std::size_t pk = cfg_.peephole_kernel;
        // Transposed-conv weights are laid out [c_in, c_out, k...].
        add_weight("clstm.wp", cfg_.use_conv_transpose ? kernel_shape(C, 4 * C, k, true) : kernel_shape(4 * C, C, k, true),
                   C * k3, 1.0);
        add_weight("clstm.wm", kernel_shape(4 * C, C, k, true), C * k3, 1.0);
        add_weight("clstm.wh", kernel_shape(4 * C, C, k, true), C * k3, 1.0);
        BasicTensor<T> gate_bias({4 * C});
        for (std::size_t c = C; c < 2 * C; ++c) gate_bias[c] = static_cast<T>(cfg_.forget_bias);
        params_.add("clstm.b", ParamKind::bias, std::move(gate_bias));
        for (const char* name : {"clstm.wci", "clstm.wcf", "clstm.wco"})
          add_weight(name, kernel_shape(C, 1, pk, true), pk * pk * pk, 1.0);
      } else if (cfg_.fusion_op == FusionOp::conv) {
        for (auto l : cfg_.fusion_levels) {
          const std::string pre = "fusion" + std::to_string(l);
          add_weight(pre + ".w", kernel_shape(C, 2 * C, 1, true), 2 * C, 1.0);
          add_bias(pre + ".b", C);
        }
      }
    }

    add_weight("recon.proj.w", kernel_shape(C, C, k, true), C * k3, 1.0);
    add_bias("recon.proj.b", C);
    add_conv_act("recon.bottleneck", C, 3 * C, 1, true);
    add_residual("recon.res", C, true);
    add_weight("recon.out.w", kernel_shape(1, C, k, true), C * k3, 1.0);
    add_bias("recon.out.b", 1);
  }

  static constexpr double kPreluGain = 1.3719886811400708;  // sqrt(2 / (1 + 0.25^2))

  ModelConfig cfg_;
  ParamStore<T> params_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Objective

template <typename T>
struct LossTerms {
  BasicTensor<T> total;
  double l1 = 0.0;
  double l2 = 0.0;  // sum of squared weights, before lambda
};

/// mean|y_hat - y| + lambda * sum of squared conv weights. Biases and PReLU
/// slopes are not penalized.
template <typename T>
LossTerms<T> dcnet_loss(const BasicTensor<T>& y_hat, const BasicTensor<T>& y, const ParamStore<T>& params,
                        double lambda) {
  if (y_hat.shape() != y.shape()) {
    throw DimensionError("loss: prediction " + shape_str(y_hat.shape()) + " vs target " + shape_str(y.shape()));
  }
  LossTerms<T> out;
  auto data_term = l1_loss(y_hat, y);
  out.l1 = static_cast<double>(data_term.item());
  if (lambda == 0.0) {
    out.total = data_term;
    return out;
  }
  BasicTensor<T> penalty;
  for (const auto& e : params.entries()) {
    if (e.kind != ParamKind::weight) continue;
    auto s = sum_squares(e.value);
    penalty = penalty.defined() ? add(penalty, s) : s;
  }
  if (!penalty.defined()) {
    out.total = data_term;
    return out;
  }
  out.l2 = static_cast<double>(penalty.item());
  out.total = add(data_term, scale(penalty, static_cast<T>(lambda)));
  return out;
}

}  // namespace dcnet
