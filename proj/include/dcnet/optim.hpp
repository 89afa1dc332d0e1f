#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcnet/params.hpp"

namespace dcnet {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates keyed by parameter name, plus the step count.
template <typename T>
struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::unordered_map<std::string, std::vector<T>> m;
  std::unordered_map<std::string, std::vector<T>> v;
};

/// One bias-corrected Adam update over every parameter in `params`.
/// Throws ConfigError naming the first parameter that has no gradient.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  for (const auto& e : params.entries()) {
    if (!e.value.has_grad()) throw ConfigError("adam_step: parameter '" + e.name + "' has no gradient");
  }
  state.step += 1;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (auto& e : params.entries()) {
    auto& m = state.m[e.name];
    auto& v = state.v[e.name];
    if (m.empty()) {
      m.assign(e.value.numel(), T{0});
      v.assign(e.value.numel(), T{0});
    }
    auto w = e.value.data();
    const auto g = e.value.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = static_cast<T>(o.beta1 * m[i] + (1.0 - o.beta1) * g[i]);
      v[i] = static_cast<T>(o.beta2 * v[i] + (1.0 - o.beta2) * double(g[i]) * g[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] = static_cast<T>(w[i] - o.lr * mhat / (std::sqrt(vhat) + o.eps));
    }
  }
}

/// Step decay: 20% reduction every 150 epochs.
inline double lr_schedule(std::size_t epoch, double base_lr, std::size_t period = 150, double factor = 0.8) {
  return base_lr * std::pow(factor, static_cast<double>(epoch / period));
}

}  // namespace dcnet
