#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcnet/errors.hpp"

namespace dcnet {

enum class FusionOp { s2clstm, sum, max, average, product, conv };
enum class Backbone { hetero_2d3d, homo_2d2d };

inline const std::vector<FusionOp>& all_fusion_ops() {
  static const std::vector<FusionOp> ops = {FusionOp::sum,     FusionOp::max,  FusionOp::average,
                                            FusionOp::product, FusionOp::conv, FusionOp::s2clstm};
  return ops;
}

inline std::string to_string(FusionOp op) {
  switch (op) {
    case FusionOp::s2clstm: return "s2clstm";
    case FusionOp::sum: return "sum";
    case FusionOp::max: return "max";
    case FusionOp::average: return "average";
    case FusionOp::product: return "product";
    case FusionOp::conv: return "conv";
  }
  return "?";
}

inline FusionOp parse_fusion_op(const std::string& s) {
  for (auto op : all_fusion_ops())
    if (to_string(op) == s) return op;
  throw ConfigError("unknown fusion_op '" + s + "' (expected sum, max, average, product, conv or s2clstm)");
}

inline std::string to_string(Backbone b) { return b == Backbone::hetero_2d3d ? "2d3d" : "2d2d"; }

inline Backbone parse_backbone(const std::string& s) {
  if (s == "2d3d") return Backbone::hetero_2d3d;
  if (s == "2d2d") return Backbone::homo_2d2d;
  throw ConfigError("unknown backbone '" + s + "' (expected 2d3d or 2d2d)");
}

inline std::vector<std::size_t> all_levels(std::size_t levels) {
  std::vector<std::size_t> v(levels);
  for (std::size_t l = 0; l < levels; ++l) v[l] = l + 1;
  return v;
}

/// Network hyper-parameters.
///
/// The spatial channel carries beta * C feature maps, the spectral channel C
/// maps per band. beta must equal the band count so that a spatial map
/// reshapes exactly onto a [C, B] spectral volume.
struct ModelConfig {
  std::size_t bands = 4;
  std::size_t spectral_channels = 32;
  std::size_t beta = 4;
  std::size_t levels = 4;
  std::size_t kernel = 3;
  std::size_t peephole_kernel = 3;
  std::vector<std::size_t> fusion_levels = all_levels(4);
  FusionOp fusion_op = FusionOp::s2clstm;
  Backbone backbone = Backbone::hetero_2d3d;
  double lambda = 1e-6;
  double forget_bias = 0.0;
  bool use_conv_transpose = false;
  std::size_t ratio = 4;

  std::size_t spatial_channels() const { return beta * spectral_channels; }

  bool fuses(std::size_t level) const {
    return std::find(fusion_levels.begin(), fusion_levels.end(), level) != fusion_levels.end();
  }

  void validate() const {
    if (bands == 0 || spectral_channels == 0) throw ConfigError("model: bands and spectral_channels must be positive");
    if (beta != bands) {
      throw ConfigError("model: beta (" + std::to_string(beta) + ") must equal bands (" + std::to_string(bands) + ")");
    }
    if (levels == 0) throw ConfigError("model: levels must be at least 1");
    if (kernel % 2 == 0 || peephole_kernel % 2 == 0) throw ConfigError("model: kernel sizes must be odd");
    if (ratio == 0) throw ConfigError("model: ratio must be positive");
    if (lambda < 0) throw ConfigError("model: lambda must be non-negative");
    for (std::size_t i = 0; i < fusion_levels.size(); ++i) {
      const auto l = fusion_levels[i];
      if (l < 1 || l > levels) {
        throw ConfigError("model: fusion level " + std::to_string(l) + " outside 1.." + std::to_string(levels));
      }
      if (i > 0 && fusion_levels[i - 1] >= l) throw ConfigError("model: fusion_levels must be strictly increasing");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 4-band preset: 128 spatial maps, 32 spectral maps per band.
inline ModelConfig ikonos_config() { return ModelConfig{}; }

/// 8-band preset: 128 spatial maps, 16 spectral maps per band.
inline ModelConfig worldview2_config() {
  ModelConfig c;
  c.bands = 8;
  c.beta = 8;
  c.spectral_channels = 16;
  return c;
}

/// Small network for tests and desk-scale experiments.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.spectral_channels = 4;
  c.levels = 2;
  c.fusion_levels = all_levels(2);
  return c;
}

inline ModelConfig preset_config(const std::string& name) {
  if (name == "ikonos") return ikonos_config();
  if (name == "worldview2") return worldview2_config();
  if (name == "tiny") return tiny_config();
  throw ConfigError("unknown model preset '" + name + "' (expected ikonos, worldview2 or tiny)");
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"bands", c.bands},
                        {"spectral_channels", c.spectral_channels},
                        {"beta", c.beta},
                        {"levels", c.levels},
                        {"kernel", c.kernel},
                        {"peephole_kernel", c.peephole_kernel},
                        {"fusion_levels", c.fusion_levels},
                        {"fusion_op", to_string(c.fusion_op)},
                        {"backbone", to_string(c.backbone)},
                        {"lambda", c.lambda},
                        {"forget_bias", c.forget_bias},
                        {"use_conv_transpose", c.use_conv_transpose},
                        {"ratio", c.ratio}};
}

/// Fields absent from `j` keep the values of `base`. A "preset" key selects the
/// base; when `levels` changes and `fusion_levels` is absent, every level fuses.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {}) {
  static const std::vector<std::string> known = {"preset", "bands",       "spectral_channels",  "beta",
                                                 "levels", "kernel",      "peephole_kernel",    "fusion_levels",
                                                 "fusion_op", "backbone", "lambda",             "forget_bias",
                                                 "use_conv_transpose",    "ratio"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("model: unknown key '" + key + "'");
  try {
    ModelConfig c = j.contains("preset") ? preset_config(j.at("preset").get<std::string>()) : base;
    if (j.contains("bands")) {
      c.bands = j.at("bands").get<std::size_t>();
      if (!j.contains("beta")) c.beta = c.bands;
    }
    if (j.contains("spectral_channels")) c.spectral_channels = j.at("spectral_channels").get<std::size_t>();
    if (j.contains("beta")) c.beta = j.at("beta").get<std::size_t>();
    if (j.contains("levels")) {
      c.levels = j.at("levels").get<std::size_t>();
      if (!j.contains("fusion_levels")) c.fusion_levels = all_levels(c.levels);
    }
    if (j.contains("kernel")) c.kernel = j.at("kernel").get<std::size_t>();
    if (j.contains("peephole_kernel")) c.peephole_kernel = j.at("peephole_kernel").get<std::size_t>();
    if (j.contains("fusion_levels")) c.fusion_levels = j.at("fusion_levels").get<std::vector<std::size_t>>();
    if (j.contains("fusion_op")) c.fusion_op = parse_fusion_op(j.at("fusion_op").get<std::string>());
    if (j.contains("backbone")) c.backbone = parse_backbone(j.at("backbone").get<std::string>());
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("forget_bias")) c.forget_bias = j.at("forget_bias").get<double>();
    if (j.contains("use_conv_transpose")) c.use_conv_transpose = j.at("use_conv_transpose").get<bool>();
    if (j.contains("ratio")) c.ratio = j.at("ratio").get<std::size_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

}  // namespace dcnet
