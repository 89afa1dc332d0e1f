#pragma once

// Declarative experiment configuration (JSON) and its content hash.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "dcnet/data/scene.hpp"
#include "dcnet/model/config.hpp"
#include "dcnet/train/trainer.hpp"

namespace dcnet::cli {

/// Where training scenes come from. `source` is "synth" (generated in memory
/// from the synth_* fields) or a scene directory written by `degrade`.
struct DataConfig {
  std::string source = "synth";
  std::uint64_t synth_seed = 1;
  std::size_t synth_height = 256;  // truth resolution
  std::size_t synth_width = 256;
  data::ValueRange range;
  std::size_t patch_size = 64;
  std::size_t stride = 0;  // 0: equal to patch_size
  data::SplitFractions split;
  std::uint64_t split_seed = 0;
  std::size_t metric_window = 32;

  std::size_t effective_stride() const { return stride == 0 ? patch_size : stride; }
};

struct ExperimentConfig {
  ModelConfig model = tiny_config();
  DataConfig data;
  train::TrainOptions train;
  bool seed_given = false;
  std::filesystem::path output_dir = "runs/default";
};

inline nlohmann::json to_json(const DataConfig& d) {
  return nlohmann::json{{"source", d.source},
                        {"synth_seed", d.synth_seed},
                        {"synth_height", d.synth_height},
                        {"synth_width", d.synth_width},
                        {"range", {d.range.lo, d.range.hi}},
                        {"patch_size", d.patch_size},
                        {"stride", d.stride},
                        {"split", {d.split.train, d.split.val, d.split.test}},
                        {"split_seed", d.split_seed},
                        {"metric_window", d.metric_window}};
}

inline nlohmann::json to_json(const train::TrainOptions& t) {
  return nlohmann::json{{"epochs", t.epochs},         {"batch_size", t.batch_size}, {"base_lr", t.base_lr},
                        {"lr_period", t.lr_period},   {"lr_factor", t.lr_factor},   {"seed", t.seed}};
}

/// Everything that influences results. The output directory is left out so
/// that identical runs in different places hash equally.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"model", to_json(c.model)}, {"data", to_json(c.data)}, {"train", to_json(c.train)}};
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

inline DataConfig data_config_from_json(const nlohmann::json& j, DataConfig d = {}) {
  detail::reject_unknown(j,
                         {"source", "synth_seed", "synth_height", "synth_width", "range", "patch_size", "stride",
                          "split", "split_seed", "metric_window"},
                         "data");
  detail::read_field(j, "source", d.source);
  detail::read_field(j, "synth_seed", d.synth_seed);
  detail::read_field(j, "synth_height", d.synth_height);
  detail::read_field(j, "synth_width", d.synth_width);
  if (j.contains("range")) {
    const auto r = j.at("range").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("data.range must be [lo, hi]");
    d.range = {r[0], r[1]};
  }
  detail::read_field(j, "patch_size", d.patch_size);
  detail::read_field(j, "stride", d.stride);
  if (j.contains("split")) {
    const auto s = j.at("split").get<std::vector<double>>();
    if (s.size() != 3) throw ConfigError("data.split must be [train, val, test]");
    d.split = {s[0], s[1], s[2]};
  }
  detail::read_field(j, "split_seed", d.split_seed);
  detail::read_field(j, "metric_window", d.metric_window);
  return d;
}

inline train::TrainOptions train_options_from_json(const nlohmann::json& j, train::TrainOptions t, bool& seed_given) {
  detail::reject_unknown(j, {"epochs", "batch_size", "base_lr", "lr_period", "lr_factor", "seed"}, "train");
  detail::read_field(j, "epochs", t.epochs);
  detail::read_field(j, "batch_size", t.batch_size);
  detail::read_field(j, "base_lr", t.base_lr);
  detail::read_field(j, "lr_period", t.lr_period);
  detail::read_field(j, "lr_factor", t.lr_factor);
  if (j.contains("seed")) {
    t.seed = j.at("seed").get<std::uint64_t>();
    seed_given = true;
  }
  return t;
}

inline void validate(const ExperimentConfig& c) {
  c.model.validate();
  data::check_range(c.data.range);
  if (c.data.source != "synth" && !std::filesystem::is_directory(c.data.source)) {
    throw ConfigError("data.source '" + c.data.source + "' is neither \"synth\" nor an existing scene directory");
  }
  if (c.data.patch_size == 0 || c.data.patch_size % c.model.ratio != 0) {
    throw ConfigError("data.patch_size must be a positive multiple of the ratio");
  }
  if (c.data.metric_window == 0) throw ConfigError("data.metric_window must be positive");
  if (c.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (c.train.lr_period == 0) throw ConfigError("train.lr_period must be positive");
  if (!(c.train.base_lr > 0)) throw ConfigError("train.base_lr must be positive");
  if (!c.seed_given) throw ConfigError("train.seed is required (set it in the config or pass --seed)");
}

/// Parses an experiment file. Top-level keys: model, data, train, output_dir.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"model", "data", "train", "output_dir"}, "experiment");
  try {
    ExperimentConfig c;
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
    if (j.contains("data")) c.data = data_config_from_json(j.at("data"), c.data);
    if (j.contains("train")) c.train = train_options_from_json(j.at("train"), c.train, c.seed_given);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(c).dump())));
  return buf;
}

}  // namespace dcnet::cli
