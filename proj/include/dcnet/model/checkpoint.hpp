#pragma once

// Checkpoints: a PTEN archive holding one entry per parameter (in store
// order) plus a JSON sidecar "<path>.json" with the model configuration and
// caller-supplied metadata. Optimizer moments go to a separate archive so a
// run can resume bit-exactly.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dcnet/data/io.hpp"
#include "dcnet/model/network.hpp"
#include "dcnet/optim.hpp"

namespace dcnet {

inline std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  io::write_atomic(path, std::vector<char>(text.begin(), text.end()));
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const DCNet<float>& net,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  io::NamedTensors entries;
  for (const auto& e : net.params().entries()) entries.emplace_back(e.name, e.value.detach());
  io::write_archive(path, entries);
  write_json_atomic(sidecar_path(path), nlohmann::json{{"model", to_json(net.config())}, {"meta", meta}});
}

/// Copies archived values into `params`; names, order and shapes must match.
inline void load_params(const io::NamedTensors& entries, ParamStore<float>& params) {
  if (entries.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& dst = params.entries()[i];
    const auto& [name, src] = entries[i];
    if (name != dst.name) throw FormatError("checkpoint entry " + std::to_string(i) + " is '" + name + "', expected '" + dst.name + "'");
    if (src.shape() != dst.value.shape()) {
      throw FormatError("checkpoint entry '" + name + "' has shape " + shape_str(src.shape()) + ", expected " +
                        shape_str(dst.value.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), dst.value.values().begin());
  }
}

struct LoadedCheckpoint {
  DCNet<float> net;
  nlohmann::json meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto side = read_json(sidecar_path(path));
  if (!side.contains("model")) throw FormatError(sidecar_path(path).string() + ": missing 'model'");
  LoadedCheckpoint out{DCNet<float>(model_config_from_json(side.at("model"))), side.value("meta", nlohmann::json::object())};
  load_params(io::read_archive(path), out.net.params());
  return out;
}

/// Adam moments as "m/<param>" and "v/<param>" entries; the step count rides
/// in the sidecar.
inline void save_optimizer(const std::filesystem::path& path, const AdamState<float>& state,
                           const ParamStore<float>& params) {
  io::NamedTensors entries;
  for (const auto& e : params.entries()) {
    const auto m = state.m.find(e.name);
    if (m == state.m.end()) continue;
    entries.emplace_back("m/" + e.name, Tensor(e.value.shape(), m->second));
    entries.emplace_back("v/" + e.name, Tensor(e.value.shape(), state.v.at(e.name)));
  }
  io::write_archive(path, entries);
  write_json_atomic(sidecar_path(path), nlohmann::json{{"step", state.step},
                                                       {"lr", state.options.lr},
                                                       {"beta1", state.options.beta1},
                                                       {"beta2", state.options.beta2},
                                                       {"eps", state.options.eps}});
}

inline AdamState<float> load_optimizer(const std::filesystem::path& path) {
  const auto side = read_json(sidecar_path(path));
  AdamState<float> st;
  st.step = side.at("step").get<std::size_t>();
  st.options.lr = side.at("lr").get<double>();
  st.options.beta1 = side.at("beta1").get<double>();
  st.options.beta2 = side.at("beta2").get<double>();
  st.options.eps = side.at("eps").get<double>();
  for (auto& [name, t] : io::read_archive(path)) {
    if (name.size() < 3 || name[1] != '/') throw FormatError("optimizer archive: bad entry '" + name + "'");
    auto& dst = name[0] == 'm' ? st.m : st.v;
    dst[name.substr(2)] = t.values();
  }
  return st;
}

}  // namespace dcnet
