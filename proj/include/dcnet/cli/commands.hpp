#pragma once

// Command implementations behind the dcnet tool. Each command is a function
// of its arguments, input files and seed; none reads the clock except the
// optional ablation budget.
//
// Scene directory layout:
//   scene.json   {"ratio", "range": [lo, hi], "bands"}
//   pan.pten     [H,W]
//   ms.pten      [B,H/r,W/r]
//   truth.pten   [B,H,W]   (optional)
// Run directory layout (train):
//   manifest.json, loss.csv, metrics.csv
//   best.pten(.json)                  best-validation parameters
//   last.pten(.json), last.adam.pten(.json)   resume state

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcnet/cli/experiment.hpp"
#include "dcnet/data/io.hpp"
#include "dcnet/data/scene.hpp"
#include "dcnet/metrics/metrics.hpp"
#include "dcnet/model/checkpoint.hpp"
#include "dcnet/train/trainer.hpp"
#include "dcnet/version.hpp"

namespace dcnet::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  io::write_atomic(path, std::vector<char>(text.begin(), text.end()));
}

/// Bands shown in RGB previews: red, green, blue for the 4- and 8-band
/// layouts, the first band otherwise.
inline std::vector<std::size_t> preview_bands(std::size_t bands) {
  if (bands == 8) return {4, 2, 1};
  if (bands >= 3) return {2, 1, 0};
  return {0};
}

inline void write_preview(const fs::path& path, const Tensor& img, data::ValueRange range) {
  const Tensor bands = img.ndim() == 2 ? reshape(img, {1, img.dim(0), img.dim(1)}) : img;
  io::write_pnm(path, io::quantize(bands, preview_bands(bands.dim(0)), range.lo, range.hi));
}

inline void write_scene(const fs::path& dir, const data::SceneTriple& s) {
  s.validate();
  fs::create_directories(dir);
  io::write_tensor(dir / "pan.pten", s.pan);
  io::write_tensor(dir / "ms.pten", s.ms);
  if (s.truth) io::write_tensor(dir / "truth.pten", *s.truth);
  write_json_atomic(dir / "scene.json",
                    nlohmann::json{{"ratio", s.ratio}, {"range", {s.range.lo, s.range.hi}}, {"bands", s.bands()}});
}

inline data::SceneTriple read_scene(const fs::path& dir) {
  const auto meta = read_json(dir / "scene.json");
  data::SceneTriple s;
  try {
    s.ratio = meta.at("ratio").get<std::size_t>();
    const auto r = meta.at("range").get<std::vector<double>>();
    if (r.size() != 2) throw FormatError("range must have two entries");
    s.range = {r[0], r[1]};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "scene.json").string() + ": " + e.what());
  }
  s.pan = io::read_tensor(dir / "pan.pten");
  s.ms = io::read_tensor(dir / "ms.pten");
  if (fs::exists(dir / "truth.pten")) s.truth = io::read_tensor(dir / "truth.pten");
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// synth / degrade

struct SynthArgs {
  std::uint64_t seed = 1;
  std::size_t bands = 4;
  std::size_t height = 256;
  std::size_t width = 256;
  data::ValueRange range;
  fs::path out_dir;
};

/// Writes truth.pten [B,H,W], pan_full.pten [4H,4W], range.json and previews.
inline void cmd_synth(const SynthArgs& a, std::ostream& log) {
  auto scene = data::synth_scene(a.seed, a.bands, a.height, a.width, a.range);
  fs::create_directories(a.out_dir);
  io::write_tensor(a.out_dir / "truth.pten", scene.truth);
  io::write_tensor(a.out_dir / "pan_full.pten", scene.pan_full);
  write_json_atomic(a.out_dir / "range.json", nlohmann::json{{"range", {scene.range.lo, scene.range.hi}}});
  write_preview(a.out_dir / "truth.ppm", scene.truth, scene.range);
  write_preview(a.out_dir / "pan_full.pgm", scene.pan_full, scene.range);
  log << "synth: truth " << shape_str(scene.truth.shape()) << ", pan " << shape_str(scene.pan_full.shape()) << " -> "
      << a.out_dir.string() << "\n";
}

struct DegradeArgs {
  fs::path truth;
  fs::path pan;
  fs::path out_dir;
  data::ValueRange range;
  std::size_t ratio = 4;
};

/// Wald simulation of a truth/PAN pair into a scene directory with previews.
inline data::SceneTriple cmd_degrade(const DegradeArgs& a, std::ostream& log) {
  const auto truth = io::read_tensor(a.truth);
  const auto pan = io::read_tensor(a.pan);
  auto scene = data::degrade_wald(truth, pan, a.ratio, a.range);
  write_scene(a.out_dir, scene);
  write_preview(a.out_dir / "pan.pgm", scene.pan, scene.range);
  write_preview(a.out_dir / "ms.ppm", scene.ms, scene.range);
  write_preview(a.out_dir / "truth.ppm", *scene.truth, scene.range);
  log << "degrade: pan " << shape_str(scene.pan.shape()) << ", ms " << shape_str(scene.ms.shape()) << " -> "
      << a.out_dir.string() << "\n";
  return scene;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

inline std::size_t clamp_window(std::size_t window, std::size_t H, std::size_t W) {
  return std::max<std::size_t>(1, std::min({window, H, W}));
}

inline void require_finite(const Tensor& t, const std::string& what) {
  for (float v : t.values())
    if (!std::isfinite(v)) throw NumericError(what + " contains NaN or Inf");
}

/// PAN decimated to the MS grid, as used by the spatial distortion index.
inline Tensor pan_low_of(const Tensor& pan, std::size_t ratio) {
  auto low = data::bicubic_resample(reshape(pan, {1, pan.dim(0), pan.dim(1)}), 1, ratio);
  return reshape(low, {low.dim(1), low.dim(2)});
}

/// Full-reference indices when `ref` is given, reference-free ones when `pan`
/// and `ms` are given.
inline metrics::MetricReport evaluate_scene(const Tensor& fused, const Tensor* ref, const Tensor* pan, const Tensor* ms,
                                            std::size_t window, std::size_t ratio) {
  if (!ref && !(pan && ms)) throw ConfigError("evaluate: need a reference or both pan and ms");
  require_finite(fused, "fused image");
  if (fused.ndim() != 3) throw DimensionError("evaluate: fused must be [B,H,W], got " + shape_str(fused.shape()));
  const std::size_t win = clamp_window(window, fused.dim(1), fused.dim(2));
  metrics::MetricReport r;
  if (ref) r = metrics::full_reference(fused, *ref, win, static_cast<double>(ratio));
  if (pan && ms) {
    const auto rf = metrics::reference_free(fused, *ms, *pan, pan_low_of(*pan, ratio), win, ratio);
    r.d_lambda = rf.d_lambda;
    r.d_s = rf.d_s;
    r.qnr = rf.qnr;
  }
  return r;
}

/// Runs the network on one scene; input and output in native units.
inline Tensor sharpen_scene(const DCNet<float>& net, const data::SceneTriple& s) {
  if (s.bands() != net.config().bands) {
    throw DimensionError("sharpen: checkpoint expects " + std::to_string(net.config().bands) + " bands, MS has " +
                         std::to_string(s.bands()));
  }
  if (s.ratio != net.config().ratio) throw DimensionError("sharpen: scene ratio differs from the model ratio");
  NoGradScope<float> no_grad;
  const std::size_t H = s.pan.dim(0), W = s.pan.dim(1), B = s.bands();
  const auto pan = reshape(data::normalize(s.pan, s.range), {1, 1, H, W});
  const auto ms = reshape(data::normalize(s.ms, s.range), {1, B, s.ms.dim(1), s.ms.dim(2)});
  auto y = net.forward(pan, ms);
  auto out = data::denormalize(reshape(y, {B, H, W}), s.range);
  require_finite(out, "network output");
  return out;
}

struct NamedReport {
  std::string scene;
  metrics::MetricReport report;
};

inline std::string reports_csv(const std::vector<NamedReport>& rows, const std::optional<metrics::MetricReport>& mean) {
  std::string s = metrics::MetricReport::csv_header() + "\n";
  for (const auto& r : rows) s += r.report.csv_row(r.scene) + "\n";
  if (mean) s += mean->csv_row("mean") + "\n";
  return s;
}

inline nlohmann::json reports_json(const std::vector<NamedReport>& rows, const metrics::MetricReport& mean) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& r : rows) {
    auto j = r.report.to_json();
    j["scene"] = r.scene;
    scenes.push_back(std::move(j));
  }
  return nlohmann::json{{"scenes", scenes}, {"mean", mean.to_json()}};
}

// ---------------------------------------------------------------------------
// train

inline nlohmann::json to_json(const train::EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"lr", e.lr}, {"l1", e.l1}, {"total", e.total}};
  j["val_l1"] = e.val_l1 ? nlohmann::json(*e.val_l1) : nlohmann::json(nullptr);
  return j;
}

inline train::EpochLog epoch_log_from_json(const nlohmann::json& j) {
  train::EpochLog e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.lr = j.at("lr").get<double>();
  e.l1 = j.at("l1").get<double>();
  e.total = j.at("total").get<double>();
  if (!j.at("val_l1").is_null()) e.val_l1 = j.at("val_l1").get<double>();
  return e;
}

/// Scene used for training: generated in memory for "synth", read otherwise.
inline data::SceneTriple load_training_scene(const ExperimentConfig& c) {
  if (c.data.source != "synth") {
    auto s = read_scene(c.data.source);
    if (!s.truth) throw FormatError("data.source '" + c.data.source + "' has no truth.pten");
    return s;
  }
  auto synth = data::synth_scene(c.data.synth_seed, c.model.bands, c.data.synth_height, c.data.synth_width, c.data.range);
  return data::degrade_wald(synth.truth, synth.pan_full, c.model.ratio, synth.range);
}

inline data::PatchSet make_patches(const ExperimentConfig& c, const data::SceneTriple& scene) {
  if (scene.bands() != c.model.bands) {
    throw DimensionError("scene has " + std::to_string(scene.bands()) + " bands, model expects " +
                         std::to_string(c.model.bands));
  }
  return data::patchify(scene, c.data.patch_size, c.data.effective_stride(), c.data.split, c.data.split_seed);
}

enum class RunStatus { ok, budget_exhausted, numeric_failure };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::numeric_failure: return "numeric_failure";
  }
  return "?";
}

struct TrainResult {
  RunStatus status = RunStatus::ok;
  nlohmann::json manifest;
  std::string eval_split;
  std::vector<NamedReport> reports;
  metrics::MetricReport mean;
  std::size_t epochs_run = 0;
  std::optional<double> final_l1;
  std::optional<double> best_score;
};

/// Config JSON without the epoch budget; a resumed run must match it.
inline nlohmann::json resume_key(const ExperimentConfig& c) {
  auto j = to_json(c);
  j["train"].erase("epochs");
  return j;
}

inline metrics::MetricReport evaluate_patches(const DCNet<float>& net, const std::vector<data::Patch>& patches,
                                              const std::string& split, std::size_t window,
                                              std::vector<NamedReport>& rows) {
  std::vector<metrics::MetricReport> all;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& s = patches[i].scene;
    const auto fused = sharpen_scene(net, s);
    auto r = evaluate_scene(fused, s.truth ? &*s.truth : nullptr, &s.pan, &s.ms, window, s.ratio);
    rows.push_back({split + "/" + std::to_string(i), r});
    all.push_back(r);
  }
  return metrics::mean_report(all);
}

struct TrainArgs {
  bool resume = false;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Trains, keeps the best-validation checkpoint, evaluates it on the test split
/// (validation, then training split, when empty) and writes the manifest.
/// A numeric failure is reported in the status when `args.deadline` is set (the
/// ablation driver), and rethrown otherwise.
inline TrainResult train_and_evaluate(const ExperimentConfig& c, const data::PatchSet& patches, const TrainArgs& args,
                                      std::ostream& log) {
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  const auto last = out / "last.pten", last_adam = out / "last.adam.pten", best = out / "best.pten";

  train::TrainState state(DCNet<float>(c.model, c.train.seed));
  if (args.resume) {
    auto loaded = load_checkpoint(last);
    if (loaded.meta.value("resume_key", nlohmann::json()) != resume_key(c)) {
      throw ConfigError("resume: " + last.string() + " was written by a different configuration");
    }
    if (loaded.net.config() != c.model) throw ConfigError("resume: model configuration differs");
    state.net = std::move(loaded.net);
    state.adam = load_optimizer(last_adam);
    state.next_epoch = loaded.meta.at("next_epoch").get<std::size_t>();
    for (const auto& e : loaded.meta.at("history")) state.history.push_back(epoch_log_from_json(e));
    if (!loaded.meta.at("best_epoch").is_null()) {
      state.best_epoch = loaded.meta.at("best_epoch").get<std::size_t>();
      state.best_score = loaded.meta.at("best_score").get<double>();
    }
    log << "resume: continuing at epoch " << state.next_epoch << "\n";
  }

  auto options = c.train;
  options.deadline = args.deadline;
  auto on_epoch = [&](const train::TrainState& st, const train::EpochLog& e, bool improved) {
    if (improved) save_checkpoint(best, st.net, {{"epoch", e.epoch}, {"score", st.best_score}});
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : st.history) history.push_back(to_json(h));
    save_checkpoint(last, st.net,
                    {{"next_epoch", st.next_epoch},
                     {"history", history},
                     {"best_epoch", st.best_epoch ? nlohmann::json(*st.best_epoch) : nlohmann::json(nullptr)},
                     {"best_score", st.best_epoch ? nlohmann::json(st.best_score) : nlohmann::json(nullptr)},
                     {"resume_key", resume_key(c)}});
    save_optimizer(last_adam, st.adam, st.net.params());
    log << "epoch " << e.epoch << " lr " << e.lr << " l1 " << e.l1 << " total " << e.total;
    if (e.val_l1) log << " val_l1 " << *e.val_l1;
    log << (improved ? " *" : "") << "\n";
  };

  TrainResult res;
  try {
    if (!train::run_epochs(state, patches.train, patches.val, options, on_epoch)) {
      res.status = RunStatus::budget_exhausted;
    }
  } catch (const NumericError& e) {
    if (!args.deadline) throw;
    log << "numeric failure: " << e.what() << "\n";
    res.status = RunStatus::numeric_failure;
  }
  res.epochs_run = state.history.size();
  if (!state.history.empty()) res.final_l1 = state.history.back().l1;
  if (state.best_epoch) res.best_score = state.best_score;

  const auto& eval_set = !patches.test.empty() ? patches.test : (!patches.val.empty() ? patches.val : patches.train);
  res.eval_split = !patches.test.empty() ? "test" : (!patches.val.empty() ? "val" : "train");
  if (res.status != RunStatus::numeric_failure && state.best_epoch) {
    const auto best_net = load_checkpoint(best).net;
    res.mean = evaluate_patches(best_net, eval_set, res.eval_split, c.data.metric_window, res.reports);
  }

  nlohmann::json curve = nlohmann::json::array();
  std::string loss_csv = "epoch,lr,l1,total,val_l1\n";
  char buf[160];
  for (const auto& h : state.history) {
    curve.push_back(to_json(h));
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,", h.epoch, h.lr, h.l1, h.total);
    loss_csv += buf;
    if (h.val_l1) {
      std::snprintf(buf, sizeof buf, "%.17g", *h.val_l1);
      loss_csv += buf;
    }
    loss_csv += "\n";
  }
  res.manifest = nlohmann::json{
      {"version", kVersionString},
      {"config_hash", config_hash(c)},
      {"config", to_json(c)},
      {"status", to_string(res.status)},
      {"loss_curve", curve},
      {"best_epoch", state.best_epoch ? nlohmann::json(*state.best_epoch) : nlohmann::json(nullptr)},
      {"checkpoint", state.best_epoch ? nlohmann::json("best.pten") : nlohmann::json(nullptr)},
      {"patches", {{"train", patches.train.size()}, {"val", patches.val.size()}, {"test", patches.test.size()}}},
      {"metrics", {{"split", res.eval_split}, {"report", reports_json(res.reports, res.mean)}}}};
  write_json_atomic(out / "manifest.json", res.manifest);
  write_text_atomic(out / "loss.csv", loss_csv);
  write_text_atomic(out / "metrics.csv", reports_csv(res.reports, res.mean));
  return res;
}

inline TrainResult cmd_train(const ExperimentConfig& c, const TrainArgs& args, std::ostream& log) {
  validate(c);
  const auto scene = load_training_scene(c);
  const auto patches = make_patches(c, scene);
  log << "train: " << patches.train.size() << " train / " << patches.val.size() << " val / " << patches.test.size()
      << " test patches of " << c.data.patch_size << "^2\n";
  return train_and_evaluate(c, patches, args, log);
}

// ---------------------------------------------------------------------------
// sharpen / evaluate

struct SharpenArgs {
  fs::path checkpoint;
  fs::path pan;
  fs::path ms;
  fs::path out;
  std::optional<fs::path> preview;
  data::ValueRange range;
};

inline Tensor cmd_sharpen(const SharpenArgs& a, std::ostream& log) {
  const auto loaded = load_checkpoint(a.checkpoint);
  data::SceneTriple s;
  s.pan = io::read_tensor(a.pan);
  s.ms = io::read_tensor(a.ms);
  s.ratio = loaded.net.config().ratio;
  s.range = a.range;
  s.validate();
  auto fused = sharpen_scene(loaded.net, s);
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  io::write_tensor(a.out, fused);
  if (a.preview) write_preview(*a.preview, fused, a.range);
  log << "sharpen: " << shape_str(fused.shape()) << " -> " << a.out.string() << "\n";
  return fused;
}

struct EvaluateArgs {
  std::vector<fs::path> fused;
  std::vector<fs::path> ref;
  std::vector<fs::path> pan;
  std::vector<fs::path> ms;
  std::size_t window = metrics::kDefaultWindow;
  std::size_t ratio = 4;
  std::optional<fs::path> out_json;
  std::optional<fs::path> out_csv;
};

struct EvaluateResult {
  std::vector<NamedReport> rows;
  metrics::MetricReport mean;
};

/// One row per fused image plus their mean; ref/pan/ms lists are either empty
/// or as long as the fused list.
inline EvaluateResult cmd_evaluate(const EvaluateArgs& a, std::ostream& log) {
  const std::size_t n = a.fused.size();
  if (n == 0) throw ConfigError("evaluate: no fused image given");
  auto check_len = [&](const std::vector<fs::path>& v, const char* name) {
    if (!v.empty() && v.size() != n) {
      throw ConfigError(std::string("evaluate: ") + name + " list must match the fused list in length");
    }
  };
  check_len(a.ref, "--ref");
  check_len(a.pan, "--pan");
  check_len(a.ms, "--ms");
  if (a.pan.empty() != a.ms.empty()) throw ConfigError("evaluate: --pan and --ms must be given together");
  if (a.ref.empty() && a.pan.empty()) throw ConfigError("evaluate: need --ref, or --pan with --ms");

  EvaluateResult res;
  std::vector<metrics::MetricReport> all;
  for (std::size_t i = 0; i < n; ++i) {
    const auto fused = io::read_tensor(a.fused[i]);
    std::optional<Tensor> ref, pan, ms;
    if (!a.ref.empty()) ref = io::read_tensor(a.ref[i]);
    if (!a.pan.empty()) {
      pan = io::read_tensor(a.pan[i]);
      ms = io::read_tensor(a.ms[i]);
    }
    auto r = evaluate_scene(fused, ref ? &*ref : nullptr, pan ? &*pan : nullptr, ms ? &*ms : nullptr, a.window, a.ratio);
    res.rows.push_back({a.fused[i].filename().string(), r});
    all.push_back(r);
  }
  res.mean = metrics::mean_report(all);
  if (a.out_json) write_json_atomic(*a.out_json, reports_json(res.rows, res.mean));
  const auto csv = reports_csv(res.rows, res.mean);
  if (a.out_csv) write_text_atomic(*a.out_csv, csv);
  log << csv;
  return res;
}

// ---------------------------------------------------------------------------
// ablate

enum class AblationAxis { backbone, fusion_levels, fusion_op, num_levels };

inline AblationAxis parse_axis(const std::string& s) {
  if (s == "backbone") return AblationAxis::backbone;
  if (s == "fusion_levels") return AblationAxis::fusion_levels;
  if (s == "fusion_op") return AblationAxis::fusion_op;
  if (s == "num_levels") return AblationAxis::num_levels;
  throw ConfigError("unknown ablation axis '" + s + "' (expected backbone, fusion_levels, fusion_op or num_levels)");
}

inline std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::backbone: return "backbone";
    case AblationAxis::fusion_levels: return "fusion_levels";
    case AblationAxis::fusion_op: return "fusion_op";
    case AblationAxis::num_levels: return "num_levels";
  }
  return "?";
}

inline std::string levels_label(const std::vector<std::size_t>& levels) {
  std::string s = "{";
  for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "," : "") + std::to_string(levels[i]);
  return s + "}";
}

struct Variant {
  std::string label;
  ModelConfig model;
};

/// Model variants along one axis, all derived from `base`:
///   backbone       2d3d, 2d2d
///   fusion_levels  {L}, {L-1,L}, ..., {1..L}
///   fusion_op      sum, max, average, product, conv, s2clstm
///   num_levels     1..6 levels, fusing at every level
inline std::vector<Variant> ablation_variants(const ModelConfig& base, AblationAxis axis) {
  std::vector<Variant> out;
  switch (axis) {
    case AblationAxis::backbone:
      for (auto b : {Backbone::hetero_2d3d, Backbone::homo_2d2d}) {
        auto m = base;
        m.backbone = b;
        out.push_back({to_string(b), m});
      }
      break;
    case AblationAxis::fusion_levels:
      for (std::size_t first = base.levels; first >= 1; --first) {
        auto m = base;
        m.fusion_levels.clear();
        for (std::size_t l = first; l <= base.levels; ++l) m.fusion_levels.push_back(l);
        out.push_back({levels_label(m.fusion_levels), m});
      }
      break;
    case AblationAxis::fusion_op:
      for (auto op : all_fusion_ops()) {
        auto m = base;
        m.fusion_op = op;
        out.push_back({to_string(op), m});
      }
      break;
    case AblationAxis::num_levels:
      for (std::size_t L = 1; L <= 6; ++L) {
        auto m = base;
        m.levels = L;
        m.fusion_levels = all_levels(L);
        out.push_back({std::to_string(L), m});
      }
      break;
  }
  for (const auto& v : out) v.model.validate();
  return out;
}

inline const char* kAblationHeader =
    "axis,variant,status,epochs,final_l1,best_score,q2n,uiqi,sam_deg,ergas,scc,d_lambda,d_s,qnr";

struct AblationRow {
  std::string variant;
  TrainResult result;
};

inline std::string ablation_csv_row(AblationAxis axis, const AblationRow& r) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return std::string(buf);
  };
  // The metric tail reuses the report's CSV formatting, minus its scene field.
  const auto metrics_row = r.result.mean.csv_row("");
  return to_string(axis) + ",\"" + r.variant + "\"," + to_string(r.result.status) + "," +
         std::to_string(r.result.epochs_run) + "," + num(r.result.final_l1) + "," + num(r.result.best_score) +
         metrics_row;
}

struct AblateArgs {
  std::optional<double> budget_seconds;  // per variant
};

/// Trains every variant from scratch under the same seed, data and epoch
/// budget; writes <output_dir>/ablation_<axis>.csv and one run directory per
/// variant.
inline std::vector<AblationRow> cmd_ablate(const ExperimentConfig& c, AblationAxis axis, const AblateArgs& a,
                                           std::ostream& log) {
  validate(c);
  const auto variants = ablation_variants(c.model, axis);
  const auto scene = load_training_scene(c);
  const auto patches = make_patches(c, scene);
  std::vector<AblationRow> rows;
  std::string csv = std::string(kAblationHeader) + "\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    auto vc = c;
    vc.model = variants[i].model;
    vc.output_dir = c.output_dir / ("ablation_" + to_string(axis)) / std::to_string(i);
    log << "ablate " << to_string(axis) << " " << variants[i].label << "\n";
    TrainArgs targs;
    targs.deadline = a.budget_seconds
                         ? std::chrono::steady_clock::now() +
                               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(*a.budget_seconds))
                         : std::chrono::steady_clock::time_point::max();
    rows.push_back({variants[i].label, train_and_evaluate(vc, patches, targs, log)});
    csv += ablation_csv_row(axis, rows.back()) + "\n";
    write_text_atomic(c.output_dir / ("ablation_" + to_string(axis) + ".csv"), csv);
  }
  return rows;
}

}  // namespace dcnet::cli
