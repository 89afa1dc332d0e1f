// dcnet: simulate scenes, train, pan-sharpen, evaluate and run ablations.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data or I/O error,
// 3 numeric failure (NaN/Inf). DCNET_OUTPUT_DIR overrides the output
// directory of the config file; an explicit --out/--output flag wins over both.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcnet/cli/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dcnet;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::optional<fs::path> env_output_dir() {
  const char* v = std::getenv("DCNET_OUTPUT_DIR");
  if (v && *v) return fs::path(v);
  return std::nullopt;
}

fs::path resolve_out(const std::string& flag, const char* what) {
  if (!flag.empty()) return flag;
  if (auto env = env_output_dir()) return *env;
  throw ConfigError(std::string(what) + ": no output directory (use --out or DCNET_OUTPUT_DIR)");
}

/// Command-line overrides shared by train and ablate.
struct ExperimentFlags {
  std::string config;
  std::string preset;
  std::string output;
  std::string data_source;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, patch_size, synth_size;
  std::optional<double> lr, lambda;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "experiment JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "model preset: ikonos, worldview2 or tiny");
    cmd->add_option("-o,--output", output, "output directory");
    cmd->add_option("--data", data_source, "\"synth\" or a scene directory");
    cmd->add_option("--seed", seed, "training and initialization seed");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--patch-size", patch_size);
    cmd->add_option("--synth-size", synth_size, "side of the synthetic truth image");
    cmd->add_option("--lr", lr, "base learning rate");
    cmd->add_option("--lambda", lambda, "weight penalty");
  }

  cli::ExperimentConfig resolve() const {
    cli::ExperimentConfig c;
    if (!config.empty()) c = cli::experiment_from_json(read_json(config));
    if (!preset.empty()) {
      const auto lambda_keep = c.model.lambda;
      c.model = preset_config(preset);
      c.model.lambda = lambda_keep;
    }
    if (auto env = env_output_dir()) c.output_dir = *env;
    if (!output.empty()) c.output_dir = output;
    if (!data_source.empty()) c.data.source = data_source;
    if (seed) {
      c.train.seed = *seed;
      c.seed_given = true;
    }
    if (epochs) c.train.epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (patch_size) c.data.patch_size = *patch_size;
    if (synth_size) c.data.synth_height = c.data.synth_width = *synth_size;
    if (lr) c.train.base_lr = *lr;
    if (lambda) c.model.lambda = *lambda;
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Dual-channel pan-sharpening network: data simulation, training, inference and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersionString);

  data::ValueRange range;
  auto add_range = [&](CLI::App* cmd) {
    cmd->add_option("--range-lo", range.lo, "native value mapped to 0")->capture_default_str();
    cmd->add_option("--range-hi", range.hi, "native value mapped to 1")->capture_default_str();
  };

  // synth
  cli::SynthArgs synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic truth image and full-resolution PAN");
  synth_cmd->add_option("--seed", synth.seed, "scene seed")->required();
  synth_cmd->add_option("--bands", synth.bands)->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "truth height")->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "truth width")->capture_default_str();
  synth_cmd->add_option("-o,--out", synth_out, "output directory");
  add_range(synth_cmd);

  // degrade
  cli::DegradeArgs degrade;
  std::string degrade_out;
  auto* degrade_cmd = app.add_subcommand("degrade", "Wald-protocol simulation into a scene directory");
  degrade_cmd->add_option("--truth", degrade.truth, "truth tensor [B,H,W]")->required()->check(CLI::ExistingFile);
  degrade_cmd->add_option("--pan", degrade.pan, "PAN tensor [rH,rW] or [H,W]")->required()->check(CLI::ExistingFile);
  degrade_cmd->add_option("--ratio", degrade.ratio)->capture_default_str();
  degrade_cmd->add_option("-o,--out", degrade_out, "scene directory");
  add_range(degrade_cmd);

  // train
  ExperimentFlags train_flags;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "train a model and evaluate its best checkpoint");
  train_flags.attach(train_cmd);
  train_cmd->add_flag("--resume", resume, "continue from <output>/last.pten");

  // sharpen
  cli::SharpenArgs sharpen;
  std::string sharpen_scene;
  std::string sharpen_preview;
  auto* sharpen_cmd = app.add_subcommand("sharpen", "fuse a PAN/MS pair with a trained checkpoint");
  sharpen_cmd->add_option("--checkpoint", sharpen.checkpoint)->required()->check(CLI::ExistingFile);
  sharpen_cmd->add_option("--scene", sharpen_scene, "scene directory supplying pan and ms")->check(CLI::ExistingDirectory);
  sharpen_cmd->add_option("--pan", sharpen.pan, "PAN tensor [H,W]")->check(CLI::ExistingFile);
  sharpen_cmd->add_option("--ms", sharpen.ms, "MS tensor [B,H/r,W/r]")->check(CLI::ExistingFile);
  sharpen_cmd->add_option("-o,--out", sharpen.out, "fused tensor [B,H,W]")->required();
  sharpen_cmd->add_option("--preview", sharpen_preview, "PPM/PGM preview path");
  add_range(sharpen_cmd);

  // evaluate
  cli::EvaluateArgs eval;
  std::vector<std::string> eval_scenes;
  std::string eval_json, eval_csv;
  auto* eval_cmd = app.add_subcommand("evaluate", "quality indices of fused images");
  eval_cmd->add_option("--fused", eval.fused, "fused tensors [B,H,W]")->required();
  eval_cmd->add_option("--ref", eval.ref, "reference tensors [B,H,W]");
  eval_cmd->add_option("--pan", eval.pan, "PAN tensors [H,W]");
  eval_cmd->add_option("--ms", eval.ms, "MS tensors [B,H/r,W/r]");
  eval_cmd->add_option("--scene", eval_scenes, "scene directories supplying ref, pan and ms");
  eval_cmd->add_option("--window", eval.window, "quality-index block size")->capture_default_str();
  eval_cmd->add_option("--ratio", eval.ratio)->capture_default_str();
  eval_cmd->add_option("--json", eval_json, "write the report as JSON");
  eval_cmd->add_option("--csv", eval_csv, "write the report as CSV");

  // ablate
  ExperimentFlags ablate_flags;
  std::string axis;
  std::optional<double> budget;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate every variant along one axis");
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--axis", axis, "backbone, fusion_levels, fusion_op or num_levels")->required();
  ablate_cmd->add_option("--budget-seconds", budget, "wall-clock budget per variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto& log = std::cout;
  if (*synth_cmd) {
    synth.range = range;
    synth.out_dir = resolve_out(synth_out, "synth");
    cli::cmd_synth(synth, log);
  } else if (*degrade_cmd) {
    degrade.range = range;
    degrade.out_dir = resolve_out(degrade_out, "degrade");
    cli::cmd_degrade(degrade, log);
  } else if (*train_cmd) {
    cli::TrainArgs args;
    args.resume = resume;
    const auto res = cli::cmd_train(train_flags.resolve(), args, log);
    log << metrics::MetricReport::csv_header() << "\n" << res.mean.csv_row(res.eval_split + "/mean") << "\n";
  } else if (*sharpen_cmd) {
    if (!sharpen_scene.empty()) {
      sharpen.pan = fs::path(sharpen_scene) / "pan.pten";
      sharpen.ms = fs::path(sharpen_scene) / "ms.pten";
      const auto meta = read_json(fs::path(sharpen_scene) / "scene.json");
      const auto r = meta.at("range").get<std::vector<double>>();
      if (sharpen_cmd->count("--range-lo") == 0) range.lo = r.at(0);
      if (sharpen_cmd->count("--range-hi") == 0) range.hi = r.at(1);
    }
    if (sharpen.pan.empty() || sharpen.ms.empty()) throw ConfigError("sharpen: give --scene or both --pan and --ms");
    sharpen.range = range;
    if (!sharpen_preview.empty()) sharpen.preview = sharpen_preview;
    cli::cmd_sharpen(sharpen, log);
  } else if (*eval_cmd) {
    for (const auto& s : eval_scenes) {
      const fs::path dir(s);
      eval.ref.push_back(dir / "truth.pten");
      eval.pan.push_back(dir / "pan.pten");
      eval.ms.push_back(dir / "ms.pten");
    }
    if (!eval_json.empty()) eval.out_json = eval_json;
    if (!eval_csv.empty()) eval.out_csv = eval_csv;
    cli::cmd_evaluate(eval, log);
  } else if (*ablate_cmd) {
    cli::AblateArgs args;
    args.budget_seconds = budget;
    const auto parsed = cli::parse_axis(axis);
    cli::cmd_ablate(ablate_flags.resolve(), parsed, args, log);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dcnet::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const dcnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
