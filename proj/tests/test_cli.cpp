#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "dcnet/cli/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dcnet;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dcnet_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

/// A run that finishes in about a second: 2-level tiny model, 64x64 truth,
/// 16x16 patches (16 patches, split 12/2/2 by the default fractions).
cli::ExperimentConfig small_run(const fs::path& out, std::size_t epochs = 4) {
  cli::ExperimentConfig c;
  c.data.synth_height = c.data.synth_width = 64;
  c.data.patch_size = 16;
  c.data.metric_window = 8;
  c.train.epochs = epochs;
  c.train.batch_size = 4;
  c.train.seed = 5;
  c.seed_given = true;
  c.output_dir = out;
  return c;
}

// ---------------------------------------------------------------------------
// Experiment configuration

TEST(ExperimentConfig, JsonOverridesDefaults) {
  const auto c = cli::experiment_from_json(json::parse(R"({
    "model": {"levels": 3, "fusion_levels": [2, 3]},
    "data": {"patch_size": 32, "split": [1, 0, 0]},
    "train": {"epochs": 7, "seed": 9},
    "output_dir": "somewhere"})"));
  EXPECT_EQ(c.model.levels, 3u);
  EXPECT_EQ(c.model.fusion_levels, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(c.data.patch_size, 32u);
  EXPECT_DOUBLE_EQ(c.data.split.train, 1.0);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_TRUE(c.seed_given);
  EXPECT_EQ(c.output_dir, fs::path("somewhere"));
  EXPECT_EQ(c.train.batch_size, 4u);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(cli::experiment_from_json(json::parse(R"({"modle": {}})")), ConfigError);
  EXPECT_THROW(cli::experiment_from_json(json::parse(R"({"data": {"patchsize": 8}})")), ConfigError);
  EXPECT_THROW(cli::experiment_from_json(json::parse(R"({"train": {"epochs": "many"}})")), ConfigError);
  EXPECT_THROW(cli::experiment_from_json(json::parse(R"({"data": {"range": [0]}})")), ConfigError);
}

TEST(ExperimentConfig, SeedIsRequired) {
  auto c = small_run("unused");
  c.seed_given = false;
  EXPECT_THROW(cli::validate(c), ConfigError);
  c.seed_given = true;
  EXPECT_NO_THROW(cli::validate(c));
}

TEST(ExperimentConfig, ValidationCatchesBadValues) {
  auto c = small_run("unused");
  c.data.patch_size = 18;  // not a multiple of 4
  EXPECT_THROW(cli::validate(c), ConfigError);
  c = small_run("unused");
  c.data.source = "/nonexistent/scene";
  EXPECT_THROW(cli::validate(c), ConfigError);
  c = small_run("unused");
  c.train.batch_size = 0;
  EXPECT_THROW(cli::validate(c), ConfigError);
}

TEST(ExperimentConfig, HashIgnoresOutputDirAndTracksContent) {
  auto a = small_run("one");
  auto b = small_run("two");
  EXPECT_EQ(cli::config_hash(a), cli::config_hash(b));
  EXPECT_EQ(cli::config_hash(a).size(), 16u);
  b.train.seed = 6;
  EXPECT_NE(cli::config_hash(a), cli::config_hash(b));
  const auto back = cli::experiment_from_json(cli::to_json(a));
  EXPECT_EQ(cli::config_hash(back), cli::config_hash(a));
}

TEST(ExperimentConfig, Fnv1aKnownValues) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(cli::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(cli::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(cli::fnv1a64("foobar"), 0x85944171f73967e8ull);
}

// ---------------------------------------------------------------------------
// synth / degrade

TEST(SynthDegrade, WritesScenesAndPreviews) {
  const auto dir = scratch("synth");
  std::ostringstream log;
  cli::SynthArgs s;
  s.seed = 3;
  s.bands = 4;
  s.height = s.width = 32;
  s.out_dir = dir / "raw";
  cli::cmd_synth(s, log);
  EXPECT_EQ(io::read_tensor(dir / "raw/truth.pten").shape(), (Shape{4, 32, 32}));
  EXPECT_EQ(io::read_tensor(dir / "raw/pan_full.pten").shape(), (Shape{128, 128}));

  cli::DegradeArgs d;
  d.truth = dir / "raw/truth.pten";
  d.pan = dir / "raw/pan_full.pten";
  d.out_dir = dir / "scene";
  const auto scene = cli::cmd_degrade(d, log);
  const auto back = cli::read_scene(dir / "scene");
  EXPECT_EQ(back.pan.shape(), (Shape{32, 32}));
  EXPECT_EQ(back.ms.shape(), (Shape{4, 8, 8}));
  ASSERT_TRUE(back.truth);
  EXPECT_EQ(back.truth->shape(), (Shape{4, 32, 32}));
  EXPECT_EQ(back.ratio, 4u);

  const auto ppm = io::read_pnm(dir / "scene/ms.ppm");
  const auto expect = io::quantize(scene.ms, cli::preview_bands(4), scene.range.lo, scene.range.hi);
  EXPECT_EQ(ppm.channels, 3u);
  EXPECT_EQ(ppm.samples, expect.samples);
  EXPECT_EQ(io::read_pnm(dir / "scene/pan.pgm").channels, 1u);
}

TEST(SynthDegrade, PreviewBandChoice) {
  EXPECT_EQ(cli::preview_bands(8), (std::vector<std::size_t>{4, 2, 1}));
  EXPECT_EQ(cli::preview_bands(4), (std::vector<std::size_t>{2, 1, 0}));
  EXPECT_EQ(cli::preview_bands(1), (std::vector<std::size_t>{0}));
}

// ---------------------------------------------------------------------------
// train

TEST(Train, WritesRunDirectory) {
  const auto dir = scratch("train");
  std::ostringstream log;
  const auto res = cli::cmd_train(small_run(dir), {}, log);
  for (const char* f : {"manifest.json", "loss.csv", "metrics.csv", "best.pten", "last.pten", "last.adam.pten"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto m = read_json(dir / "manifest.json");
  EXPECT_EQ(m.at("status"), "ok");
  EXPECT_EQ(m.at("config_hash"), cli::config_hash(small_run(dir)));
  EXPECT_EQ(m.at("loss_curve").size(), 4u);
  EXPECT_EQ(m.at("patches").at("train").get<std::size_t>() + m.at("patches").at("val").get<std::size_t>() +
                m.at("patches").at("test").get<std::size_t>(),
            16u);
  EXPECT_EQ(res.eval_split, "test");
  EXPECT_EQ(lines_of(slurp(dir / "loss.csv")).size(), 5u);
  const auto metrics = lines_of(slurp(dir / "metrics.csv"));
  EXPECT_EQ(metrics.front(), metrics::MetricReport::csv_header());
  EXPECT_EQ(metrics.back().rfind("mean,", 0), 0u);
  ASSERT_TRUE(res.mean.sam_deg && res.mean.qnr);
  EXPECT_TRUE(std::isfinite(*res.mean.sam_deg));
}

TEST(Train, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  std::ostringstream log;
  cli::cmd_train(small_run(a), {}, log);
  cli::cmd_train(small_run(b), {}, log);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "best.pten"), slurp(b / "best.pten"));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const auto straight = scratch("straight"), split = scratch("split");
  std::ostringstream log;
  cli::cmd_train(small_run(straight, 6), {}, log);
  cli::cmd_train(small_run(split, 3), {}, log);
  cli::TrainArgs resume;
  resume.resume = true;
  cli::cmd_train(small_run(split, 6), resume, log);
  EXPECT_EQ(slurp(straight / "manifest.json"), slurp(split / "manifest.json"));
  EXPECT_EQ(slurp(straight / "last.pten"), slurp(split / "last.pten"));
}

TEST(Train, ResumeRejectsDifferentConfig) {
  const auto dir = scratch("resume_mismatch");
  std::ostringstream log;
  cli::cmd_train(small_run(dir, 2), {}, log);
  auto other = small_run(dir, 4);
  other.train.base_lr = 5e-4;
  cli::TrainArgs resume;
  resume.resume = true;
  EXPECT_THROW(cli::cmd_train(other, resume, log), ConfigError);
}

TEST(Train, LossFallsOverFiftyEpochs) {
  // Mini-batch Adam is not monotone epoch to epoch; compare ten-epoch windows.
  const auto dir = scratch("loss_trend");
  std::ostringstream log;
  auto c = small_run(dir, 50);
  c.data.split = {1, 0, 0};
  const auto res = cli::cmd_train(c, {}, log);
  const auto curve = res.manifest.at("loss_curve");
  ASSERT_EQ(curve.size(), 50u);
  auto window_mean = [&](std::size_t from) {
    double s = 0;
    for (std::size_t e = from; e < from + 10; ++e) s += curve[e].at("l1").get<double>();
    return s / 10;
  };
  for (std::size_t w = 10; w < 50; w += 10) EXPECT_LT(window_mean(w), window_mean(w - 10)) << "window " << w;
  EXPECT_LT(curve[49].at("l1").get<double>(), 0.5 * curve[0].at("l1").get<double>());
}

// ---------------------------------------------------------------------------
// sharpen / evaluate

TEST(SharpenEvaluate, FusesSceneAndScoresIt) {
  const auto dir = scratch("sharpen");
  std::ostringstream log;
  cli::cmd_train(small_run(dir / "run", 1), {}, log);
  auto synth = data::synth_scene(2, 4, 32, 32, {});
  cli::write_scene(dir / "scene", data::degrade_wald(synth.truth, synth.pan_full, 4, synth.range));

  cli::SharpenArgs s;
  s.checkpoint = dir / "run/best.pten";
  s.pan = dir / "scene/pan.pten";
  s.ms = dir / "scene/ms.pten";
  s.out = dir / "fused.pten";
  s.preview = dir / "fused.ppm";
  const auto fused = cli::cmd_sharpen(s, log);
  EXPECT_EQ(fused.shape(), (Shape{4, 32, 32}));
  EXPECT_EQ(io::read_pnm(dir / "fused.ppm").width, 32u);

  cli::EvaluateArgs e;
  e.fused = {dir / "fused.pten", dir / "scene/truth.pten"};
  e.ref = {dir / "scene/truth.pten", dir / "scene/truth.pten"};
  e.pan = {dir / "scene/pan.pten", dir / "scene/pan.pten"};
  e.ms = {dir / "scene/ms.pten", dir / "scene/ms.pten"};
  e.window = 8;
  e.out_json = dir / "eval.json";
  const auto res = cli::cmd_evaluate(e, log);
  ASSERT_EQ(res.rows.size(), 2u);
  const auto& ideal = res.rows[1].report;
  EXPECT_NEAR(*ideal.sam_deg, 0.0, 1e-9);
  EXPECT_NEAR(*ideal.ergas, 0.0, 1e-9);
  EXPECT_NEAR(*ideal.q2n, 1.0, 1e-9);
  EXPECT_NEAR(*ideal.scc, 1.0, 1e-9);
  EXPECT_NEAR(*res.mean.sam_deg, 0.5 * (*res.rows[0].report.sam_deg + *ideal.sam_deg), 1e-12);
  EXPECT_NEAR(*res.mean.qnr, 0.5 * (*res.rows[0].report.qnr + *ideal.qnr), 1e-12);
  const auto j = read_json(dir / "eval.json");
  EXPECT_EQ(j.at("scenes").size(), 2u);
  EXPECT_DOUBLE_EQ(j.at("mean").at("ergas").get<double>(), *res.mean.ergas);
}

TEST(SharpenEvaluate, RejectsBandMismatch) {
  const auto dir = scratch("sharpen_bands");
  std::ostringstream log;
  cli::cmd_train(small_run(dir / "run", 1), {}, log);
  auto synth = data::synth_scene(2, 8, 32, 32, {});
  cli::write_scene(dir / "scene", data::degrade_wald(synth.truth, synth.pan_full, 4, synth.range));
  cli::SharpenArgs s;
  s.checkpoint = dir / "run/best.pten";
  s.pan = dir / "scene/pan.pten";
  s.ms = dir / "scene/ms.pten";
  s.out = dir / "fused.pten";
  EXPECT_THROW(cli::cmd_sharpen(s, log), DimensionError);
}

TEST(SharpenEvaluate, EvaluateArgumentChecks) {
  std::ostringstream log;
  cli::EvaluateArgs e;
  EXPECT_THROW(cli::cmd_evaluate(e, log), ConfigError);
  e.fused = {"a.pten"};
  EXPECT_THROW(cli::cmd_evaluate(e, log), ConfigError);  // neither ref nor pan/ms
  e.pan = {"p.pten"};
  EXPECT_THROW(cli::cmd_evaluate(e, log), ConfigError);  // pan without ms
  e.pan.clear();
  e.ref = {"r.pten", "s.pten"};
  EXPECT_THROW(cli::cmd_evaluate(e, log), ConfigError);  // length mismatch
}

TEST(SharpenEvaluate, WindowClamp) {
  EXPECT_EQ(cli::clamp_window(32, 16, 64), 16u);
  EXPECT_EQ(cli::clamp_window(32, 64, 64), 32u);
  EXPECT_EQ(cli::clamp_window(0, 8, 8), 1u);
}

// ---------------------------------------------------------------------------
// ablate

TEST(Ablation, VariantsPerAxis) {
  auto base = tiny_config();
  base.levels = 4;
  base.fusion_levels = all_levels(4);
  auto labels = [&](cli::AblationAxis a) {
    std::vector<std::string> out;
    for (const auto& v : cli::ablation_variants(base, a)) out.push_back(v.label);
    return out;
  };
  EXPECT_EQ(labels(cli::AblationAxis::backbone), (std::vector<std::string>{"2d3d", "2d2d"}));
  EXPECT_EQ(labels(cli::AblationAxis::fusion_levels),
            (std::vector<std::string>{"{4}", "{3,4}", "{2,3,4}", "{1,2,3,4}"}));
  EXPECT_EQ(labels(cli::AblationAxis::fusion_op),
            (std::vector<std::string>{"sum", "max", "average", "product", "conv", "s2clstm"}));
  EXPECT_EQ(labels(cli::AblationAxis::num_levels), (std::vector<std::string>{"1", "2", "3", "4", "5", "6"}));
  for (const auto& v : cli::ablation_variants(base, cli::AblationAxis::num_levels)) {
    EXPECT_EQ(v.model.fusion_levels, all_levels(v.model.levels));
  }
}

TEST(Ablation, AxisNames) {
  for (const char* name : {"backbone", "fusion_levels", "fusion_op", "num_levels"}) {
    EXPECT_EQ(cli::to_string(cli::parse_axis(name)), name);
  }
  EXPECT_THROW(cli::parse_axis("depth"), ConfigError);
}

TEST(Ablation, CsvSchema) {
  const auto dir = scratch("ablate");
  std::ostringstream log;
  auto c = small_run(dir, 1);
  cli::cmd_ablate(c, cli::AblationAxis::backbone, {}, log);
  const auto rows = lines_of(slurp(dir / "ablation_backbone.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], cli::kAblationHeader);
  EXPECT_EQ(rows[1].rfind("backbone,\"2d3d\",ok,1,", 0), 0u) << rows[1];
  EXPECT_EQ(rows[2].rfind("backbone,\"2d2d\",ok,1,", 0), 0u) << rows[2];
  auto cells = [](const std::string& line) {
    std::size_t n = 1;
    for (char ch : line) n += ch == ',';
    return n;
  };
  EXPECT_EQ(cells(rows[1]), cells(rows[0]));
  EXPECT_TRUE(fs::exists(dir / "ablation_backbone/1/manifest.json"));
}

TEST(Ablation, ExhaustedBudgetIsReported) {
  const auto dir = scratch("ablate_budget");
  std::ostringstream log;
  cli::AblateArgs a;
  a.budget_seconds = 0.0;
  const auto rows = cli::cmd_ablate(small_run(dir, 3), cli::AblationAxis::backbone, a, log);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].result.status, cli::RunStatus::budget_exhausted);
  EXPECT_EQ(rows[0].result.epochs_run, 0u);
  EXPECT_NE(slurp(dir / "ablation_backbone.csv").find("budget_exhausted"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Binary exit codes

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DCNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("binary");
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("synth"), 1);  // --seed missing
  EXPECT_EQ(run_cli("ablate --axis depth --seed 1 -o " + dir.string()), 1);
  EXPECT_EQ(run_cli("synth --seed 1 --height 16 --width 16 -o " + (dir / "raw").string()), 0);
  // 16x16 truth against a 16x16 PAN that is not 4x larger.
  EXPECT_EQ(run_cli("degrade --truth " + (dir / "raw/truth.pten").string() + " --pan " +
                    (dir / "raw/truth.pten").string() + " -o " + (dir / "bad").string()),
            2);

  Tensor nan_img({4, 16, 16});
  nan_img[0] = std::numeric_limits<float>::quiet_NaN();
  io::write_tensor(dir / "nan.pten", nan_img);
  EXPECT_EQ(run_cli("evaluate --fused " + (dir / "nan.pten").string() + " --ref " + (dir / "raw/truth.pten").string()),
            3);
}

}  // namespace
