#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "dcnet/model/checkpoint.hpp"
#include "dcnet/model/network.hpp"
#include "support/gradcheck.hpp"
#include "support/naive_conv.hpp"

namespace dcnet {
namespace {

using testing::naive_conv;
using testing::random_tensor;

template <typename T>
void zero_all(ParamStore<T>& ps) {
  for (auto& e : ps.entries())
    for (auto& v : e.value.values()) v = T(0);
}

template <typename T>
void zero_prefix(ParamStore<T>& ps, const std::string& prefix) {
  for (auto& e : ps.entries())
    if (e.name.rfind(prefix, 0) == 0)
      for (auto& v : e.value.values()) v = T(0);
}

template <typename T>
BasicTensor<T> prelu_ref(const BasicTensor<T>& x, const BasicTensor<T>& slope) {
  BasicTensor<T> out = x.clone();
  const std::size_t C = x.dim(1), inner = x.numel() / (x.dim(0) * C);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const std::size_t c = (i / inner) % C;
    if (out[i] < 0) out[i] *= slope[c];
  }
  return out;
}

template <typename T>
void expect_close(const BasicTensor<T>& a, const BasicTensor<T>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  double worst = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  EXPECT_LT(worst, tol);
}

template <typename T>
void randomize(ParamStore<T>& ps, std::uint64_t seed, double lo = -0.3, double hi = 0.3) {
  std::mt19937_64 rng(seed);
  for (auto& e : ps.entries()) {
    if (e.kind == ParamKind::slope) continue;
    auto r = random_tensor<T>(e.value.shape(), rng, lo, hi);
    std::copy(r.values().begin(), r.values().end(), e.value.values().begin());
  }
}

struct Inputs {
  Tensor pan, ms;
};

Inputs random_inputs(std::size_t b, std::size_t bands, std::size_t H, std::size_t W, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {random_tensor<float>({b, 1, H, W}, rng, 0.0, 1.0), random_tensor<float>({b, bands, H / 4, W / 4}, rng, 0.0, 1.0)};
}

// -- Config ------------------------------------------------------------------

TEST(ModelConfig, PresetsAndValidation) {
  auto ik = ikonos_config();
  EXPECT_EQ(ik.spatial_channels(), 128u);
  EXPECT_EQ(worldview2_config().spatial_channels(), 128u);
  ModelConfig bad = tiny_config();
  bad.beta = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.fusion_levels = {3};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.fusion_levels = {2, 1};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.levels = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTripAndOverrides) {
  ModelConfig c = tiny_config();
  c.fusion_op = FusionOp::max;
  c.backbone = Backbone::homo_2d2d;
  c.fusion_levels = {2};
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  auto j = nlohmann::json{{"preset", "worldview2"}, {"levels", 6}};
  auto w = model_config_from_json(j);
  EXPECT_EQ(w.bands, 8u);
  EXPECT_EQ(w.fusion_levels, all_levels(6));
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"levles", 2}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"fusion_op", "mean"}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"levels", "two"}}), ConfigError);
}

// -- Building blocks ---------------------------------------------------------

TEST(Blocks, ZeroWeightsGiveZeroStems) {
  DCNet<float> net(tiny_config(), 1);
  zero_all(net.params());
  auto in = random_inputs(1, 4, 16, 16, 2);
  for (float v : net.spatial_stem(in.pan).values()) EXPECT_EQ(v, 0.f);
  for (float v : net.spectral_stem(net.upsample_ms(in.ms)).values()) EXPECT_EQ(v, 0.f);
}

TEST(Blocks, ZeroWeightResidualIsIdentity) {
  DCNet<float> net(tiny_config(), 1);
  zero_all(net.params());
  std::mt19937_64 rng(3);
  auto x2 = random_tensor<float>({1, 16, 8, 8}, rng);
  auto x3 = random_tensor<float>({1, 4, 4, 8, 8}, rng);
  EXPECT_EQ(net.residual("spatial.level1", x2).values(), x2.values());
  EXPECT_EQ(net.residual("spectral.level2", x3).values(), x3.values());
}

TEST(Blocks, SpatialStemMatchesComposition) {
  DCNet<double> net(tiny_config(), 4);
  std::mt19937_64 rng(5);
  auto x = random_tensor<double>({2, 1, 12, 12}, rng);
  const auto& P = net.params();
  auto expect = prelu_ref(naive_conv(x, P.get("spatial.stem.w"), P.get("spatial.stem.b"), 1, 1, 1), P.get("spatial.stem.a"));
  EXPECT_EQ(net.spatial_stem(x).shape(), (Shape{2, 16, 12, 12}));
  expect_close(net.spatial_stem(x), expect, 1e-12);
}

TEST(Blocks, SpectralStemMatchesComposition) {
  DCNet<double> net(tiny_config(), 6);
  std::mt19937_64 rng(7);
  auto ms_up = random_tensor<double>({1, 4, 8, 8}, rng);
  const auto& P = net.params();
  auto vol = reshape(ms_up, {1, 1, 4, 8, 8});
  auto expect = prelu_ref(naive_conv(vol, P.get("spectral.stem.w"), P.get("spectral.stem.b"), 1, 1, 1), P.get("spectral.stem.a"));
  auto got = net.spectral_stem(ms_up);
  EXPECT_EQ(got.shape(), (Shape{1, 4, 4, 8, 8}));
  expect_close(got, expect, 1e-12);
  EXPECT_THROW(net.spectral_stem(random_tensor<double>({1, 3, 8, 8}, rng)), DimensionError);
}

TEST(Blocks, ResidualMatchesComposition) {
  DCNet<double> net(tiny_config(), 8);
  randomize(net.params(), 9);
  std::mt19937_64 rng(10);
  const auto& P = net.params();
  auto chain = [&](const std::string& pre, const BasicTensor<double>& x) {
    auto h = prelu_ref(naive_conv(x, P.get(pre + ".conv0.w"), P.get(pre + ".conv0.b"), 1, 1, 1), P.get(pre + ".conv0.a"));
    auto y = prelu_ref(naive_conv(h, P.get(pre + ".conv1.w"), P.get(pre + ".conv1.b"), 1, 1, 1), P.get(pre + ".conv1.a"));
    BasicTensor<double> out = x.clone();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i];
    return out;
  };
  auto x2 = random_tensor<double>({1, 16, 6, 6}, rng);
  expect_close(net.residual("spatial.level1", x2), chain("spatial.level1", x2), 1e-12);
  auto x3 = random_tensor<double>({1, 4, 4, 6, 6}, rng);
  expect_close(net.residual("spectral.level1", x3), chain("spectral.level1", x3), 1e-12);
}

// -- Fusion cell ---------------------------------------------------------------

TEST(Clstm, ZeroWeightsZeroStateTrace) {
  DCNet<double> net(tiny_config(), 11);
  zero_prefix(net.params(), "clstm.");
  std::mt19937_64 rng(12);
  auto fp = random_tensor<double>({1, 16, 4, 4}, rng);
  auto fm = random_tensor<double>({1, 4, 4, 4, 4}, rng);
  auto state = ClstmState<double>::zeros({1, 4, 4, 4, 4});
  auto out = net.fuse(1, fp, fm, state);
  // i = f = o = sigmoid(0) = 0.5, candidate = tanh(0) = 0, C = 0, H = 0.5 tanh(0) = 0.
  for (double v : state.c.values()) EXPECT_EQ(v, 0.0);
  for (double v : state.h.values()) EXPECT_EQ(v, 0.0);
  for (double v : out.to_spatial.values()) EXPECT_EQ(v, 0.0);
  for (double v : out.to_spectral.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.to_spatial.shape(), (Shape{1, 16, 4, 4}));
  EXPECT_EQ(out.to_spectral.shape(), (Shape{1, 4, 4, 4, 4}));
}

TEST(Clstm, BiasAndPeepholeScalarTrace) {
  DCNet<double> net(tiny_config(), 13);
  auto& P = net.params();
  zero_prefix(P, "clstm.");
  const double bi = 0.3, bf = -0.7, bo = 1.1, bc = 0.4, pi = 0.5, po = -0.8, c0 = 0.9;
  auto& b = P.get("clstm.b");
  for (std::size_t c = 0; c < 4; ++c) {
    b[c] = bi;
    b[4 + c] = bf;
    b[8 + c] = bo;
    b[12 + c] = bc;
  }
  // Depthwise peephole kernels with only the centre tap set.
  const std::size_t centre = 13;  // (1,1,1) of 3x3x3
  for (std::size_t c = 0; c < 4; ++c) {
    P.get("clstm.wci")[c * 27 + centre] = pi;
    P.get("clstm.wco")[c * 27 + centre] = po;
  }
  std::mt19937_64 rng(14);
  auto fp = random_tensor<double>({1, 16, 3, 3}, rng);
  auto fm = random_tensor<double>({1, 4, 4, 3, 3}, rng);
  auto state = ClstmState<double>::zeros({1, 4, 4, 3, 3});
  for (auto& v : state.c.values()) v = c0;
  net.fuse(1, fp, fm, state);

  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double i = sig(bi + pi * c0), f = sig(bf), cand = std::tanh(bc);
  const double c1 = f * c0 + i * cand;
  const double h1 = sig(bo + po * c1) * std::tanh(c1);
  for (double v : state.c.values()) EXPECT_NEAR(v, c1, 1e-14);
  for (double v : state.h.values()) EXPECT_NEAR(v, h1, 1e-14);
}

TEST(Clstm, FlattenRoundTrips) {
  DCNet<float> net(tiny_config(), 15);
  std::mt19937_64 rng(16);
  auto h = random_tensor<float>({2, 4, 4, 5, 5}, rng);
  auto planes = net.to_planes(h);
  EXPECT_EQ(planes.shape(), (Shape{2, 16, 5, 5}));
  EXPECT_EQ(net.to_volume(planes).values(), h.values());
  // Channel k of the planes holds (c = k / B, band = k % B).
  EXPECT_EQ(planes[(1 * 16 + 6) * 25 + 7], h[(((1 * 4 + 1) * 4 + 2) * 5 + 1) * 5 + 2]);
}

TEST(Clstm, StateShapeMismatchThrows) {
  DCNet<float> net(tiny_config(), 17);
  auto state = ClstmState<float>::zeros({1, 4, 4, 8, 8});
  EXPECT_THROW(net.fuse(1, Tensor({1, 16, 4, 4}), Tensor({1, 4, 4, 4, 4}), state), DimensionError);
}

TEST(Clstm, ConvTransposeFlagBuildsAndRuns) {
  ModelConfig c = tiny_config();
  c.use_conv_transpose = true;
  DCNet<float> net(c, 18);
  EXPECT_EQ(net.params().get("clstm.wp").shape(), (Shape{4, 16, 3, 3, 3}));
  auto in = random_inputs(1, 4, 16, 16, 19);
  auto y = net.forward(in.pan, in.ms);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 16, 16}));
  for (float v : y.values()) EXPECT_TRUE(std::isfinite(v));
}

// -- Alternative fusion --------------------------------------------------------

TEST(AltFusion, ElementwiseIdentities) {
  std::mt19937_64 rng(20);
  auto a = random_tensor<float>({1, 4, 4, 3, 3}, rng);
  auto run = [&](FusionOp op, const Tensor& x, const Tensor& y) {
    ModelConfig c = tiny_config();
    c.fusion_op = op;
    return DCNet<float>(c, 21).alt_fusion(1, x, y);
  };
  EXPECT_EQ(run(FusionOp::sum, a, Tensor(a.shape())).values(), a.values());
  expect_close(run(FusionOp::average, a, a), a, 1e-7);
  EXPECT_EQ(run(FusionOp::product, a, Tensor::ones(a.shape())).values(), a.values());
  EXPECT_EQ(run(FusionOp::max, a, Tensor(a.shape(), -10.f)).values(), a.values());
  EXPECT_EQ(run(FusionOp::conv, a, a).shape(), a.shape());
  EXPECT_THROW(run(FusionOp::s2clstm, a, a), ConfigError);
}

TEST(AltFusion, ParametersOnlyForConfiguredVariant) {
  ModelConfig c = tiny_config();
  c.fusion_op = FusionOp::conv;
  c.fusion_levels = {2};
  DCNet<float> net(c, 22);
  EXPECT_TRUE(net.params().contains("fusion2.w"));
  EXPECT_FALSE(net.params().contains("fusion1.w"));
  EXPECT_FALSE(net.params().contains("clstm.wp"));
  c.fusion_op = FusionOp::sum;
  EXPECT_FALSE(DCNet<float>(c, 22).params().contains("fusion2.w"));
  c.fusion_op = FusionOp::s2clstm;
  c.fusion_levels = {};
  EXPECT_FALSE(DCNet<float>(c, 22).params().contains("clstm.wp"));
}

TEST(AltFusion, EveryOperatorRunsEndToEnd) {
  auto in = random_inputs(1, 4, 16, 16, 23);
  for (auto op : all_fusion_ops()) {
    ModelConfig c = tiny_config();
    c.fusion_op = op;
    auto y = DCNet<float>(c, 24).forward(in.pan, in.ms);
    EXPECT_EQ(y.shape(), (Shape{1, 4, 16, 16})) << to_string(op);
    for (float v : y.values()) ASSERT_TRUE(std::isfinite(v)) << to_string(op);
  }
}

// -- Whole network ---------------------------------------------------------------

TEST(Network, ZeroWeightsGiveFinalBiasField) {
  DCNet<float> net(tiny_config(), 25);
  zero_all(net.params());
  net.params().get("recon.out.b")[0] = 0.375f;
  auto in = random_inputs(2, 4, 16, 16, 26);
  Tape<float> tape;
  TapeScope<float> scope(tape);
  auto y = net.forward(in.pan, in.ms);
  for (float v : y.values()) EXPECT_EQ(v, 0.375f);
  auto loss = dcnet_loss(y, Tensor(y.shape(), 0.5f), net.params(), 1e-3);
  tape.backward(loss.total);
  for (const auto& e : net.params().entries()) {
    ASSERT_TRUE(e.value.has_grad()) << e.name;
    for (float g : e.value.grad()) ASSERT_TRUE(std::isfinite(g)) << e.name;
  }
}

TEST(Network, ReconstructZeroInputsZeroWeights) {
  DCNet<float> net(tiny_config(), 27);
  zero_all(net.params());
  Tensor fp({1, 16, 8, 8}), fm({1, 4, 4, 8, 8}), h({1, 4, 4, 8, 8});
  auto y = net.reconstruct(fp, fm, h);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 8, 8}));
  for (float v : y.values()) EXPECT_EQ(v, 0.f);
  EXPECT_THROW(net.reconstruct(fp, fm, Tensor({1, 4, 4, 4, 4})), DimensionError);
}

TEST(Network, ShapeContractAndFinite) {
  DCNet<float> net(tiny_config(), 28);
  auto in = random_inputs(1, 4, 32, 32, 29);
  auto y = net.forward(in.pan, in.ms);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 32, 32}));
  for (float v : y.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(net.forward(in.pan, Tensor({1, 4, 4, 4})), DimensionError);
  EXPECT_THROW(net.forward(Tensor({1, 2, 32, 32}), in.ms), DimensionError);
  EXPECT_THROW(net.forward(in.pan, Tensor({1, 3, 8, 8})), DimensionError);
}

// Table-style per-level shapes on a reduced spatial size; the full 128x128
// check runs in the acceptance binary.
TEST(Network, TraceShapesFollowLayout) {
  for (const auto& c : {ikonos_config(), worldview2_config()}) {
    DCNet<float> net(c, 30);
    auto in = random_inputs(1, c.bands, 16, 16, 31);
    ForwardTrace trace;
    NoGradScope<float> ng;
    net.forward(in.pan, in.ms, &trace);
    const Shape vol{1, c.spectral_channels, c.bands, 16, 16};
    EXPECT_EQ(trace.at("spatial.stem"), (Shape{1, 128, 16, 16}));
    EXPECT_EQ(trace.at("spectral.stem"), vol);
    for (std::size_t l = 1; l <= 4; ++l) {
      const std::string p = "level" + std::to_string(l) + ".";
      EXPECT_EQ(trace.at(p + "F_P_CLSTM"), vol);
      EXPECT_EQ(trace.at(p + "F_M_CLSTM"), vol);
      EXPECT_EQ(trace.at(p + "F_CLSTM_P"), (Shape{1, 128, 16, 16}));
      EXPECT_EQ(trace.at(p + "F_CLSTM_M"), vol);
      EXPECT_EQ(trace.contains(p + "F_P"), l < 4);
    }
    EXPECT_EQ(trace.at("output"), (Shape{1, c.bands, 16, 16}));
  }
}

TEST(Network, HomogeneousBackboneKeepsShapes) {
  ModelConfig c = tiny_config();
  c.backbone = Backbone::homo_2d2d;
  DCNet<float> net(c, 32);
  EXPECT_EQ(net.params().get("spectral.stem.w").shape(), (Shape{16, 4, 3, 3}));
  EXPECT_EQ(net.params().get("spectral.level1.conv0.w").shape(), (Shape{16, 16, 3, 3}));
  auto in = random_inputs(1, 4, 16, 16, 33);
  ForwardTrace trace;
  auto y = net.forward(in.pan, in.ms, &trace);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 16, 16}));
  EXPECT_EQ(trace.at("spectral.stem"), (Shape{1, 4, 4, 16, 16}));
  for (float v : y.values()) EXPECT_TRUE(std::isfinite(v));
}

// With its cell zeroed the fused network must equal the unfused one with the
// same shared weights; with live cell weights every single fused level must
// change the output.
TEST(Network, FusionLevelsArePlumbedThrough) {
  auto in = random_inputs(1, 4, 16, 16, 34);
  ModelConfig none = tiny_config();
  none.fusion_levels = {};
  DCNet<float> plain(none, 35);
  randomize(plain.params(), 36);
  const auto base = plain.forward(in.pan, in.ms);

  for (std::size_t l : {1u, 2u}) {
    ModelConfig c = tiny_config();
    c.fusion_levels = {l};
    DCNet<float> fused(c, 37);
    randomize(fused.params(), 38);
    for (const auto& e : plain.params().entries()) {
      auto& dst = fused.params().get(e.name);
      std::copy(e.value.values().begin(), e.value.values().end(), dst.values().begin());
    }
    EXPECT_NE(fused.forward(in.pan, in.ms).values(), base.values()) << "level " << l;
    zero_prefix(fused.params(), "clstm.");
    EXPECT_EQ(fused.forward(in.pan, in.ms).values(), base.values()) << "level " << l;
  }
}

TEST(Network, SeededInitIsDeterministic) {
  DCNet<float> a(tiny_config(), 40), b(tiny_config(), 40), c(tiny_config(), 41);
  EXPECT_EQ(a.params().get("clstm.wm").values(), b.params().get("clstm.wm").values());
  EXPECT_NE(a.params().get("clstm.wm").values(), c.params().get("clstm.wm").values());
  std::set<std::string> names;
  for (const auto& e : a.params().entries()) EXPECT_TRUE(names.insert(e.name).second);
}

// -- Loss ------------------------------------------------------------------------

TEST(Loss, ExactCases) {
  DCNet<double> net(tiny_config(), 42);
  std::mt19937_64 rng(43);
  auto y = random_tensor<double>({1, 4, 8, 8}, rng);
  EXPECT_EQ(dcnet_loss(y, y, net.params(), 0.0).total.item(), 0.0);

  double sq = 0;
  for (const auto& e : net.params().entries())
    if (e.kind == ParamKind::weight)
      for (double v : e.value.values()) sq += v * v;
  auto l = dcnet_loss(y, y, net.params(), 0.01);
  EXPECT_NEAR(l.total.item(), 0.01 * sq, 1e-12);
  EXPECT_NEAR(l.l2, sq, 1e-12);

  BasicTensor<double> shifted = y.clone();
  for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += (i % 2 ? 1.0 : -1.0);
  EXPECT_NEAR(dcnet_loss(shifted, y, net.params(), 0.0).total.item(), 1.0, 1e-12);
  EXPECT_THROW(dcnet_loss(y, BasicTensor<double>({1, 4, 8, 4}), net.params(), 0.0), DimensionError);
}

TEST(Loss, PenaltySkipsBiasesAndSlopes) {
  DCNet<double> net(tiny_config(), 44);
  zero_all(net.params());
  for (auto& e : net.params().entries())
    if (e.kind != ParamKind::weight)
      for (auto& v : e.value.values()) v = 3.0;
  BasicTensor<double> y({1, 4, 4, 4});
  EXPECT_EQ(dcnet_loss(y, y, net.params(), 1.0).total.item(), 0.0);
}

// -- End-to-end gradient -------------------------------------------------------------

TEST(Gradient, EndToEndMatchesFiniteDifferences) {
  DCNet<double> net(tiny_config(), 45);
  std::mt19937_64 rng(46);
  auto pan = random_tensor<double>({1, 1, 16, 16}, rng, 0.0, 1.0);
  auto ms = random_tensor<double>({1, 4, 4, 4}, rng, 0.0, 1.0);
  // Targets at distance >= 0.5 from the initial prediction keep every l1 term
  // on one side of its kink.
  auto y0 = net.forward(pan, ms);
  BasicTensor<double> target = y0.clone();
  std::bernoulli_distribution sign(0.5);
  for (auto& v : target.values()) v += sign(rng) ? 0.5 : -0.5;
  const double lambda = 1e-3;
  auto loss_fn = [&] { return dcnet_loss(net.forward(pan, ms), target, net.params(), lambda).total; };

  auto& entries = net.params().entries();
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<testing::Probe<double>> probes;
  for (std::size_t k = 0; k < 24; ++k) {
    auto& e = entries[order[k]];
    probes.push_back({e.value, std::uniform_int_distribution<std::size_t>(0, e.value.numel() - 1)(rng)});
  }
  auto res = testing::grad_check_probes<double>(probes, loss_fn, 1e-6);
  EXPECT_EQ(res.checked, 24u);
  EXPECT_LT(res.max_rel_error, 1e-3);
}

// -- Serialization -------------------------------------------------------------------

TEST(Checkpoint, SaveLoadForwardBitIdentical) {
  ModelConfig c = tiny_config();
  c.fusion_op = FusionOp::conv;
  DCNet<float> net(c, 47);
  randomize(net.params(), 48);
  const auto dir = std::filesystem::temp_directory_path() / "dcnet_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.pten", net, {{"epoch", 3}});
  auto loaded = load_checkpoint(dir / "model.pten");
  EXPECT_EQ(loaded.net.config(), c);
  EXPECT_EQ(loaded.meta.at("epoch"), 3);
  auto in = random_inputs(1, 4, 16, 16, 49);
  EXPECT_EQ(loaded.net.forward(in.pan, in.ms).values(), net.forward(in.pan, in.ms).values());
}

TEST(Checkpoint, RejectsMismatchedArchive) {
  DCNet<float> a(tiny_config(), 50);
  ModelConfig c = tiny_config();
  c.fusion_op = FusionOp::sum;
  DCNet<float> b(c, 50);
  io::NamedTensors entries;
  for (const auto& e : b.params().entries()) entries.emplace_back(e.name, e.value.detach());
  EXPECT_THROW(load_params(entries, a.params()), FormatError);
}

TEST(Checkpoint, OptimizerStateRoundTrip) {
  DCNet<float> net(tiny_config(), 51);
  AdamState<float> st;
  for (const auto& e : net.params().entries()) {
    st.m[e.name] = std::vector<float>(e.value.numel(), 0.25f);
    st.v[e.name] = std::vector<float>(e.value.numel(), 0.5f);
  }
  st.step = 7;
  const auto path = std::filesystem::temp_directory_path() / "dcnet_ckpt_test" / "adam.pten";
  save_optimizer(path, st, net.params());
  auto back = load_optimizer(path);
  EXPECT_EQ(back.step, 7u);
  EXPECT_EQ(back.m, st.m);
  EXPECT_EQ(back.v, st.v);
}

}  // namespace
}  // namespace dcnet
