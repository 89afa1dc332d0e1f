#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dcnet/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/naive_conv.hpp"

namespace dcnet {
namespace {

using testing::random_tensor;

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<float>({2, 3, 5, 6}, rng);
  Tensor w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.f;
  auto y = conv2d(x, w, Tensor::zeros({3}));
  EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(Conv2d, ConstantImageOnesKernel) {
  const float v = 1.5f;
  Tensor x({1, 1, 6, 6}, v);
  auto y = conv2d(x, Tensor::ones({1, 1, 3, 3}), Tensor::zeros({1}), 1, 1);
  EXPECT_FLOAT_EQ(y[0], 4 * v);              // corner
  EXPECT_FLOAT_EQ(y[2 * 6 + 3], 9 * v);      // interior
  EXPECT_FLOAT_EQ(y[3], 6 * v);              // edge
}

TEST(Conv2d, MatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<float>({2, 3, 8, 8}, rng);
  auto w = random_tensor<float>({4, 3, 3, 3}, rng);
  auto b = random_tensor<float>({4}, rng);
  EXPECT_LT(max_abs_diff(conv2d(x, w, b, 1, 1), testing::naive_conv(x, w, b, 1, 1)), 1e-5);
}

TEST(Conv2d, ShapeErrorsNameTheAxis) {
  Tensor x({1, 3, 4, 4});
  try {
    conv2d(x, Tensor({2, 2, 3, 3}), Tensor{});
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel axis 1"), std::string::npos);
  }
  EXPECT_THROW(conv2d(x, Tensor({2, 3, 3, 3}), Tensor({3})), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor({2, 3, 7, 7}), Tensor{}), DimensionError);
}

TEST(Conv3d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(3);
  auto x = random_tensor<float>({1, 2, 3, 4, 4}, rng);
  Tensor w({2, 2, 1, 1, 1});
  w[0] = 1.f;
  w[3] = 1.f;
  EXPECT_EQ(max_abs_diff(conv3d(x, w, Tensor{}), x), 0.0);
}

TEST(Conv3d, ConstantVolumeCenter) {
  const float v = 0.5f;
  Tensor x({1, 1, 5, 5, 5}, v);
  auto y = conv3d(x, Tensor::ones({1, 1, 3, 3, 3}), Tensor::zeros({1}), 1, 1);
  EXPECT_FLOAT_EQ(y[(2 * 5 + 2) * 5 + 2], 27 * v);
  EXPECT_FLOAT_EQ(y[0], 8 * v);
}

TEST(Conv3d, MatchesNaiveOracle) {
  std::mt19937_64 rng(4);
  auto x = random_tensor<float>({1, 2, 4, 6, 6}, rng);
  auto w = random_tensor<float>({3, 2, 3, 3, 3}, rng);
  auto b = random_tensor<float>({3}, rng);
  EXPECT_LT(max_abs_diff(conv3d(x, w, b, 1, 1), testing::naive_conv(x, w, b, 1, 1)), 1e-5);
}

TEST(ConvTranspose, StrideOneUnitKernelIsIdentity) {
  std::mt19937_64 rng(5);
  auto x = random_tensor<float>({1, 1, 4, 5}, rng);
  auto y = conv_transpose(x, Tensor::ones({1, 1, 1, 1}), Tensor{});
  EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(ConvTranspose, Stride2BlockUpsample) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = conv_transpose(x, Tensor::ones({1, 1, 2, 2}), Tensor{}, ConvOptions{2, 0, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const std::vector<float> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(y.values(), expect);
}

TEST(ConvTranspose, AdjointOfConv) {
  std::mt19937_64 rng(6);
  for (std::size_t stride : {1u, 2u}) {
    auto x = random_tensor<float>({2, 3, 9, 8}, rng);
    auto w = random_tensor<float>({4, 3, 3, 3}, rng);
    auto cx = conv(x, w, ConvOptions{stride, 1, 1});
    auto y = random_tensor<float>(cx.shape(), rng);
    auto ty = conv_transpose(y, w, Tensor{}, ConvOptions{stride, 1, 1}, {9, 8});
    const double lhs = dot(cx, y), rhs = dot(x, ty);
    EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1.0), 1e-4) << "stride " << stride;
  }
}

TEST(ConvTranspose, HintValidation) {
  Tensor x({1, 1, 3, 3});
  Tensor w({1, 1, 3, 3});
  EXPECT_NO_THROW(conv_transpose(x, w, Tensor{}, ConvOptions{2, 1, 1}, {5, 5}));
  EXPECT_NO_THROW(conv_transpose(x, w, Tensor{}, ConvOptions{2, 1, 1}, {6, 6}));
  EXPECT_THROW(conv_transpose(x, w, Tensor{}, ConvOptions{2, 1, 1}, {9, 9}), DimensionError);
  EXPECT_THROW(conv_transpose(x, w, Tensor{}, ConvOptions{2, 1, 1}, {5}), DimensionError);
}

TEST(GroupedConv, DepthwiseOnesIsIdentity) {
  std::mt19937_64 rng(7);
  auto x = random_tensor<float>({1, 4, 2, 3, 3}, rng);
  auto y = grouped_conv(x, Tensor::ones({4, 1, 1, 1, 1}), Tensor::zeros({4}), 4);
  EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(GroupedConv, DepthwiseScalarKernelsScaleChannels) {
  std::mt19937_64 rng(8);
  auto x = random_tensor<float>({2, 3, 2, 4, 4}, rng);
  Tensor k({3, 1, 1, 1, 1}, {2.f, -1.f, 0.5f});
  auto y = grouped_conv(x, k, Tensor{}, 3);
  const std::size_t inner = 2 * 4 * 4;
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(y[i], x[i] * k[(i / inner) % 3]);
}

TEST(GroupedConv, SingleGroupEqualsConv3d) {
  std::mt19937_64 rng(9);
  auto x = random_tensor<float>({1, 2, 3, 5, 5}, rng);
  auto w = random_tensor<float>({3, 2, 3, 3, 3}, rng);
  auto b = random_tensor<float>({3}, rng);
  EXPECT_EQ(max_abs_diff(grouped_conv(x, w, b, 1, 1), conv3d(x, w, b, 1, 1)), 0.0);
}

TEST(GroupedConv, GroupsMustDivideChannels) {
  Tensor x({1, 4, 3, 3});
  EXPECT_THROW(grouped_conv(x, Tensor({3, 1, 1, 1}), Tensor{}, 3), ConfigError);
}

TEST(GradCheck, ConvFamily) {
  std::mt19937_64 rng(11);
  using V = std::vector<TensorD>;
  {
    auto x = random_tensor<double>({2, 2, 5, 5}, rng);
    auto w = random_tensor<double>({3, 2, 3, 3}, rng);
    auto b = random_tensor<double>({3}, rng);
    auto res = testing::grad_check<double>({x, w, b}, [](const V& v) {
      return sum_squares(conv(v[0], v[1], v[2], ConvOptions{2, 1, 1}));
    });
    EXPECT_LT(res.max_rel_error, 1e-3) << "conv2d";
  }
  {
    auto x = random_tensor<double>({1, 2, 3, 4, 4}, rng);
    auto w = random_tensor<double>({2, 2, 3, 3, 3}, rng);
    auto b = random_tensor<double>({2}, rng);
    auto res = testing::grad_check<double>({x, w, b}, [](const V& v) { return sum_squares(conv3d(v[0], v[1], v[2], 1, 1)); });
    EXPECT_LT(res.max_rel_error, 1e-3) << "conv3d";
  }
  {
    auto x = random_tensor<double>({1, 4, 2, 3, 3}, rng);
    auto w = random_tensor<double>({4, 2, 1, 3, 3}, rng);
    auto res = testing::grad_check<double>({x, w}, [](const V& v) {
      return sum_squares(grouped_conv(v[0], v[1], TensorD{}, 2, 1));
    });
    EXPECT_LT(res.max_rel_error, 1e-3) << "grouped";
  }
  {
    auto x = random_tensor<double>({1, 2, 3, 3}, rng);
    auto w = random_tensor<double>({2, 3, 3, 3}, rng);
    auto b = random_tensor<double>({3}, rng);
    auto res = testing::grad_check<double>({x, w, b}, [](const V& v) {
      return sum_squares(conv_transpose(v[0], v[1], v[2], ConvOptions{2, 1, 1}, {6, 6}));
    });
    EXPECT_LT(res.max_rel_error, 1e-3) << "conv_transpose";
  }
}

}  // namespace
}  // namespace dcnet
