#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "srfbn/ops.hpp"

using namespace srfbn;

namespace {

ConvParams ones_conv(int k, int s, int p) {
  auto params = ConvParams::conv(1, 1, {k, s, p});
  params.weights.fill(1.0f);
  return params;
}

void expect_close(const std::vector<double>& want, const Tensor4& got, double rel) {
  ASSERT_EQ(want.size(), got.size());
  double scale = 0;
  for (double v : want) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < want.size(); ++i)
    ASSERT_NEAR(got[i], want[i], rel * std::max(1.0, scale)) << "at " << i;
}

}  // namespace

TEST(Conv2d, AllOnesCountsReceptiveField) {
  Tensor4 x(1, 1, 3, 3, 1.0f);
  auto y = conv2d(x, ones_conv(3, 1, 1));
  const float want[] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  ASSERT_EQ(y.dims(), (Dims4{1, 1, 3, 3}));
  for (int i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(y[i], want[i]);
}

TEST(Conv2d, IdentityKernel) {
  auto x = oracle::random_tensor({2, 1, 5, 7}, 1);
  auto y = conv2d(x, ones_conv(1, 1, 0));
  EXPECT_EQ(y, x);
}

TEST(Conv2d, MatchesDirectLoopsStrided) {
  auto x = oracle::random_tensor({2, 3, 8, 8}, 2);
  auto params = ConvParams::conv(3, 4, {3, 2, 1});
  params.weights = oracle::random_tensor(params.weights.dims(), 3);
  params.bias = {0.1f, -0.2f, 0.3f, 0.05f};
  const auto y = conv2d(x, params);
  int oh, ow;
  const auto want = oracle::conv2d(x, params.weights, params.bias, 2, 1, oh, ow);
  EXPECT_EQ(y.dims(), (Dims4{2, 4, oh, ow}));
  expect_close(want, y, 1e-5);
}

TEST(Conv2d, RandomConfigurationsMatchOracle) {
  const int cfgs[][6] = {{1, 2, 3, 9, 1, 0}, {3, 5, 3, 7, 1, 1}, {2, 2, 6, 12, 2, 2},
                         {4, 3, 7, 13, 3, 2}, {2, 4, 8, 16, 4, 2}, {3, 1, 1, 5, 1, 0}};
  std::uint64_t seed = 10;
  for (const auto& c : cfgs) {
    auto x = oracle::random_tensor({2, c[0], c[3], c[3] + 1}, seed++);
    auto params = ConvParams::conv(c[0], c[1], {c[2], c[4], c[5]});
    params.weights = oracle::random_tensor(params.weights.dims(), seed++);
    for (auto& b : params.bias) b = 0.01f * static_cast<float>(seed % 7);
    int oh, ow;
    const auto want = oracle::conv2d(x, params.weights, params.bias, c[4], c[5], oh, ow);
    expect_close(want, conv2d(x, params), 1e-5);
  }
}

TEST(Conv2d, Errors) {
  Tensor4 x(1, 2, 4, 4);
  EXPECT_THROW(conv2d(x, ConvParams::conv(3, 1, {3, 1, 1})), ShapeError);
  Tensor4 tiny(1, 1, 2, 2);
  EXPECT_THROW(conv2d(tiny, ConvParams::conv(1, 1, {5, 1, 0})), ShapeError);
}

TEST(Deconv2d, ProjectionShapes) {
  Tensor4 x(1, 1, 10, 10, 0.5f);
  EXPECT_EQ(deconv2d(x, ConvParams::deconv(1, 3, {8, 4, 2})).dims(), (Dims4{1, 3, 40, 40}));
  EXPECT_EQ(deconv2d(x, ConvParams::deconv(1, 2, {6, 2, 2})).dims(), (Dims4{1, 2, 20, 20}));
  EXPECT_EQ(deconv2d(x, ConvParams::deconv(1, 1, {7, 3, 2})).dims(), (Dims4{1, 1, 30, 30}));
}

TEST(Deconv2d, OutputSizeLawForAllScales) {
  const ConvGeometry triples[] = {{6, 2, 2}, {7, 3, 2}, {8, 4, 2}};
  for (int i = 0; i < 3; ++i)
    for (int h = 2; h <= 40; ++h) EXPECT_EQ(triples[i].deconv_out(h), h * (i + 2));
}

TEST(Deconv2d, ImpulseStampsKernel) {
  auto params = ConvParams::deconv(1, 1, {6, 2, 2});
  params.weights = oracle::random_tensor(params.weights.dims(), 7);
  Tensor4 x(1, 1, 5, 5);
  x(0, 0, 2, 3) = 1.0f;
  const auto y = deconv2d(x, params);
  for (int yy = 0; yy < y.h(); ++yy)
    for (int xx = 0; xx < y.w(); ++xx) {
      const int ky = yy - (2 * 2 - 2), kx = xx - (3 * 2 - 2);
      const float want = (ky >= 0 && ky < 6 && kx >= 0 && kx < 6) ? params.weights(0, 0, ky, kx) : 0.0f;
      EXPECT_FLOAT_EQ(y(0, 0, yy, xx), want);
    }
}

TEST(Deconv2d, RandomConfigurationsMatchScatterOracle) {
  const int cfgs[][6] = {{1, 2, 6, 5, 2, 2}, {3, 2, 7, 4, 3, 2}, {2, 3, 8, 3, 4, 2},
                         {2, 2, 3, 6, 1, 1}, {4, 1, 6, 7, 2, 2}};
  std::uint64_t seed = 40;
  for (const auto& c : cfgs) {
    auto x = oracle::random_tensor({2, c[0], c[3], c[3] + 2}, seed++);
    auto params = ConvParams::deconv(c[0], c[1], {c[2], c[4], c[5]});
    params.weights = oracle::random_tensor(params.weights.dims(), seed++);
    params.bias.assign(c[1], 0.25f);
    int oh, ow;
    const auto want = oracle::deconv2d(x, params.weights, params.bias, c[4], c[5], oh, ow);
    const auto y = deconv2d(x, params);
    EXPECT_EQ(y.h(), oh);
    EXPECT_EQ(y.w(), ow);
    expect_close(want, y, 1e-5);
  }
}

TEST(Deconv2d, AdjointOfConv) {
  const ConvGeometry triples[] = {{6, 2, 2}, {7, 3, 2}, {8, 4, 2}, {3, 1, 1}, {3, 2, 1}};
  std::uint64_t seed = 70;
  for (const auto& g : triples) {
    const int c_in = 3, c_out = 2;
    // Extents with (h + 2p - k) divisible by the stride, so the transposed
    // output covers the whole conv input.
    auto fit = [&](int approx) {
      int h = approx;
      while ((h + 2 * g.pad - g.k) % g.stride != 0) ++h;
      return h;
    };
    auto x = oracle::random_tensor({2, c_in, fit(4 * g.stride), fit(3 * g.stride + 1)}, seed++);
    auto conv = ConvParams::conv(c_in, c_out, g);
    conv.weights = oracle::random_tensor(conv.weights.dims(), seed++);
    conv.bias.clear();
    const auto cx = conv2d(x, conv);
    auto y = oracle::random_tensor(cx.dims(), seed++);
    BasicConvParams<float> deconv{g, c_out, c_in, conv.weights, {}};
    const auto dy = deconv2d(y, deconv);
    ASSERT_EQ(dy.dims(), x.dims());
    const double rhs = dot(x, dy);
    const double lhs = dot(cx, y);
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Deconv2d, Errors) {
  Tensor4 x(1, 2, 4, 4);
  EXPECT_THROW(deconv2d(x, ConvParams::deconv(3, 1, {6, 2, 2})), ShapeError);
  Tensor4 one(1, 1, 1, 1);
  EXPECT_THROW(deconv2d(one, ConvParams::deconv(1, 1, {3, 1, 2})), ShapeError);
}

TEST(Prelu, Definition) {
  Tensor4 x(1, 2, 1, 2);
  x[0] = -2.0f;
  x[1] = 3.0f;
  x[2] = -1.0f;
  x[3] = 0.0f;
  const auto y = prelu(x, PReLUParams{{0.25f, 0.5f}});
  EXPECT_FLOAT_EQ(y[0], -0.5f);
  EXPECT_FLOAT_EQ(y[1], 3.0f);
  EXPECT_FLOAT_EQ(y[2], -0.5f);
  EXPECT_FLOAT_EQ(y[3], 0.0f);
}

TEST(Prelu, PositiveAndUnitSlopeAreIdentity) {
  auto pos = oracle::random_tensor({2, 3, 4, 4}, 5, 0.0f, 1.0f);
  EXPECT_EQ(prelu(pos, PReLUParams{{0.1f, 0.7f, -3.0f}}), pos);
  auto any = oracle::random_tensor({2, 3, 4, 4}, 6);
  EXPECT_EQ(prelu(any, PReLUParams{{1.0f, 1.0f, 1.0f}}), any);
  EXPECT_THROW(prelu(any, PReLUParams{{1.0f}}), ShapeError);
}

TEST(Concat, OrderAndRoundTrip) {
  auto a = oracle::random_tensor({1, 2, 4, 4}, 8);
  auto b = oracle::random_tensor({1, 2, 4, 4}, 9);
  EXPECT_EQ(concat_channels(std::vector<Tensor4>{a}), a);
  const auto ab = concat_channels(std::vector<Tensor4>{a, b});
  EXPECT_EQ(ab.dims(), (Dims4{1, 4, 4, 4}));
  EXPECT_EQ(slice_channels(ab, 0, 2), a);
  EXPECT_EQ(slice_channels(ab, 2, 2), b);
  EXPECT_THROW(concat_channels(std::vector<Tensor4>{a, Tensor4(1, 1, 3, 4)}), ShapeError);
}

TEST(Concat, BlockIdentityConvRecoversFirstPart) {
  auto a = oracle::random_tensor({2, 3, 5, 6}, 11);
  auto b = oracle::random_tensor({2, 2, 5, 6}, 12);
  auto params = ConvParams::conv(5, 3, {1, 1, 0});
  for (int o = 0; o < 3; ++o) params.weights(o, o, 0, 0) = 1.0f;
  EXPECT_EQ(conv2d(concat_channels(std::vector<Tensor4>{a, b}), params), a);
}

TEST(Bilinear, ConstantStaysConstant) {
  Tensor4 x(1, 2, 3, 5, 0.37f);
  for (int s : {2, 3, 4}) {
    const auto y = bilinear_upsample(x, s);
    for (float v : y.storage()) EXPECT_NEAR(v, 0.37f, 1e-7);
  }
}

TEST(Bilinear, HalfPixelCenters) {
  Tensor4 x(1, 1, 1, 2);
  x[1] = 1.0f;
  const auto y = bilinear_upsample(x, 2);
  ASSERT_EQ(y.dims(), (Dims4{1, 1, 2, 4}));
  const float want[] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y(0, 0, r, i), want[i]);
}

TEST(Bilinear, ShapeAndErrors) {
  EXPECT_EQ(bilinear_upsample(Tensor4(1, 1, 3, 3), 4).dims(), (Dims4{1, 1, 12, 12}));
  EXPECT_THROW(bilinear_upsample(Tensor4(1, 1, 3, 3), 5), ConfigError);
}

TEST(L1Loss, Values) {
  auto a = oracle::random_tensor({2, 3, 4, 5}, 13);
  EXPECT_EQ(l1_loss(a, a), 0.0);
  Tensor4 b = a;
  for (auto& v : b.storage()) v += 0.5f;
  EXPECT_NEAR(l1_loss(a, b), 0.5, 1e-6);
  auto c = oracle::random_tensor(a.dims(), 14);
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(double(a[i]) - c[i]);
  EXPECT_NEAR(l1_loss(a, c), sum / a.size(), 1e-6);
  EXPECT_THROW(l1_loss(a, Tensor4(1, 1, 1, 1)), ShapeError);
}

TEST(Ops, FiniteInputsGiveFiniteOutputs) {
  auto x = oracle::random_tensor({1, 2, 6, 6}, 15, -100.f, 100.f);
  auto params = ConvParams::conv(2, 2, {3, 1, 1});
  params.weights = oracle::random_tensor(params.weights.dims(), 16, -10.f, 10.f);
  EXPECT_TRUE(conv2d(x, params).all_finite());
  auto dparams = ConvParams::deconv(2, 2, {6, 2, 2});
  dparams.weights = oracle::random_tensor(dparams.weights.dims(), 17, -10.f, 10.f);
  EXPECT_TRUE(deconv2d(x, dparams).all_finite());
  EXPECT_TRUE(prelu(x, PReLUParams{{0.2f, 0.3f}}).all_finite());
  EXPECT_TRUE(bilinear_upsample(x, 3).all_finite());
}
