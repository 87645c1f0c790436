#include <gtest/gtest.h>

#include <cstring>

#include "jaffnet/errors.hpp"
#include "jaffnet/jaff.hpp"
#include "support.hpp"

namespace jaffnet {
namespace {

using testing::check_gradients;
using testing::random_tensor;
using V = Var<double>;

struct JaffFixture {
  ParameterSet<double> params;
  Jaff<double> jaff;
  JaffFixture(int low, int high, std::uint64_t seed = 1) {
    Rng rng(seed);
    jaff = Jaff<double>(params, "j", low, high, rng);
  }
  void zero_all() {
    for (auto e : params.entries()) e.var.mutable_value().fill(0.0);
  }
};

bool bitwise_equal(const Tensor<double>& a, const Tensor<double>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(Jaff, ZeroWeightsGiveHalfMaps) {
  JaffFixture f(4, 6);
  f.zero_all();
  Rng rng(2);
  const auto high = V::constant(random_tensor<double>(Shape{1, 6, 5, 5}, rng));
  const auto mc = f.jaff.channel_attention(high);
  const auto ms = f.jaff.spatial_attention(high);
  EXPECT_EQ(mc.shape(), (Shape{1, 4, 1, 1}));
  EXPECT_EQ(ms.shape(), (Shape{1, 1, 5, 5}));
  for (double v : mc.value().values()) EXPECT_EQ(v, 0.5);
  for (double v : ms.value().values()) EXPECT_EQ(v, 0.5);
  V outer;
  f.jaff.fuse_maps(mc, ms, &outer);
  for (double v : outer.value().values()) EXPECT_EQ(v, 0.25);
}

TEST(Jaff, ChannelMapLengthAtD1) {
  JaffFixture f(512, 512);
  Rng rng(3);
  const auto high = Var<double>::constant(random_tensor<double>(Shape{1, 512, 2, 2}, rng));
  EXPECT_EQ(f.jaff.channel_attention(high).shape(), (Shape{1, 512, 1, 1}));
  const auto low = Var<double>::constant(random_tensor<double>(Shape{1, 512, 4, 4}, rng));
  EXPECT_EQ(f.jaff(low, high).fused.shape().c, 1024);
}

TEST(Jaff, ConstantInputFeedsIdenticalPooledVectors) {
  JaffFixture f(3, 4);
  const auto high = V::constant(Tensor<double>(Shape{1, 4, 6, 6}, 0.7));
  const auto projected = f.jaff.cab_in(high);
  const auto avg = ops::global_avg_pool(projected);
  const auto max = ops::global_max_pool(projected);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(avg.value()[c], max.value()[c], 1e-15);
}

TEST(Jaff, SpatialMapShape28) {
  JaffFixture f(8, 512);
  Rng rng(4);
  const auto high = Var<double>::constant(random_tensor<double>(Shape{1, 512, 28, 28}, rng));
  EXPECT_EQ(f.jaff.spatial_attention(high).shape(), (Shape{1, 1, 28, 28}));
}

// Impulse probe on the two dilated convs: the response support is 13x13.
TEST(Jaff, SpatialReceptiveFieldIs13) {
  JaffFixture f(2, 2);
  for (auto* conv : {&f.jaff.sab_rate2, &f.jaff.sab_rate4}) {
    conv->weight.mutable_value().fill(1.0);
    conv->bias.mutable_value().fill(0.0);
  }
  const int n = 31;
  Tensor<double> impulse(Shape{1, 2, n, n});
  impulse.at(0, 0, 15, 15) = 1.0;
  const auto response = f.jaff.sab_rate4(f.jaff.sab_rate2(V::constant(impulse)));
  int min_r = n, max_r = -1, min_c = n, max_c = -1;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (response.value().at(0, 0, r, c) != 0) {
        min_r = std::min(min_r, r);
        max_r = std::max(max_r, r);
        min_c = std::min(min_c, c);
        max_c = std::max(max_c, c);
      }
  EXPECT_EQ(max_r - min_r + 1, 13);
  EXPECT_EQ(max_c - min_c + 1, 13);
}

TEST(Jaff, OuterProductMatchesDoubleLoop) {
  JaffFixture f(4, 3);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto high = V::constant(random_tensor<double>(Shape{2, 3, 4, 3}, rng, -3, 3));
    const auto mc = f.jaff.channel_attention(high);
    const auto ms = f.jaff.spatial_attention(high);
    V outer;
    f.jaff.fuse_maps(mc, ms, &outer);
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 4; ++c)
        for (int h = 0; h < 4; ++h)
          for (int w = 0; w < 3; ++w)
            EXPECT_EQ(outer.value().at(n, c, h, w), mc.value().at(n, c, 0, 0) * ms.value().at(n, 0, h, w));
  }
}

TEST(Jaff, IdentityKernelsReturnOuterProduct) {
  JaffFixture f(3, 3);
  auto& dw = f.jaff.fuse_depthwise;
  dw.weight.mutable_value().fill(0.0);
  for (int c = 0; c < 3; ++c) dw.weight.mutable_value().at(c, 0, 1, 1) = 1.0;
  dw.bias.mutable_value().fill(0.0);
  auto& pw = f.jaff.fuse_pointwise;
  pw.weight.mutable_value().fill(0.0);
  for (int c = 0; c < 3; ++c) pw.weight.mutable_value().at(c, c, 0, 0) = 1.0;
  pw.bias.mutable_value().fill(0.0);
  Rng rng(6);
  const auto high = V::constant(random_tensor<double>(Shape{1, 3, 5, 4}, rng));
  V outer;
  const auto m = f.jaff.fuse_maps(f.jaff.channel_attention(high), f.jaff.spatial_attention(high), &outer);
  EXPECT_EQ(m.value(), outer.value());
}

TEST(Jaff, AttentionMapsStrictlyInsideUnitInterval) {
  JaffFixture f(5, 7, 9);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto high = V::constant(random_tensor<double>(Shape{2, 7, 6, 6}, rng));
    for (const auto& m : {f.jaff.channel_attention(high), f.jaff.spatial_attention(high)}) {
      for (double v : m.value().values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
}

TEST(Jaff, AlphaZeroRefinedIsBitwiseLow) {
  JaffFixture f(4, 6, 3);
  Rng rng(8);
  const auto low = V::constant(random_tensor<double>(Shape{2, 4, 8, 8}, rng));
  const auto high = V::constant(random_tensor<double>(Shape{2, 6, 4, 4}, rng));
  ASSERT_EQ(f.jaff.alpha.value()[0], 0.0);
  const auto r = f.jaff(low, high);
  EXPECT_TRUE(bitwise_equal(r.refined.value(), low.value()));
  EXPECT_EQ(r.fused.shape(), (Shape{2, 10, 8, 8}));
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 64; ++i) {
      for (int c = 0; c < 4; ++c) EXPECT_EQ(r.fused.value().plane(n, c)[i], low.value().plane(n, c)[i]);
      for (int c = 0; c < 6; ++c) EXPECT_EQ(r.fused.value().plane(n, 4 + c)[i], r.high_up.value().plane(n, c)[i]);
    }
  const auto up = ops::upsample_bilinear(high, 8, 8);
  EXPECT_EQ(r.high_up.value(), up.value());
}

TEST(Jaff, UnitGuidanceDoublesLow) {
  JaffFixture f(3, 3);
  // depthwise and pointwise zeroed with pointwise bias 1 make M identically 1
  f.jaff.fuse_depthwise.weight.mutable_value().fill(0.0);
  f.jaff.fuse_depthwise.bias.mutable_value().fill(0.0);
  f.jaff.fuse_pointwise.weight.mutable_value().fill(0.0);
  f.jaff.fuse_pointwise.bias.mutable_value().fill(1.0);
  f.jaff.alpha.mutable_value().fill(1.0);
  Rng rng(9);
  const auto low = V::constant(random_tensor<double>(Shape{1, 3, 4, 4}, rng));
  const auto high = V::constant(random_tensor<double>(Shape{1, 3, 4, 4}, rng));
  const auto r = f.jaff(low, high);
  for (double v : r.attention.joint.value().values()) EXPECT_EQ(v, 1.0);
  for (std::size_t i = 0; i < low.value().size(); ++i) EXPECT_EQ(r.refined.value()[i], 2 * low.value()[i]);
}

TEST(Jaff, SpatialMapMonotoneInLogits) {
  JaffFixture f(4, 5, 11);
  Rng rng(10);
  const auto high = V::constant(random_tensor<double>(Shape{1, 5, 9, 9}, rng, -2, 2));
  const auto logits = f.jaff.spatial_logits(high).value();
  const auto map = f.jaff.spatial_attention(high).value();
  std::size_t arg_logit = 0, arg_map = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] > logits[arg_logit]) arg_logit = i;
    if (map[i] > map[arg_map]) arg_map = i;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (logits[i] > logits[j]) EXPECT_GE(map[i], map[j]);
    }
  }
  EXPECT_EQ(arg_logit, arg_map);
  // scaling by a constant in (0,1] keeps the argmax
  for (double s : {1.0, 0.5, 0.01}) {
    std::size_t a = 0;
    for (std::size_t i = 0; i < map.size(); ++i)
      if (s * map[i] > s * map[a]) a = i;
    EXPECT_EQ(a, arg_map);
  }
}

TEST(Jaff, ShapeMismatchThrows) {
  JaffFixture f(4, 6);
  const auto low = V::constant(Tensor<double>(Shape{1, 5, 8, 8}));
  const auto high = V::constant(Tensor<double>(Shape{1, 6, 4, 4}));
  EXPECT_THROW(f.jaff(low, high), ShapeError);
}

TEST(Jaff, GradientsIncludingAlpha) {
  JaffFixture f(3, 4, 12);
  f.jaff.alpha.mutable_value().fill(0.6);
  Rng rng(13);
  auto low = V::parameter(random_tensor<double>(Shape{2, 3, 8, 8}, rng));
  auto high = V::parameter(random_tensor<double>(Shape{2, 4, 4, 4}, rng));
  const auto mix = random_tensor<double>(Shape{2, 7, 8, 8}, rng);
  auto wrt = testing::learnable(f.params);
  wrt.emplace_back("low", low);
  wrt.emplace_back("high", high);
  const auto r = check_gradients([&] { return ops::weighted_sum(f.jaff(low, high).fused, mix); }, wrt, 12);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst;
  EXPECT_NE(f.jaff.alpha.grad()[0], 0.0);
}

TEST(Jaff, AlphaGradientAtZero) {
  JaffFixture f(3, 4, 14);
  Rng rng(15);
  auto low = V::constant(random_tensor<double>(Shape{1, 3, 8, 8}, rng));
  auto high = V::constant(random_tensor<double>(Shape{1, 4, 4, 4}, rng));
  const auto mix = random_tensor<double>(Shape{1, 7, 8, 8}, rng);
  const auto r = check_gradients([&] { return ops::weighted_sum(f.jaff(low, high).fused, mix); },
                                 {{"alpha", f.jaff.alpha}}, 1);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst;
  EXPECT_NE(f.jaff.alpha.grad()[0], 0.0);
}

}  // namespace
}  // namespace jaffnet
