#include <gtest/gtest.h>

#include "coad/oiasg.hpp"
#include "support/oracles.hpp"

namespace coad {
namespace {

using oracle::random_tensor;
using oracle::values;

struct Fixture {
  ParameterSet<double> params;
  Rng rng{4};
  IntraSaliencyGuidance<double> guide{params, "oiasg", 8, true, rng};
};

TEST(IntraSaliency, HeadShapesAndDeterminism) {
  Fixture f;
  auto feat = random_tensor({8, 5, 6}, 1, 0, 2);
  auto a = f.guide.head(feat);
  EXPECT_EQ(a.prior.shape(), (Shape{1, 5, 6}));
  EXPECT_EQ(a.logits.shape(), (Shape{1, 5, 6}));
  EXPECT_EQ(values(a.prior), values(f.guide.head(feat).prior));
  for (double v : a.prior.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(IntraSaliency, ZeroHeadGivesHalfPrior) {
  Fixture f;
  fill(f.guide.head_out.weight, 0.0);
  fill(f.guide.head_out.bias, 0.0);
  for (double v : values(f.guide.head(random_tensor({8, 4, 4}, 2)).prior)) EXPECT_EQ(v, 0.5);
}

TEST(IntraSaliency, ConstantInputGivesConstantAttention) {
  Fixture f;
  // Zero padding breaks constancy at the border, so check the interior.
  auto att = f.guide.spatial_attention(Tensor<double>({8, 6, 6}, 0.7));
  ASSERT_EQ(att.shape(), (Shape{1, 6, 6}));
  const double centre = att[2 * 6 + 2];
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x) EXPECT_DOUBLE_EQ(att[y * 6 + x], centre);
  for (double v : att.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(IntraSaliency, AttentionMatchesPoolingOracle) {
  Fixture f;
  auto feat = random_tensor({8, 4, 5}, 3);
  const auto v = values(feat);
  auto pooled = concat<double>({reduce_pool(feat, PoolKind::kChannelMean), reduce_pool(feat, PoolKind::kChannelMax)});
  std::vector<double> stacked = oracle::channel_mean(v, 8, 20);
  for (double m : oracle::channel_max(v, 8, 20)) stacked.push_back(m);
  EXPECT_LE(oracle::max_abs_diff(values(pooled), stacked), 1e-12);

  std::int64_t oh = 0, ow = 0;
  auto logits = oracle::conv2d(stacked, 2, 4, 5, values(f.guide.attention_conv.weight), 1, 3,
                               values(f.guide.attention_conv.bias), 1, 1, 1, oh, ow);
  auto att = f.guide.spatial_attention(feat);
  for (std::size_t i = 0; i < logits.size(); ++i) EXPECT_NEAR(att[i], 1 / (1 + std::exp(-logits[i])), 1e-12);
}

TEST(IntraSaliency, ZeroFusionWeightsScaleByOneAndAHalf) {
  Fixture f;
  fill(f.guide.fusion_conv.weight, 0.0);
  fill(f.guide.fusion_conv.bias, 0.0);
  auto feat = random_tensor({8, 3, 3}, 4);
  auto u = f.guide.fuse_prior(feat, Tensor<double>({1, 3, 3}, 0.2), Tensor<double>({1, 3, 3}, 0.9));
  for (std::size_t i = 0; i < feat.size(); ++i) EXPECT_DOUBLE_EQ(u[i], 1.5 * feat[i]);
}

TEST(IntraSaliency, ZeroFeaturesStayZero) {
  Fixture f;
  auto out = f.guide(Tensor<double>({8, 4, 4}, 0.0));
  for (double v : out.features.data()) EXPECT_EQ(v, 0.0);
}

TEST(IntraSaliency, NonNegativeFeaturesAmplifiedBetweenOneAndTwo) {
  Fixture f;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto feat = relu(random_tensor({8, 4, 4}, 100 + seed, -1, 3));
    auto out = f.guide(feat);
    ASSERT_EQ(out.features.shape(), feat.shape());
    for (std::size_t i = 0; i < feat.size(); ++i) {
      EXPECT_GE(out.features[i], feat[i]);
      EXPECT_LE(out.features[i], 2 * feat[i]);
      if (feat[i] > 0) {
        EXPECT_GT(out.features[i], feat[i]);
        EXPECT_LT(out.features[i], 2 * feat[i]);
      }
    }
  }
}

TEST(IntraSaliency, PlaneMismatchRejected) {
  Fixture f;
  auto feat = random_tensor({8, 4, 4}, 5);
  EXPECT_THROW(f.guide.fuse_prior(feat, Tensor<double>({1, 4, 3}, 0.5), Tensor<double>({1, 4, 3}, 0.5)), ShapeError);
}

TEST(IntraSaliency, HeadOnlyPassesFeaturesThrough) {
  ParameterSet<double> params;
  Rng rng(1);
  IntraSaliencyGuidance<double> guide(params, "oiasg", 8, false, rng);
  EXPECT_EQ(params.names().size(), 4u);
  auto feat = random_tensor({8, 4, 4}, 6);
  auto out = guide(feat);
  EXPECT_EQ(values(out.features), values(feat));
  EXPECT_EQ(out.prior.shape(), (Shape{1, 4, 4}));
  EXPECT_THROW(guide.spatial_attention(feat), ConfigError);
}

}  // namespace
}  // namespace coad
