#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coad/gasa.hpp"
#include "support/oracles.hpp"

namespace coad {
namespace {

using oracle::random_tensor;
using oracle::values;

std::vector<Tensor<double>> random_group(int n, Shape shape, std::uint64_t seed) {
  std::vector<Tensor<double>> out;
  for (int i = 0; i < n; ++i) out.push_back(random_tensor(shape, seed + i, -2, 2));
  return out;
}

TEST(BlockShuffle, SingleBlockIsWholeFeature) {
  auto group = random_group(3, {8, 2, 2}, 1);
  auto g = block_shuffle(group, 1);
  ASSERT_EQ(g.members.size(), 1u);
  for (int n = 0; n < 3; ++n) EXPECT_EQ(values(g.members[0][n]), values(group[n]));
}

TEST(BlockShuffle, IndexArithmetic) {
  auto group = random_group(2, {8, 2, 2}, 2);
  auto g = block_shuffle(group, 4);
  EXPECT_EQ(g.block_channels, 2);
  for (int n = 0; n < 2; ++n) {
    EXPECT_EQ(values(g.members[3][n]), values(slice_channels(group[n], 6, 8)));
  }
  EXPECT_THROW(block_shuffle(group, 3), ConfigError);
}

TEST(AggregateBlock, SingletonAndIdenticalMembers) {
  auto a = random_tensor({2, 3, 3}, 3);
  EXPECT_EQ(values(aggregate_block<double>({a})), values(a));
  auto g = aggregate_block<double>({a, a, a, a});
  EXPECT_LE(oracle::max_abs_diff(values(g), values(a)), 1e-15);
}

TEST(AggregateBlock, PermutationsOfThreeAgree) {
  auto members = random_group(3, {4, 3, 3}, 5);
  auto ref = values(aggregate_block(members));
  std::vector<int> idx{0, 1, 2};
  while (std::next_permutation(idx.begin(), idx.end())) {
    std::vector<Tensor<double>> p;
    for (int i : idx) p.push_back(members[i]);
    EXPECT_EQ(values(aggregate_block(p)), ref);
  }
}

TEST(AggregateBlock, ConvexPerElement) {
  auto members = random_group(5, {4, 4, 4}, 7);
  auto g = aggregate_block(members);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& m : members) {
      lo = std::min(lo, m[i]);
      hi = std::max(hi, m[i]);
    }
    EXPECT_GE(g[i], lo);
    EXPECT_LE(g[i], hi);
  }
  EXPECT_THROW(aggregate_block<double>({members[0], random_tensor({4, 4, 3}, 1)}), ShapeError);
}

TEST(Attention, HandEvaluatedFourLocations) {
  // q = k = v = [0, 1, 2, 3] (D = 1). Column j weights rows by exp(i * j).
  Tensor<double> x({1, 4}, std::vector<double>{0, 1, 2, 3});
  auto out = column_softmax_attention(x, x, x);
  const double e = std::exp(1.0);
  const double col1 = (e + 2 * e * e + 3 * e * e * e) / (1 + e + e * e + e * e * e);
  const double e2 = std::exp(2.0), e4 = std::exp(4.0), e6 = std::exp(6.0);
  const double col2 = (e2 + 2 * e4 + 3 * e6) / (1 + e2 + e4 + e6);
  const double e3 = std::exp(3.0), e9 = std::exp(9.0);
  const double col3 = (e3 + 2 * e6 + 3 * e9) / (1 + e3 + e6 + e9);
  EXPECT_NEAR(out[0], 1.5, 1e-12);
  EXPECT_NEAR(out[1], col1, 1e-12);
  EXPECT_NEAR(out[2], col2, 1e-12);
  EXPECT_NEAR(out[3], col3, 1e-12);
}

TEST(Attention, AffinityColumnsSumToOne) {
  auto q = random_tensor({4, 9}, 1), k = random_tensor({4, 9}, 2);
  auto a = softmax_along(scale(matmul(transpose2d(q), k), 0.5), 0);
  for (int j = 0; j < 9; ++j) {
    double s = 0;
    for (int i = 0; i < 9; ++i) s += a[i * 9 + j];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

struct Module {
  ParameterSet<double> params;
  Rng rng{9};
  GroupAttentionAggregation<double> gasa{params, "gasa", 8, 2, rng};
};

TEST(Gasa, LocalContextKeepsShapeAndZeroMapsToZero) {
  Module m;
  auto x = random_tensor({4, 5, 5}, 1);
  EXPECT_EQ(m.gasa.local_context(0, x).shape(), x.shape());
  for (auto& w : m.gasa.block_weights()) {
    for (auto& conv : w.dilated) fill(conv.bias, 0.0);
    fill(w.local_fuse.bias, 0.0);
  }
  for (double v : values(m.gasa.local_context(1, Tensor<double>({4, 5, 5}, 0.0)))) EXPECT_EQ(v, 0.0);
}

TEST(Gasa, DilatedBranchesMatchOracle) {
  Module m;
  auto x = random_tensor({4, 9, 9}, 2);
  const auto& w = m.gasa.block_weights()[1];
  for (std::size_t i = 0; i < w.dilated.size(); ++i) {
    const int dil = GroupAttentionAggregation<double>::kDilations[i];
    std::int64_t oh = 0, ow = 0;
    auto ref = oracle::conv2d(values(x), 4, 9, 9, values(w.dilated[i].weight), 1, 3, values(w.dilated[i].bias), 1,
                              dil, dil, oh, ow);
    EXPECT_EQ(oh, 9);
    EXPECT_LE(oracle::max_rel_diff(values(w.dilated[i](x)), ref), 1e-6) << "dilation " << dil;
  }
}

TEST(Gasa, ZeroQueryKeyGivesMeanOfValue) {
  Module m;
  auto& w = m.gasa.block_weights()[0];
  for (auto* layer : {&w.query, &w.key}) {
    fill(layer->weight, 0.0);
    fill(layer->bias, 0.0);
  }
  auto local = random_tensor({4, 3, 3}, 3);
  auto out = m.gasa.global_attention(0, local);
  auto v = w.value(local);
  for (int d = 0; d < 4; ++d) {
    double mean = 0;
    for (int p = 0; p < 9; ++p) mean += v[d * 9 + p] / 9;
    for (int p = 0; p < 9; ++p) EXPECT_NEAR(out[d * 9 + p], mean + local[d * 9 + p], 1e-12);
  }
}

TEST(Gasa, SingleLocationAddsValue) {
  Module m;
  auto local = random_tensor({4, 1, 1}, 4);
  auto out = m.gasa.global_attention(1, local);
  auto v = m.gasa.block_weights()[1].value(local);
  for (int d = 0; d < 4; ++d) EXPECT_NEAR(out[d], v[d] + local[d], 1e-14);
}

TEST(Gasa, IdentityFuseConcatenates) {
  Module m;
  auto& fuse = m.gasa.fuse_layer();
  fill(fuse.weight, 0.0);
  fill(fuse.bias, 0.0);
  for (int c = 0; c < 8; ++c) fuse.weight.data()[c * 8 + c] = 1.0;
  auto a = random_tensor({4, 2, 2}, 5), b = random_tensor({4, 2, 2}, 6);
  auto g = m.gasa.fuse_blocks({a, b});
  EXPECT_EQ(g.shape(), (Shape{8, 2, 2}));
  EXPECT_EQ(values(g), values(concat<double>({a, b})));
  EXPECT_THROW(m.gasa.fuse_blocks({a}), ShapeError);
}

TEST(Gasa, OrderInsensitiveEndToEnd) {
  Module m;
  auto group = random_group(4, {8, 3, 3}, 20);
  auto ref = values(m.gasa(group));
  std::vector<int> idx{0, 1, 2, 3};
  while (std::next_permutation(idx.begin(), idx.end())) {
    std::vector<Tensor<double>> p;
    for (int i : idx) p.push_back(group[i]);
    EXPECT_EQ(values(m.gasa(p)), ref);
  }
}

TEST(Gasa, SinglePrecisionDriftWithinTolerance) {
  ParameterSet<float> params;
  Rng rng(9);
  GroupAttentionAggregation<float> gasa(params, "gasa", 8, 2, rng);
  std::vector<Tensor<float>> group;
  for (int n = 0; n < 3; ++n) {
    auto d = random_tensor({8, 3, 3}, 40 + n);
    group.emplace_back(Shape{8, 3, 3}, std::vector<float>(d.data().begin(), d.data().end()));
  }
  auto ref = gasa(group);
  auto flipped = gasa({group[2], group[0], group[1]});
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(ref[i], flipped[i], 1e-5);
}

TEST(Gasa, BlocksOwnTheirWeights) {
  Module m;
  auto names = m.params.names();
  EXPECT_NE(std::find(names.begin(), names.end(), "gasa.block0.query.weight"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "gasa.block1.query.weight"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "gasa.block1.atrous7.weight"), names.end());
  EXPECT_EQ(m.params.at("gasa.block0.atrous3.weight").shape(), (Shape{1, 4, 3, 3}));
}

TEST(Gasa, RejectsBadBlockWidths) {
  ParameterSet<double> params;
  Rng rng(1);
  EXPECT_THROW(GroupAttentionAggregation<double>(params, "g", 8, 3, rng), ConfigError);
  EXPECT_THROW(GroupAttentionAggregation<double>(params, "h", 8, 4, rng), ConfigError);
}

}  // namespace
}  // namespace coad
