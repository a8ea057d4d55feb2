#include <gtest/gtest.h>

#include <algorithm>

#include "coad/model.hpp"
#include "support/oracles.hpp"

namespace coad {
namespace {

using oracle::random_tensor;
using oracle::values;

ModelConfig tiny(AblationFlags flags = {}) {
  auto cfg = ModelConfig::preset("tiny");
  cfg.group_size = 3;
  cfg.ablation = flags;
  return cfg;
}

std::vector<Tensor<double>> images(int n, std::int64_t s, std::uint64_t seed) {
  std::vector<Tensor<double>> out;
  for (int i = 0; i < n; ++i) out.push_back(random_tensor({3, s, s}, seed + i, 0, 1));
  return out;
}

TEST(Model, OutputsOnePerInputWithFullResolutionMaps) {
  CoADNet<double> model(tiny());
  auto pred = model.forward_group(images(3, 32, 1));
  ASSERT_EQ(pred.maps.size(), 3u);
  ASSERT_EQ(pred.priors.size(), 3u);
  EXPECT_EQ(pred.priors[0].shape(), (Shape{1, 4, 4}));
  EXPECT_EQ(pred.group_semantics.shape(), (Shape{16, 4, 4}));
  EXPECT_EQ(pred.group_vectors.size(), 3u);
  for (const auto& m : pred.maps) {
    EXPECT_EQ(m.shape(), (Shape{1, 32, 32}));
    for (double v : m.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Model, PermutationEquivariant) {
  CoADNet<double> model(tiny());
  auto imgs = images(3, 32, 10);
  auto ref = model.forward_group(imgs);
  std::vector<int> idx{0, 1, 2};
  while (std::next_permutation(idx.begin(), idx.end())) {
    std::vector<Tensor<double>> p;
    for (int i : idx) p.push_back(imgs[i]);
    auto out = model.forward_group(p);
    EXPECT_EQ(values(out.group_semantics), values(ref.group_semantics));
    for (int k = 0; k < 3; ++k) EXPECT_LE(oracle::max_abs_diff(values(out.maps[k]), values(ref.maps[idx[k]])), 1e-5);
  }
}

TEST(Model, MixedSizesRejected) {
  CoADNet<double> model(tiny());
  auto imgs = images(2, 32, 1);
  imgs.push_back(random_tensor({3, 24, 24}, 9));
  EXPECT_THROW(model.forward_group(imgs), ShapeError);
  EXPECT_THROW(model.forward_group({}), ShapeError);
}

TEST(Model, BaselineParameterCountWithinTenPercent) {
  for (const char* preset : {"tiny", "desk", "wide"}) {
    auto full = ModelConfig::preset(preset);
    auto base = full;
    base.ablation = AblationFlags::baseline();
    const double nf = static_cast<double>(CoADNet<float>(full).parameters().scalar_count());
    const double nb = static_cast<double>(CoADNet<float>(base).parameters().scalar_count());
    EXPECT_LE(std::fabs(nb - nf) / nf, 0.10) << preset << " full " << nf << " baseline " << nb;
  }
}

TEST(Model, TogglingAModuleKeepsOtherNames) {
  auto with = tiny();
  auto without = tiny();
  without.ablation.use_ggd = false;
  auto names_a = CoADNet<float>(with).parameters().names();
  auto names_b = CoADNet<float>(without).parameters().names();
  auto keep = [](const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& n : names)
      if (n.rfind("backbone.", 0) == 0 || n.rfind("oiasg.", 0) == 0) out.push_back(n);
    return out;
  };
  EXPECT_EQ(keep(names_a), keep(names_b));
  EXPECT_FALSE(keep(names_a).empty());
  EXPECT_NE(names_a, names_b);
}

TEST(Model, BaselineStillProducesAuxiliaryHead) {
  CoADNet<double> model(tiny(AblationFlags::baseline()));
  auto a = model.auxiliary_saliency(random_tensor({3, 32, 32}, 1, 0, 1));
  EXPECT_EQ(a.shape(), (Shape{1, 32, 32}));
  auto pred = model.forward_group(images(3, 32, 2));
  EXPECT_TRUE(pred.group_vectors.empty());
  EXPECT_EQ(pred.maps[0].shape(), (Shape{1, 32, 32}));
}

TEST(Model, LadderOrderAndLabels) {
  auto ladder = AblationFlags::ladder();
  ASSERT_EQ(ladder.size(), 5u);
  EXPECT_EQ(ladder.front(), AblationFlags::baseline());
  EXPECT_EQ(ladder.back(), AblationFlags::full());
  EXPECT_EQ(ladder[0].label(), "Baseline");
  EXPECT_EQ(ladder[2].label(), "Baseline+OIaSG+GASA");
  EXPECT_EQ(ladder[4].label(), "Baseline+OIaSG+GASA+GGD+GCPD");
}

TEST(Model, ConfigValidation) {
  auto cfg = ModelConfig::preset("desk");
  EXPECT_NO_THROW(cfg.validate());
  cfg.blocks = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig::preset("desk");
  cfg.loss_alpha = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(ModelConfig::preset("huge"), ConfigError);
  EXPECT_EQ(ModelConfig{}.loss_alpha, 0.7);
  EXPECT_EQ(ModelConfig{}.loss_beta, 0.3);
  EXPECT_EQ(ModelConfig{}.group_size, 5);
}

TEST(Model, SameSeedSameWeights) {
  CoADNet<float> a(tiny()), b(tiny());
  auto c = tiny();
  c.seed = 2;
  CoADNet<float> d(c);
  const auto& ea = a.parameters().entries();
  const auto& eb = b.parameters().entries();
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_TRUE(std::equal(ea[i].tensor.data().begin(), ea[i].tensor.data().end(), eb[i].tensor.data().begin()));
  }
  const auto w1 = a.parameters().at("backbone.stage1.conv1.weight");
  const auto w2 = d.parameters().at("backbone.stage1.conv1.weight");
  EXPECT_FALSE(std::equal(w1.data().begin(), w1.data().end(), w2.data().begin()));
}

}  // namespace
}  // namespace coad
