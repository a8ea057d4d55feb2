#include <gtest/gtest.h>

#include "coad/gradcheck.hpp"
#include "coad/ops.hpp"
#include "support/oracles.hpp"

namespace coad {
namespace {

// Elementwise square whose backward is scaled by `slope_factor`; 1 is correct.
Tensor<double> square_with_slope(const Tensor<double>& x, double slope_factor) {
  auto node = std::make_shared<detail::Node<double>>();
  node->shape = x.shape();
  for (double v : x.data()) node->data.push_back(v * v);
  node->requires_grad = true;
  node->inputs = {x.node()};
  node->backward_fn = [slope_factor](detail::Node<double>& self) {
    auto& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += slope_factor * 2 * in.data[i] * self.grad[i];
  };
  return Tensor<double>::from_node(node);
}

TEST(GradCheck, AcceptsCorrectAndRejectsWrongGradients) {
  auto x = oracle::random_tensor({3, 4}, 1);
  x.set_requires_grad(true);
  auto good = check_gradients("square", [&] { return std::vector<Tensor<double>>{square_with_slope(x, 1.0)}; },
                              {{"x", x}});
  EXPECT_TRUE(good.passed) << good.max_rel_error;
  EXPECT_LT(good.max_rel_error, 1e-6);
  EXPECT_EQ(good.elements, 12);

  auto bad = check_gradients("square", [&] { return std::vector<Tensor<double>>{square_with_slope(x, 1.01)}; },
                             {{"x", x}});
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(bad.worst_leaf, "x");
}

TEST(GradCheck, CompositeOpsPass) {
  auto a = oracle::random_tensor({2, 5, 5}, 2);
  auto w = oracle::random_tensor({3, 2, 3, 3}, 3);
  auto b = oracle::random_tensor({3}, 4);
  for (auto* t : {&a, &w, &b}) t->set_requires_grad(true);
  auto r = check_gradients(
      "conv-softmax",
      [&] {
        auto y = conv2d(a, w, b, {1, 3, 3});
        return std::vector<Tensor<double>>{softmax_along(reshape(y, {3, 25}), 0), bilinear_resize(y, 7, 3)};
      },
      {{"a", a}, {"w", w}, {"b", b}});
  EXPECT_TRUE(r.passed) << r.worst_leaf << " " << r.max_rel_error;
}

TEST(GradCheck, SuiteNamesCoverEveryModule) {
  auto names = gradcheck_suite_names();
  for (const char* n : {"backbone", "oiasg", "gasa", "ggd", "gcpd", "model_full", "model_baseline", "joint_loss"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  }
  EXPECT_THROW(run_gradcheck_case("nope", 1), Error);
}

class ModuleGradients : public ::testing::TestWithParam<std::string> {};

TEST_P(ModuleGradients, PassesOnOneSeed) {
  auto r = run_gradcheck_case(GetParam(), 3);
  EXPECT_TRUE(r.passed) << r.worst_leaf << " " << r.max_rel_error;
  EXPECT_GT(r.elements, 0);
}

INSTANTIATE_TEST_SUITE_P(Suite, ModuleGradients, ::testing::ValuesIn(gradcheck_suite_names()),
                         [](const auto& info) { return info.param; });

}  // namespace
}  // namespace coad
