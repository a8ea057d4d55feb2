#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "coad/tensor.hpp"

namespace coad {

struct GradCheckOptions {
  double step = 1e-5;               // initial central difference half-width
  double min_step = 1e-8;           // smallest half-width tried near a kink
  double tolerance = 1e-3;          // on the norm-wise relative error
  double zero_floor = 1e-5;         // denominator floor for all-zero gradients
  std::int64_t max_elements_per_leaf = 16;
  std::uint64_t seed = 1;           // projection and element sampling
};

struct GradCheckResult {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0;
  std::string worst_leaf;
  std::int64_t elements = 0;
  bool passed = false;
};

using GradLeaf = std::pair<std::string, Tensor<double>>;
using GradOutputs = std::function<std::vector<Tensor<double>>()>;

// Compares backward() against central finite differences of the scalar
// sum_i <outputs_i, r_i> with fixed random r_i in [-1, 1]. Leaves are
// perturbed in place. Near a relu kink the step shrinks until the forward
// and backward one-sided slopes agree. The error for a leaf is ||a - n|| / max(||a||, ||n||)
// over its sampled elements, floored at zero_floor.
GradCheckResult check_gradients(const std::string& name, const GradOutputs& outputs, const std::vector<GradLeaf>& leaves,
                                const GradCheckOptions& options = {});

// Module-level suites on tiny shapes (N = 2, C = 8, 4 x 4 features).
std::vector<std::string> gradcheck_suite_names();
GradCheckResult run_gradcheck_case(const std::string& name, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace coad
