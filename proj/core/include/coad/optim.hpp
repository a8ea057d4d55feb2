#pragma once

#include <cstdint>
#include <vector>

#include "coad/parameter.hpp"

namespace coad {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // coupled L2: added to the gradient before the moment updates
};

// One bias-corrected Adam update over every parameter that received a
// gradient; gradients are zeroed afterwards. Parameters without a gradient
// (not reachable from the loss) are left alone.
template <typename T>
void adam_step(std::vector<Parameter<T>>& params, const AdamOptions& options);

// Step-decay schedule: lr0 * 2^-floor(iteration / halve_every).
double halving_lr(double lr0, std::int64_t halve_every, std::int64_t iteration);

}  // namespace coad
