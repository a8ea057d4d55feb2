#pragma once

#include <vector>

#include "coad/tensor.hpp"

namespace coad {

inline constexpr double kLossClampEps = 1e-7;

template <typename T>
struct LossTerms {
  Tensor<T> total;        // alpha * L_c + beta * L_s
  Tensor<T> cosaliency;   // L_c
  Tensor<T> saliency;     // L_s, undefined when there are no auxiliary samples
};

// Mean over images of the per-image mean BCE. Predictions are clamped to
// [eps, 1 - eps] before the logs.
template <typename T>
Tensor<T> mean_bce(const std::vector<Tensor<T>>& predictions, const std::vector<Tensor<T>>& targets,
                   double eps = kLossClampEps);

// L = alpha * L_c + beta * L_s. With no auxiliary maps the L_s term is dropped.
template <typename T>
LossTerms<T> joint_loss(const std::vector<Tensor<T>>& cosal_maps, const std::vector<Tensor<T>>& cosal_masks,
                        const std::vector<Tensor<T>>& aux_maps, const std::vector<Tensor<T>>& aux_masks, double alpha,
                        double beta);

// Plain-number form of the weighting, used to check the combination rule.
inline double combine_losses(double cosaliency, double saliency, double alpha, double beta) {
  return alpha * cosaliency + beta * saliency;
}

}  // namespace coad
