#pragma once

#include <string>

#include "coad/parameter.hpp"

namespace coad {

/// Gated group distribution, shared by every group member.
///
/// U_g = 1x1 conv([U; G]) (2C -> C); P = sigmoid(f_p(SE(U_g))) where f_p is
/// a 1x1 bottleneck C -> C/4 -> C with a relu in between, and
/// X = P * G + (1 - P) * U.
template <typename T>
class GatedGroupDistribution {
 public:
  struct Gate {
    Tensor<T> probability;  // P, C x H x W in (0, 1)
    Tensor<T> fused;        // U_g
  };

  GatedGroupDistribution() = default;
  GatedGroupDistribution(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels,
                         std::int64_t se_reduction, Rng& rng);

  // Squeeze-and-excitation channel reweighting; the scale lies in (0, 1).
  Tensor<T> se_block(const Tensor<T>& x) const;
  Gate gate_probability(const Tensor<T>& individual, const Tensor<T>& group) const;
  Tensor<T> operator()(const Tensor<T>& individual, const Tensor<T>& group) const;

  Conv2dLayer<T> reduce;
  LinearLayer<T> se_squeeze;
  LinearLayer<T> se_excite;
  Conv2dLayer<T> bottleneck_in;
  Conv2dLayer<T> bottleneck_out;
};

// X = P * G + (1 - P) * U, elementwise; always within [min(G, U), max(G, U)].
template <typename T>
Tensor<T> gated_combine(const Tensor<T>& probability, const Tensor<T>& group, const Tensor<T>& individual);

extern template class GatedGroupDistribution<float>;
extern template class GatedGroupDistribution<double>;

}  // namespace coad
