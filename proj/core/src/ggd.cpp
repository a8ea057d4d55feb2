#include "coad/ggd.hpp"

namespace coad {

template <typename T>
GatedGroupDistribution<T>::GatedGroupDistribution(ParameterSet<T>& params, const std::string& prefix,
                                                  std::int64_t channels, std::int64_t se_reduction, Rng& rng) {
  if (se_reduction < 1 || channels % se_reduction != 0) {
    throw ConfigError("ggd.se_reduction = " + std::to_string(se_reduction) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  if (channels % 4 != 0) throw ConfigError("gate bottleneck needs channels divisible by 4");
  reduce = Conv2dLayer<T>(params, prefix + ".reduce", 2 * channels, channels, 1, {}, rng);
  se_squeeze = LinearLayer<T>(params, prefix + ".se.squeeze", channels, channels / se_reduction, rng);
  se_excite = LinearLayer<T>(params, prefix + ".se.excite", channels / se_reduction, channels, rng);
  bottleneck_in = Conv2dLayer<T>(params, prefix + ".gate.in", channels, channels / 4, 1, {}, rng);
  bottleneck_out = Conv2dLayer<T>(params, prefix + ".gate.out", channels / 4, channels, 1, {}, rng);
}

template <typename T>
Tensor<T> GatedGroupDistribution<T>::se_block(const Tensor<T>& x) const {
  Tensor<T> squeezed = reduce_pool(x, PoolKind::kSpatialGlobalMean);
  Tensor<T> weights = sigmoid(se_excite(relu(se_squeeze(squeezed))));
  return broadcast_mul_channelvec(x, weights);
}

template <typename T>
typename GatedGroupDistribution<T>::Gate GatedGroupDistribution<T>::gate_probability(const Tensor<T>& individual,
                                                                                    const Tensor<T>& group) const {
  if (individual.shape() != group.shape()) {
    throw ShapeError("ggd: individual " + shape_str(individual.shape()) + " vs group " + shape_str(group.shape()));
  }
  Tensor<T> fused = reduce(concat_channels<T>({individual, group}));
  Tensor<T> p = sigmoid(bottleneck_out(relu(bottleneck_in(se_block(fused)))));
  return {p, fused};
}

template <typename T>
Tensor<T> GatedGroupDistribution<T>::operator()(const Tensor<T>& individual, const Tensor<T>& group) const {
  return gated_combine(gate_probability(individual, group).probability, group, individual);
}

template <typename T>
Tensor<T> gated_combine(const Tensor<T>& probability, const Tensor<T>& group, const Tensor<T>& individual) {
  return lerp(individual, group, probability);
}

template class GatedGroupDistribution<float>;
template class GatedGroupDistribution<double>;
template Tensor<float> gated_combine(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> gated_combine(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace coad
