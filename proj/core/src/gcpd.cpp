#include "coad/gcpd.hpp"

namespace coad {

template <typename T>
Tensor<T> group_vector(const Tensor<T>& rows) {
  if (!rows.defined() || rows.rank() != 2) {
    throw ShapeError("group_vector: expected an N x C_d matrix");
  }
  return softmax_weighted_sum(rows);
}

template <typename T>
FeatureDecodingUnit<T>::FeatureDecodingUnit(ParameterSet<T>& params, const std::string& prefix,
                                            std::int64_t in_channels, Rng& rng) {
  if (in_channels < 2 || in_channels % 2 != 0) {
    throw ConfigError("FD unit needs an even channel count, got " + std::to_string(in_channels));
  }
  out_channels_ = in_channels / 2;
  reduce = Conv2dLayer<T>(params, prefix + ".reduce", in_channels, out_channels_, 1, {}, rng);
  upsample = ConvTranspose2dLayer<T>(params, prefix + ".deconv", out_channels_, out_channels_, 4, 2, 1, rng);
  mlp_hidden = LinearLayer<T>(params, prefix + ".mlp.hidden", 2 * out_channels_, out_channels_, rng);
  mlp_out = LinearLayer<T>(params, prefix + ".mlp.out", out_channels_, out_channels_, rng);
}

template <typename T>
std::vector<Tensor<T>> FeatureDecodingUnit<T>::operator()(const std::vector<Tensor<T>>& inputs,
                                                          Tensor<T>* group_out) const {
  if (inputs.empty()) throw ShapeError("FD unit: empty group");
  std::vector<Tensor<T>> upsampled, pooled, rows;
  for (const auto& x : inputs) {
    Tensor<T> up = upsample(reduce(x));
    Tensor<T> gap = reduce_pool(up, PoolKind::kSpatialGlobalMean);
    rows.push_back(reshape(gap, {1, out_channels_}));
    upsampled.push_back(std::move(up));
    pooled.push_back(std::move(gap));
  }
  Tensor<T> y = group_vector(concat(rows));
  if (group_out) *group_out = y;
  std::vector<Tensor<T>> outputs;
  outputs.reserve(inputs.size());
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    Tensor<T> gain = sigmoid(mlp_out(relu(mlp_hidden(concat<T>({pooled[n], y})))));
    outputs.push_back(broadcast_mul_channelvec(upsampled[n], gain));
  }
  return outputs;
}

template <typename T>
ConsistencyDecoder<T>::ConsistencyDecoder(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels,
                                          Rng& rng) {
  if (channels % 8 != 0) throw ConfigError("decoder needs channels divisible by 8, got " + std::to_string(channels));
  std::int64_t c = channels;
  for (int u = 0; u < kUnits; ++u) {
    units_[u] = FeatureDecodingUnit<T>(params, prefix + ".fd" + std::to_string(u + 1), c, rng);
    c /= 2;
  }
  head = Conv2dLayer<T>(params, prefix + ".cosh", c, 1, 1, {}, rng);
}

template <typename T>
std::vector<Tensor<T>> ConsistencyDecoder<T>::decode(const std::vector<Tensor<T>>& features,
                                                     std::vector<Tensor<T>>* group_vectors) const {
  std::vector<Tensor<T>> x = features;
  for (const auto& unit : units_) {
    Tensor<T> y;
    x = unit(x, &y);
    if (group_vectors) group_vectors->push_back(y);
  }
  return x;
}

template <typename T>
Tensor<T> ConsistencyDecoder<T>::cosh_forward(const Tensor<T>& decoded) const {
  return sigmoid(head(decoded));
}

template class FeatureDecodingUnit<float>;
template class FeatureDecodingUnit<double>;
template class ConsistencyDecoder<float>;
template class ConsistencyDecoder<double>;
template Tensor<float> group_vector(const Tensor<float>&);
template Tensor<double> group_vector(const Tensor<double>&);

}  // namespace coad
