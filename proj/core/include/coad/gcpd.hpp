#pragma once

#include <array>
#include <string>
#include <vector>

#include "coad/parameter.hpp"

namespace coad {

// Y (N x C_d) -> y (C_d): per column, softmax over the N rows, then the
// softmax-weighted row sum. Row order does not change the result.
template <typename T>
Tensor<T> group_vector(const Tensor<T>& rows);

/// One feature-decoding unit: per image X^ = deconv4x4/s2(conv1x1(X)) with
/// C -> C/2 channels and doubled extent, x^ = GAP(X^); the group vector y
/// is pooled from the stacked x^, and the output is X^ scaled per channel by
/// a shared MLP([x^; y]) (2C_d -> C_d, relu, C_d -> C_d, sigmoid).
template <typename T>
class FeatureDecodingUnit {
 public:
  FeatureDecodingUnit() = default;
  FeatureDecodingUnit(ParameterSet<T>& params, const std::string& prefix, std::int64_t in_channels, Rng& rng);

  // Optionally reports the group vector y through `group_out`.
  std::vector<Tensor<T>> operator()(const std::vector<Tensor<T>>& inputs, Tensor<T>* group_out = nullptr) const;

  std::int64_t out_channels() const { return out_channels_; }

  Conv2dLayer<T> reduce;
  ConvTranspose2dLayer<T> upsample;
  LinearLayer<T> mlp_hidden;
  LinearLayer<T> mlp_out;

 private:
  std::int64_t out_channels_ = 0;
};

// Three cascaded FD units (C x H x W -> C/8 x 8H x 8W) and the co-saliency
// head (1x1 conv to one channel + sigmoid).
template <typename T>
class ConsistencyDecoder {
 public:
  static constexpr int kUnits = 3;

  ConsistencyDecoder() = default;
  ConsistencyDecoder(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels, Rng& rng);

  std::vector<Tensor<T>> decode(const std::vector<Tensor<T>>& features,
                                std::vector<Tensor<T>>* group_vectors = nullptr) const;
  Tensor<T> cosh_forward(const Tensor<T>& decoded) const;

  std::array<FeatureDecodingUnit<T>, kUnits>& units() { return units_; }
  const std::array<FeatureDecodingUnit<T>, kUnits>& units() const { return units_; }
  Conv2dLayer<T> head;

 private:
  std::array<FeatureDecodingUnit<T>, kUnits> units_;
};

extern template class FeatureDecodingUnit<float>;
extern template class FeatureDecodingUnit<double>;
extern template class ConsistencyDecoder<float>;
extern template class ConsistencyDecoder<double>;

}  // namespace coad
