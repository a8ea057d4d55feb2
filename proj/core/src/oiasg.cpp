#include "coad/oiasg.hpp"

namespace coad {

template <typename T>
IntraSaliencyGuidance<T>::IntraSaliencyGuidance(ParameterSet<T>& params, const std::string& prefix,
                                                std::int64_t channels, bool with_fusion, Rng& rng)
    : with_fusion_(with_fusion) {
  if (channels < 4 || channels % 4 != 0) {
    throw ConfigError("intra-saliency head needs channels divisible by 4, got " + std::to_string(channels));
  }
  head_conv = Conv2dLayer<T>(params, prefix + ".iash.conv", channels, channels / 4, 3, {1, 1, 1}, rng);
  head_out = Conv2dLayer<T>(params, prefix + ".iash.out", channels / 4, 1, 1, {}, rng);
  if (with_fusion_) {
    attention_conv = Conv2dLayer<T>(params, prefix + ".attention", 2, 1, 3, {1, 1, 1}, rng);
    fusion_conv = Conv2dLayer<T>(params, prefix + ".fusion", 2, 1, 3, {1, 1, 1}, rng);
  }
}

template <typename T>
typename IntraSaliencyGuidance<T>::HeadOutput IntraSaliencyGuidance<T>::head(const Tensor<T>& features) const {
  Tensor<T> logits = head_out(relu(head_conv(features)));
  Tensor<T> prior = reduce_pool(sigmoid(logits), PoolKind::kSpatialMax, kPriorPoolWindow, kPriorPoolWindow);
  return {prior, logits};
}

template <typename T>
Tensor<T> IntraSaliencyGuidance<T>::spatial_attention(const Tensor<T>& features) const {
  if (!with_fusion_) throw ConfigError("spatial attention requested from a head-only guidance module");
  Tensor<T> avg = reduce_pool(features, PoolKind::kChannelMean);
  Tensor<T> mx = reduce_pool(features, PoolKind::kChannelMax);
  return sigmoid(attention_conv(concat_channels<T>({avg, mx})));
}

template <typename T>
Tensor<T> IntraSaliencyGuidance<T>::fuse_prior(const Tensor<T>& features, const Tensor<T>& attention,
                                               const Tensor<T>& prior) const {
  if (!with_fusion_) throw ConfigError("prior fusion requested from a head-only guidance module");
  if (attention.shape() != prior.shape() || attention.rank() != 3 || attention.dim(0) != 1 ||
      attention.dim(1) != features.dim(1) || attention.dim(2) != features.dim(2)) {
    throw ShapeError("fuse_prior: planes " + shape_str(attention.shape()) + " / " + shape_str(prior.shape()) +
                     " do not match features " + shape_str(features.shape()));
  }
  Tensor<T> gate = sigmoid(fusion_conv(concat_channels<T>({attention, prior})));
  return add(features, broadcast_mul_plane(features, gate));
}

template <typename T>
IntraSaliencyFeature<T> IntraSaliencyGuidance<T>::operator()(const Tensor<T>& features) const {
  auto [prior, logits] = head(features);
  if (!with_fusion_) return {features, prior, Tensor<T>(), logits};
  Tensor<T> attention = spatial_attention(features);
  return {fuse_prior(features, attention, prior), prior, attention, logits};
}

template class IntraSaliencyGuidance<float>;
template class IntraSaliencyGuidance<double>;

}  // namespace coad
