#pragma once

#include <string>

#include "coad/parameter.hpp"

namespace coad {

template <typename T>
struct IntraSaliencyFeature {
  Tensor<T> features;           // U, C x H x W
  Tensor<T> prior;              // E, 1 x H x W, in (0, 1)
  Tensor<T> spatial_attention;  // F~, 1 x H x W, in (0, 1)
  Tensor<T> logits;             // pre-sigmoid head output, reused by the auxiliary branch
};

/// Online intra-saliency guidance.
///
/// The intra-saliency head (3x3 conv C -> C/4, relu, 1x1 conv -> 1) predicts a
/// per-image saliency prior at feature resolution. Channel mean/max maps go
/// through a 2 -> 1 3x3 conv and a sigmoid to give the spatial attention; the
/// attention and prior are fused by a second 2 -> 1 3x3 conv whose sigmoid
/// gates the residual U = F + F * gate.
///
/// With `with_fusion == false` only the head is built (it still serves the
/// auxiliary saliency stream).
template <typename T>
class IntraSaliencyGuidance {
 public:
  // The prior is max-pooled from the head output; the head already runs at
  // feature resolution, so the window is 1.
  static constexpr int kPriorPoolWindow = 1;

  struct HeadOutput {
    Tensor<T> prior;
    Tensor<T> logits;
  };

  IntraSaliencyGuidance() = default;
  IntraSaliencyGuidance(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels, bool with_fusion,
                        Rng& rng);

  HeadOutput head(const Tensor<T>& features) const;
  Tensor<T> spatial_attention(const Tensor<T>& features) const;
  Tensor<T> fuse_prior(const Tensor<T>& features, const Tensor<T>& attention, const Tensor<T>& prior) const;
  IntraSaliencyFeature<T> operator()(const Tensor<T>& features) const;

  bool with_fusion() const { return with_fusion_; }

  Conv2dLayer<T> head_conv;
  Conv2dLayer<T> head_out;
  Conv2dLayer<T> attention_conv;
  Conv2dLayer<T> fusion_conv;

 private:
  bool with_fusion_ = true;
};

extern template class IntraSaliencyGuidance<float>;
extern template class IntraSaliencyGuidance<double>;

}  // namespace coad
