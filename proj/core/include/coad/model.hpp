#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coad/backbone.hpp"
#include "coad/gasa.hpp"
#include "coad/gcpd.hpp"
#include "coad/ggd.hpp"
#include "coad/oiasg.hpp"
#include "coad/parameter.hpp"

namespace coad {

// Which of the four group modules are active. A disabled module is replaced
// by its plain counterpart: no prior fusion (U = F), concatenation + 3x3
// convolutions for aggregation, concatenation + 1x1 conv for distribution,
// and three cascaded deconvolutions for decoding.
struct AblationFlags {
  bool use_oiasg = true;
  bool use_gasa = true;
  bool use_ggd = true;
  bool use_gcpd = true;

  static AblationFlags full() { return {}; }
  static AblationFlags baseline() { return {false, false, false, false}; }
  // baseline, +OIaSG, +GASA, +GGD, +GCPD
  static std::vector<AblationFlags> ladder();
  std::string label() const;
  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  BackboneConfig backbone;
  std::int64_t group_size = 5;   // N
  std::int64_t blocks = 8;       // B
  std::int64_t se_reduction = 4;
  AblationFlags ablation;
  double loss_alpha = 0.7;
  double loss_beta = 0.3;
  std::int64_t aux_batch = 8;    // K
  std::uint64_t seed = 1;        // weight initialisation

  void validate() const;

  // Named presets used by the CLI and the shape checks:
  //   tiny  S=32  C=16 B=4 stem 8
  //   desk  S=64  C=64 B=8 stem 16 (default)
  //   wide  S=224 C=64 B=8 stem 16
  static ModelConfig preset(const std::string& name);
};

template <typename T>
struct GroupPrediction {
  std::vector<Tensor<T>> maps;             // M^(n), 1 x S x S in (0, 1)
  std::vector<Tensor<T>> priors;           // E^(n), 1 x H x W
  std::vector<Tensor<T>> intra_features;   // U^(n)
  std::vector<Tensor<T>> cosal_features;   // X^(n)
  Tensor<T> group_semantics;               // G
  std::vector<Tensor<T>> group_vectors;    // y per FD unit (empty without the decoder module)
};

// Order-sensitive stand-in for group aggregation: concatenate all N features
// and run 3x3 conv (N*C -> C/16), relu, 1x1 conv (C/16 -> C).
template <typename T>
class ConcatConvAggregator {
 public:
  ConcatConvAggregator() = default;
  ConcatConvAggregator(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels,
                       std::int64_t group_size, Rng& rng);
  Tensor<T> operator()(const std::vector<Tensor<T>>& features) const;

 private:
  std::int64_t group_size_ = 0;
  Conv2dLayer<T> mix_;
  Conv2dLayer<T> expand_;
};

// Three stride-2 deconvolutions (C -> C/2 -> C/4 -> C/8) with relus in
// between, then the same 1x1 + sigmoid head.
template <typename T>
class DeconvDecoder {
 public:
  DeconvDecoder() = default;
  DeconvDecoder(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& features) const;

 private:
  std::array<ConvTranspose2dLayer<T>, 3> layers_;
  Conv2dLayer<T> head_;
};

/// The full co-saliency network with its auxiliary single-image branch.
template <typename T>
class CoADNet {
 public:
  explicit CoADNet(const ModelConfig& config);
  CoADNet(const CoADNet&) = delete;
  CoADNet& operator=(const CoADNet&) = delete;
  CoADNet(CoADNet&&) noexcept = default;
  CoADNet& operator=(CoADNet&&) noexcept = default;

  GroupPrediction<T> forward_group(const std::vector<Tensor<T>>& images) const;
  // A^(k): head logits upsampled to the input extent, then sigmoid.
  Tensor<T> auxiliary_saliency(const Tensor<T>& image) const;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

  const Backbone<T>& backbone() const { return backbone_; }
  const IntraSaliencyGuidance<T>& guidance() const { return guidance_; }

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
  Backbone<T> backbone_;
  IntraSaliencyGuidance<T> guidance_;
  std::optional<GroupAttentionAggregation<T>> gasa_;
  std::optional<ConcatConvAggregator<T>> concat_aggregator_;
  std::optional<GatedGroupDistribution<T>> ggd_;
  std::optional<Conv2dLayer<T>> concat_fusion_;
  std::optional<ConsistencyDecoder<T>> gcpd_;
  std::optional<DeconvDecoder<T>> deconv_decoder_;
};

extern template class CoADNet<float>;
extern template class CoADNet<double>;

}  // namespace coad
