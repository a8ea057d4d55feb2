#include "coad/model.hpp"

namespace coad {

std::vector<AblationFlags> AblationFlags::ladder() {
  return {
      {false, false, false, false},
      {true, false, false, false},
      {true, true, false, false},
      {true, true, true, false},
      {true, true, true, true},
  };
}

std::string AblationFlags::label() const {
  if (*this == baseline()) return "Baseline";
  std::string out = "Baseline";
  if (use_oiasg) out += "+OIaSG";
  if (use_gasa) out += "+GASA";
  if (use_ggd) out += "+GGD";
  if (use_gcpd) out += "+GCPD";
  return out;
}

void ModelConfig::validate() const {
  backbone.validate();
  const std::int64_t c = backbone.out_channels;
  if (group_size < 1) throw ConfigError("model.group_size must be >= 1");
  if (blocks < 1 || c % blocks != 0) {
    throw ConfigError("gasa.blocks = " + std::to_string(blocks) + " must divide backbone.channels = " +
                      std::to_string(c));
  }
  if ((c / blocks) % 4 != 0) throw ConfigError("backbone.channels / gasa.blocks must be divisible by 4");
  if (se_reduction < 1 || c % se_reduction != 0) throw ConfigError("ggd.se_reduction must divide backbone.channels");
  if (!(loss_alpha > 0) || !(loss_beta > 0)) throw ConfigError("loss.alpha and loss.beta must be > 0");
  if (aux_batch < 0) throw ConfigError("model.aux_batch must be >= 0");
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig cfg;
  if (name == "tiny") {
    cfg.backbone = {32, 8, 16};
    cfg.blocks = 4;
  } else if (name == "desk") {
    cfg.backbone = {64, 16, 64};
    cfg.blocks = 8;
  } else if (name == "wide") {
    cfg.backbone = {224, 16, 64};
    cfg.blocks = 8;
  } else {
    throw ConfigError("unknown model preset '" + name + "' (expected tiny, desk or wide)");
  }
  return cfg;
}

template <typename T>
ConcatConvAggregator<T>::ConcatConvAggregator(ParameterSet<T>& params, const std::string& prefix,
                                              std::int64_t channels, std::int64_t group_size, Rng& rng)
    : group_size_(group_size) {
  const std::int64_t hidden = std::max<std::int64_t>(channels / 16, 1);
  mix_ = Conv2dLayer<T>(params, prefix + ".mix", group_size * channels, hidden, 3, {1, 1, 1}, rng);
  expand_ = Conv2dLayer<T>(params, prefix + ".expand", hidden, channels, 1, {}, rng);
}

template <typename T>
Tensor<T> ConcatConvAggregator<T>::operator()(const std::vector<Tensor<T>>& features) const {
  if (static_cast<std::int64_t>(features.size()) != group_size_) {
    throw ShapeError("concatenation aggregator is built for groups of " + std::to_string(group_size_) + ", got " +
                     std::to_string(features.size()));
  }
  return expand_(relu(mix_(concat_channels(features))));
}

template <typename T>
DeconvDecoder<T>::DeconvDecoder(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels, Rng& rng) {
  std::int64_t c = channels;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i] = ConvTranspose2dLayer<T>(params, prefix + ".deconv" + std::to_string(i + 1), c, c / 2, 4, 2, 1, rng);
    c /= 2;
  }
  head_ = Conv2dLayer<T>(params, prefix + ".cosh", c, 1, 1, {}, rng);
}

template <typename T>
Tensor<T> DeconvDecoder<T>::operator()(const Tensor<T>& features) const {
  Tensor<T> x = features;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](x);
    if (i + 1 < layers_.size()) x = relu(x);
  }
  return sigmoid(head_(x));
}

template <typename T>
CoADNet<T>::CoADNet(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const std::int64_t c = config_.backbone.out_channels;
  const auto& flags = config_.ablation;
  backbone_ = Backbone<T>(params_, "backbone", config_.backbone, rng);
  guidance_ = IntraSaliencyGuidance<T>(params_, "oiasg", c, flags.use_oiasg, rng);
  if (flags.use_gasa) {
    gasa_.emplace(params_, "gasa", c, config_.blocks, rng);
  } else {
    concat_aggregator_.emplace(params_, "aggregate", c, config_.group_size, rng);
  }
  if (flags.use_ggd) {
    ggd_.emplace(params_, "ggd", c, config_.se_reduction, rng);
  } else {
    concat_fusion_.emplace(params_, "distribute", 2 * c, c, 1, ConvOptions{}, rng);
  }
  if (flags.use_gcpd) {
    gcpd_.emplace(params_, "gcpd", c, rng);
  } else {
    deconv_decoder_.emplace(params_, "decoder", c, rng);
  }
}

template <typename T>
GroupPrediction<T> CoADNet<T>::forward_group(const std::vector<Tensor<T>>& images) const {
  if (images.empty()) throw ShapeError("forward_group: empty image group");
  for (const auto& img : images) {
    if (!img.defined() || img.shape() != images.front().shape()) {
      throw ShapeError("forward_group: all images in a group must share one size; got " +
                       shape_str(images.front().shape()) + " and " +
                       (img.defined() ? shape_str(img.shape()) : std::string("undefined")));
    }
  }
  GroupPrediction<T> out;
  for (const auto& img : images) {
    IntraSaliencyFeature<T> intra = guidance_(backbone_(img));
    out.intra_features.push_back(intra.features);
    out.priors.push_back(intra.prior);
  }

  out.group_semantics = gasa_ ? (*gasa_)(out.intra_features) : (*concat_aggregator_)(out.intra_features);

  for (const auto& u : out.intra_features) {
    out.cosal_features.push_back(ggd_ ? (*ggd_)(u, out.group_semantics)
                                      : (*concat_fusion_)(concat_channels<T>({u, out.group_semantics})));
  }

  if (gcpd_) {
    for (const auto& z : gcpd_->decode(out.cosal_features, &out.group_vectors)) {
      out.maps.push_back(gcpd_->cosh_forward(z));
    }
  } else {
    for (const auto& x : out.cosal_features) out.maps.push_back((*deconv_decoder_)(x));
  }
  return out;
}

template <typename T>
Tensor<T> CoADNet<T>::auxiliary_saliency(const Tensor<T>& image) const {
  auto head = guidance_.head(backbone_(image));
  return sigmoid(bilinear_resize(head.logits, image.dim(1), image.dim(2)));
}

template class ConcatConvAggregator<float>;
template class ConcatConvAggregator<double>;
template class DeconvDecoder<float>;
template class DeconvDecoder<double>;
template class CoADNet<float>;
template class CoADNet<double>;

}  // namespace coad
