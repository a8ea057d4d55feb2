#include "coad/backbone.hpp"

namespace coad {

void BackboneConfig::validate() const {
  if (input_size < kDownsample || input_size % kDownsample != 0) {
    throw ConfigError("backbone.input_size must be a positive multiple of 8, got " + std::to_string(input_size));
  }
  if (stem_channels < 1) throw ConfigError("backbone.stem_channels must be >= 1");
  if (out_channels < 8 || out_channels % 8 != 0) {
    throw ConfigError("backbone.channels must be a positive multiple of 8, got " + std::to_string(out_channels));
  }
}

template <typename T>
Backbone<T>::Backbone(ParameterSet<T>& params, const std::string& prefix, const BackboneConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const std::array<std::int64_t, 3> widths{config.stem_channels, 2 * config.stem_channels, config.out_channels};
  std::int64_t in = 3;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    const std::string stage = prefix + ".stage" + std::to_string(s + 1);
    convs_[2 * s] = Conv2dLayer<T>(params, stage + ".conv1", in, widths[s], 3, {1, 1, 1}, rng);
    convs_[2 * s + 1] = Conv2dLayer<T>(params, stage + ".conv2", widths[s], widths[s], 3, {2, 1, 1}, rng);
    in = widths[s];
  }
}

template <typename T>
Tensor<T> Backbone<T>::operator()(const Tensor<T>& image) const {
  if (!image.defined() || image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("backbone: expected a 3 x S x S image, got " +
                     (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
  }
  if (image.dim(1) % BackboneConfig::kDownsample != 0 || image.dim(2) % BackboneConfig::kDownsample != 0) {
    throw ConfigError("backbone: image extent " + shape_str(image.shape()) + " is not divisible by 8");
  }
  Tensor<T> x = image;
  for (const auto& conv : convs_) x = relu(conv(x));
  return x;
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace coad
