#pragma once

#include <array>
#include <string>

#include "coad/parameter.hpp"

namespace coad {

// Shared feature extractor: three stages of [3x3 conv, relu, 3x3 conv
// stride 2, relu]. Stage widths are stem, 2 * stem, out_channels; the
// overall downsampling factor is always 8.
struct BackboneConfig {
  std::int64_t input_size = 64;
  std::int64_t stem_channels = 16;
  std::int64_t out_channels = 64;

  static constexpr std::int64_t kDownsample = 8;
  std::int64_t feature_size() const { return input_size / kDownsample; }
  void validate() const;
};

template <typename T>
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParameterSet<T>& params, const std::string& prefix, const BackboneConfig& config, Rng& rng);

  // image: 3 x S x S with S divisible by 8 -> C x S/8 x S/8.
  Tensor<T> operator()(const Tensor<T>& image) const;

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  std::array<Conv2dLayer<T>, 6> convs_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace coad
