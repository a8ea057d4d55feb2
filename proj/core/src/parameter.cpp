#include "coad/parameter.hpp"

#include <cmath>

namespace coad {

template <typename T>
Tensor<T> ParameterSet<T>::create(const std::string& name, Shape shape, std::int64_t fan_in, Rng& rng) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor<T> t(std::move(shape), T(0));
  if (fan_in > 0) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  }
  t.set_requires_grad(true);
  Parameter<T> p;
  p.name = name;
  p.tensor = t;
  p.adam_m.assign(t.size(), T(0));
  p.adam_v.assign(t.size(), T(0));
  entries_.push_back(std::move(p));
  return t;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : entries_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : entries_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename T>
Tensor<T> ParameterSet<T>::at(const std::string& name) const {
  const auto* p = find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return p->tensor;
}

template <typename T>
std::vector<std::string> ParameterSet<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& p : entries_) out.push_back(p.name);
  return out;
}

template <typename T>
std::int64_t ParameterSet<T>::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& p : entries_) n += static_cast<std::int64_t>(p.tensor.size());
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : entries_) p.tensor.zero_grad();
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(ParameterSet<T>& params, const std::string& name, std::int64_t in_channels,
                            std::int64_t out_channels, std::int64_t kernel, ConvOptions opt, Rng& rng)
    : options(opt) {
  weight = params.create(name + ".weight", {out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel,
                         rng);
  bias = params.create_zeros(name + ".bias", {out_channels});
}

template <typename T>
ConvTranspose2dLayer<T>::ConvTranspose2dLayer(ParameterSet<T>& params, const std::string& name,
                                              std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                                              int stride_, int padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
  // Each output pixel sees roughly in_channels * (k / stride)^2 inputs.
  const std::int64_t taps = (kernel / stride_) * (kernel / stride_);
  weight = params.create(name + ".weight", {in_channels, out_channels, kernel, kernel},
                         in_channels * std::max<std::int64_t>(taps, 1), rng);
  bias = params.create_zeros(name + ".bias", {out_channels});
}

template <typename T>
LinearLayer<T>::LinearLayer(ParameterSet<T>& params, const std::string& name, std::int64_t in_features,
                            std::int64_t out_features, Rng& rng) {
  weight = params.create(name + ".weight", {out_features, in_features}, in_features, rng);
  bias = params.create_zeros(name + ".bias", {out_features});
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template struct ConvTranspose2dLayer<float>;
template struct ConvTranspose2dLayer<double>;
template struct LinearLayer<float>;
template struct LinearLayer<double>;

}  // namespace coad
