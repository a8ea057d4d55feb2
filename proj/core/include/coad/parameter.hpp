#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coad/ops.hpp"
#include "coad/tensor.hpp"

namespace coad {

using Rng = std::mt19937_64;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  std::int64_t step_count = 0;
};

/// Owns every trainable tensor of a model under a unique dotted name, in
/// registration order.
template <typename T>
class ParameterSet {
 public:
  // Kaiming (fan-in) normal initialisation; fan_in == 0 means zeros.
  Tensor<T> create(const std::string& name, Shape shape, std::int64_t fan_in, Rng& rng);
  Tensor<T> create_zeros(const std::string& name, Shape shape) { return create(name, std::move(shape), 0, dummy_); }

  std::vector<Parameter<T>>& entries() { return entries_; }
  const std::vector<Parameter<T>>& entries() const { return entries_; }
  const Parameter<T>* find(const std::string& name) const;
  Parameter<T>* find(const std::string& name);
  Tensor<T> at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::int64_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter<T>> entries_;
  Rng dummy_{0};
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight;  // Cout x Cin x k x k
  Tensor<T> bias;    // Cout
  ConvOptions options;

  Conv2dLayer() = default;
  Conv2dLayer(ParameterSet<T>& params, const std::string& name, std::int64_t in_channels, std::int64_t out_channels,
              std::int64_t kernel, ConvOptions opt, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, options); }
};

template <typename T>
struct ConvTranspose2dLayer {
  Tensor<T> weight;  // Cin x Cout x k x k
  Tensor<T> bias;
  int stride = 2;
  int padding = 1;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(ParameterSet<T>& params, const std::string& name, std::int64_t in_channels,
                       std::int64_t out_channels, std::int64_t kernel, int stride, int padding, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return conv_transpose2d(x, weight, bias, stride, padding); }
};

template <typename T>
struct LinearLayer {
  Tensor<T> weight;  // out x in
  Tensor<T> bias;

  LinearLayer() = default;
  LinearLayer(ParameterSet<T>& params, const std::string& name, std::int64_t in_features,
              std::int64_t out_features, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

// Overwrite every value of a parameter tensor (tests and identity setups).
template <typename T>
void fill(Tensor<T>& t, T value) {
  for (auto& v : t.data()) v = value;
}

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace coad
