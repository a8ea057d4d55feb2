#include "coad/optim.hpp"

#include <cmath>

namespace coad {

template <typename T>
void adam_step(std::vector<Parameter<T>>& params, const AdamOptions& o) {
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    p.step_count += 1;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(p.step_count));
    auto value = p.tensor.data();
    auto grad = p.tensor.mutable_grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = static_cast<double>(grad[i]) + o.weight_decay * static_cast<double>(value[i]);
      const double m = o.beta1 * static_cast<double>(p.adam_m[i]) + (1.0 - o.beta1) * g;
      const double v = o.beta2 * static_cast<double>(p.adam_v[i]) + (1.0 - o.beta2) * g * g;
      p.adam_m[i] = static_cast<T>(m);
      p.adam_v[i] = static_cast<T>(v);
      const double update = o.lr * (m / bc1) / (std::sqrt(v / bc2) + o.eps);
      value[i] = static_cast<T>(static_cast<double>(value[i]) - update);
      grad[i] = T(0);
    }
  }
}

double halving_lr(double lr0, std::int64_t halve_every, std::int64_t iteration) {
  if (halve_every <= 0) return lr0;
  return lr0 * std::ldexp(1.0, -static_cast<int>(iteration / halve_every));
}

template void adam_step<float>(std::vector<Parameter<float>>&, const AdamOptions&);
template void adam_step<double>(std::vector<Parameter<double>>&, const AdamOptions&);

}  // namespace coad
