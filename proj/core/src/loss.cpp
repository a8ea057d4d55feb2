#include "coad/loss.hpp"

#include "coad/error.hpp"
#include "coad/ops.hpp"

namespace coad {

template <typename T>
Tensor<T> mean_bce(const std::vector<Tensor<T>>& predictions, const std::vector<Tensor<T>>& targets, double eps) {
  if (predictions.empty()) throw ShapeError("mean_bce: no predictions");
  if (predictions.size() != targets.size()) {
    throw ShapeError("mean_bce: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(targets.size()) + " masks");
  }
  Tensor<T> acc;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    Tensor<T> term = bce_mean(predictions[i], targets[i], eps);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, T(1) / static_cast<T>(predictions.size()));
}

template <typename T>
LossTerms<T> joint_loss(const std::vector<Tensor<T>>& cosal_maps, const std::vector<Tensor<T>>& cosal_masks,
                        const std::vector<Tensor<T>>& aux_maps, const std::vector<Tensor<T>>& aux_masks, double alpha,
                        double beta) {
  if (!(alpha > 0) || !(beta > 0)) throw ConfigError("joint_loss: alpha and beta must be > 0");
  if (aux_maps.size() != aux_masks.size()) {
    throw ShapeError("joint_loss: " + std::to_string(aux_maps.size()) + " auxiliary maps vs " +
                     std::to_string(aux_masks.size()) + " masks");
  }
  LossTerms<T> out;
  out.cosaliency = mean_bce(cosal_maps, cosal_masks);
  out.total = scale(out.cosaliency, static_cast<T>(alpha));
  if (!aux_maps.empty()) {
    out.saliency = mean_bce(aux_maps, aux_masks);
    out.total = add(out.total, scale(out.saliency, static_cast<T>(beta)));
  }
  return out;
}

template Tensor<float> mean_bce(const std::vector<Tensor<float>>&, const std::vector<Tensor<float>>&, double);
template Tensor<double> mean_bce(const std::vector<Tensor<double>>&, const std::vector<Tensor<double>>&, double);
template LossTerms<float> joint_loss(const std::vector<Tensor<float>>&, const std::vector<Tensor<float>>&,
                                     const std::vector<Tensor<float>>&, const std::vector<Tensor<float>>&, double,
                                     double);
template LossTerms<double> joint_loss(const std::vector<Tensor<double>>&, const std::vector<Tensor<double>>&,
                                      const std::vector<Tensor<double>>&, const std::vector<Tensor<double>>&, double,
                                      double);

}  // namespace coad
