#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coad/dataio.hpp"
#include "coad/metrics.hpp"
#include "coad/model.hpp"

namespace coad {

// Predicts every image of a query group at model resolution. The group is
// cut into sub-groups of the model's group size exactly as in training;
// padding members are run but their maps discarded.
template <typename T>
std::vector<Tensor<T>> predict_group(const CoADNet<T>& model, const ImageGroup& group, std::uint64_t seed);

// Maps are restored to each image's original extents and quantised to 8
// bits before scoring, i.e. the numbers describe what `infer` writes.
// Groups without ground truth raise IoError.
template <typename T>
MetricsReport evaluate(const CoADNet<T>& model, const std::vector<ImageGroup>& groups, std::uint64_t seed,
                       const std::filesystem::path& maps_dir = {});

}  // namespace coad
