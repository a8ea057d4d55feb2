#include "coad/inference.hpp"

#include "coad/error.hpp"
#include "coad/train.hpp"

namespace coad {

template <typename T>
std::vector<Tensor<T>> predict_group(const CoADNet<T>& model, const ImageGroup& group, std::uint64_t seed) {
  const std::int64_t size = model.config().backbone.input_size;
  const auto count = static_cast<std::int64_t>(group.size());
  if (count == 0) throw IoError("group " + group.group_id + " has no images");
  std::vector<Tensor<T>> inputs;
  for (const auto& im : group.images) inputs.push_back(image_tensor<T>(im, size));

  NoGradGuard guard;
  Rng rng(seed);
  std::vector<Tensor<T>> maps(static_cast<std::size_t>(count));
  const std::int64_t n = model.config().group_size;
  std::int64_t begin = 0;
  for (const auto& chunk : form_subgroups(count, n, rng)) {
    std::vector<Tensor<T>> images;
    for (auto idx : chunk) images.push_back(inputs[static_cast<std::size_t>(idx)]);
    auto pred = model.forward_group(images);
    const std::int64_t real = std::min(n, count - begin);
    for (std::int64_t i = 0; i < real; ++i) maps[static_cast<std::size_t>(chunk[static_cast<std::size_t>(i)])] = pred.maps[static_cast<std::size_t>(i)];
    begin += n;
  }
  return maps;
}

template <typename T>
MetricsReport evaluate(const CoADNet<T>& model, const std::vector<ImageGroup>& groups, std::uint64_t seed,
                       const std::filesystem::path& maps_dir) {
  if (groups.empty()) throw IoError("evaluate: empty dataset");
  MetricsAccumulator acc;
  for (const auto& g : groups) {
    if (g.cosal_masks.size() != g.size()) throw IoError("group " + g.group_id + " has no ground truth");
    auto maps = predict_group(model, g, seed);
    if (!maps_dir.empty()) write_maps(maps, g.names, g.images, maps_dir / g.group_id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Raster pred = map_raster(maps[i], g.images[i].width, g.images[i].height);
      acc.add(plane_from_raster(pred), binary_plane_from_raster(g.cosal_masks[i]));
    }
  }
  return acc.report();
}

template std::vector<Tensor<float>> predict_group(const CoADNet<float>&, const ImageGroup&, std::uint64_t);
template std::vector<Tensor<double>> predict_group(const CoADNet<double>&, const ImageGroup&, std::uint64_t);
template MetricsReport evaluate(const CoADNet<float>&, const std::vector<ImageGroup>&, std::uint64_t,
                                const std::filesystem::path&);
template MetricsReport evaluate(const CoADNet<double>&, const std::vector<ImageGroup>&, std::uint64_t,
                                const std::filesystem::path&);

}  // namespace coad
