#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coad/raster.hpp"
#include "coad/tensor.hpp"

namespace coad {

enum class ShapeCategory { kDisc = 0, kSquare, kTriangle, kRing, kCross };
inline constexpr int kShapeCategoryCount = 5;
const char* category_name(ShapeCategory c);

struct ImageGroup {
  std::string group_id;
  std::vector<std::string> names;
  std::vector<Raster> images;       // RGB
  std::vector<Raster> cosal_masks;  // T_c, gray 0/255
  std::vector<Raster> sal_masks;    // T_s, gray 0/255; may be empty for loaded data
  int target_category = -1;         // -1 when unknown
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
};

struct SynthSpec {
  std::int64_t canvas = 64;
  std::int64_t n_groups = 16;
  std::int64_t group_size = 5;
  std::int64_t max_distractors = 2;
  double noise_sigma = 0.04;
  double min_area = 0.02;  // fraction of the canvas covered by the co-saliency mask
  double max_area = 0.30;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<ImageGroup> generate(const SynthSpec& spec);

// <dir>/<group_id>/<name>.<ext>, <name>_gt.<ext>, <name>_sal.<ext>, plus
// <dir>/manifest.txt listing one group directory per line.
void write_dataset(const std::vector<ImageGroup>& groups, const std::filesystem::path& dir);

enum class MaskPolicy { kOptional, kRequired };

// Reads every <name>.<ext> in `dir` whose stem has no _gt/_sal suffix, with
// its sibling masks. Rasters keep their on-disk extents.
ImageGroup load_group(const std::filesystem::path& dir, MaskPolicy masks = MaskPolicy::kOptional);
// Groups listed in <dir>/manifest.txt, or every subdirectory in name order.
std::vector<ImageGroup> load_dataset(const std::filesystem::path& dir, MaskPolicy masks = MaskPolicy::kOptional);

// Pixel values scaled by 1/255 and bilinearly resized to size x size.
template <typename T>
Tensor<T> image_tensor(const Raster& image, std::int64_t size);
// Gray mask resized to size x size and binarised at 0.5.
template <typename T>
Tensor<T> mask_tensor(const Raster& mask, std::int64_t size);

// 1 x h x w map in [0, 1] restored to width x height and quantised as round(255 p).
template <typename T>
Raster map_raster(const Tensor<T>& map, std::int64_t width, std::int64_t height);
// Writes <dir>/<name>.<ext> for every map, restored to the extents of `reference`.
template <typename T>
void write_maps(const std::vector<Tensor<T>>& maps, const std::vector<std::string>& names,
                const std::vector<Raster>& reference, const std::filesystem::path& dir);

}  // namespace coad
