#include "coad/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>

#include "coad/error.hpp"
#include "coad/ops.hpp"

namespace coad {
namespace {

namespace fs = std::filesystem;

// Generation uses its own uniform and normal draws so that datasets are
// byte-identical across standard library implementations.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::int64_t index(std::int64_t n) { return static_cast<std::int64_t>(engine_() % static_cast<std::uint64_t>(n)); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2 * std::numbers::pi * u2);
    has_spare_ = true;
    return mag * std::cos(2 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Color {
  double r, g, b;
};

Color hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double k6 = h * 6.0;
  const int sector = static_cast<int>(k6) % 6;
  const double f = k6 - std::floor(k6);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double hue_distance(double a, double b) {
  const double d = std::fabs(a - b);
  return std::min(d, 1.0 - d);
}

struct ShapeInstance {
  ShapeCategory category;
  double cx, cy, radius, angle;

  bool contains(double x, double y) const {
    const double dx0 = x - cx, dy0 = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = c * dx0 + s * dy0, dy = -s * dx0 + c * dy0;
    const double r = radius;
    switch (category) {
      case ShapeCategory::kDisc: return dx * dx + dy * dy <= r * r;
      case ShapeCategory::kSquare: return std::fabs(dx) <= 0.8 * r && std::fabs(dy) <= 0.8 * r;
      case ShapeCategory::kRing: {
        const double d2 = dx * dx + dy * dy;
        return d2 <= r * r && d2 >= 0.3 * r * r;
      }
      case ShapeCategory::kCross:
        return (std::fabs(dx) <= r && std::fabs(dy) <= 0.3 * r) || (std::fabs(dy) <= r && std::fabs(dx) <= 0.3 * r);
      case ShapeCategory::kTriangle: {
        // equilateral, circumradius r, apex up in the local frame
        const double h = 1.5 * r;
        const double top = -r, bottom = 0.5 * r;
        if (dy < top || dy > bottom) return false;
        const double half = (dy - top) / h * (std::sqrt(3.0) * r / 2.0);
        return std::fabs(dx) <= half;
      }
    }
    return false;
  }
};

std::vector<std::uint8_t> rasterize(const ShapeInstance& shape, std::int64_t size) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(size * size), 0);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      if (shape.contains(x + 0.5, y + 0.5)) mask[static_cast<std::size_t>(y * size + x)] = 1;
    }
  }
  return mask;
}

std::int64_t count(const std::vector<std::uint8_t>& mask) {
  return std::count(mask.begin(), mask.end(), std::uint8_t{1});
}

bool overlaps(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) return true;
  }
  return false;
}

ShapeInstance random_shape(SynthRng& rng, ShapeCategory category, std::int64_t size, double rmin, double rmax) {
  ShapeInstance s{};
  s.category = category;
  s.radius = rng.uniform(rmin, rmax) * static_cast<double>(size);
  s.cx = rng.uniform(s.radius, static_cast<double>(size) - s.radius);
  s.cy = rng.uniform(s.radius, static_cast<double>(size) - s.radius);
  s.angle = rng.uniform(0, 2 * std::numbers::pi);
  return s;
}

// Smooth grayish field from a coarse random grid, bilinearly upsampled.
std::vector<Color> background(SynthRng& rng, std::int64_t size) {
  constexpr int kGrid = 4;
  std::array<Color, kGrid * kGrid> grid;
  for (auto& c : grid) {
    const double base = rng.uniform(0.2, 0.6);
    c = {base + rng.uniform(-0.08, 0.08), base + rng.uniform(-0.08, 0.08), base + rng.uniform(-0.08, 0.08)};
  }
  std::vector<Color> out(static_cast<std::size_t>(size * size));
  for (std::int64_t y = 0; y < size; ++y) {
    const double gy = (y + 0.5) / size * (kGrid - 1);
    const int y0 = std::min(static_cast<int>(gy), kGrid - 2);
    const double fy = gy - y0;
    for (std::int64_t x = 0; x < size; ++x) {
      const double gx = (x + 0.5) / size * (kGrid - 1);
      const int x0 = std::min(static_cast<int>(gx), kGrid - 2);
      const double fx = gx - x0;
      auto blend = [&](auto member) {
        const double a = grid[y0 * kGrid + x0].*member, b = grid[y0 * kGrid + x0 + 1].*member;
        const double c = grid[(y0 + 1) * kGrid + x0].*member, d = grid[(y0 + 1) * kGrid + x0 + 1].*member;
        return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
      };
      out[static_cast<std::size_t>(y * size + x)] = {blend(&Color::r), blend(&Color::g), blend(&Color::b)};
    }
  }
  return out;
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void paint(std::vector<Color>& canvas, const std::vector<std::uint8_t>& mask, Color color, SynthRng& rng) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double shade = 1.0 + rng.uniform(-0.05, 0.05);
    canvas[i] = {color.r * shade, color.g * shade, color.b * shade};
  }
}

Raster mask_to_raster(const std::vector<std::uint8_t>& mask, std::int64_t size) {
  Raster r(size, size, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) r.pixels[i] = mask[i] ? 255 : 0;
  return r;
}

ImageGroup generate_group(const SynthSpec& spec, std::int64_t index) {
  const std::int64_t size = spec.canvas;
  const double total = static_cast<double>(size * size);
  ImageGroup group;
  group.seed = splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(index)));
  SynthRng rng(group.seed);
  char id[32];
  std::snprintf(id, sizeof(id), "g%04lld", static_cast<long long>(index));
  group.group_id = id;
  group.target_category = static_cast<int>(rng.index(kShapeCategoryCount));
  const auto target = static_cast<ShapeCategory>(group.target_category);
  const double target_hue = rng.uniform();
  const std::int64_t clean_image = rng.index(spec.group_size);

  // radius bounds that keep a disc between the area limits
  const double rmin = std::sqrt(spec.min_area / std::numbers::pi);
  const double rmax = std::min(0.45, std::sqrt(spec.max_area / std::numbers::pi) * 1.2);

  for (std::int64_t n = 0; n < spec.group_size; ++n) {
    std::vector<std::uint8_t> target_mask;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw Error("generate: cannot place a target within the area band");
      target_mask = rasterize(random_shape(rng, target, size, rmin, rmax), size);
      const double area = count(target_mask) / total;
      if (area >= spec.min_area && area <= spec.max_area) break;
    }

    std::vector<Color> canvas = background(rng, size);
    std::vector<std::uint8_t> sal = target_mask;
    const std::int64_t n_distractors = n == clean_image ? 0 : rng.index(spec.max_distractors + 1);
    for (std::int64_t d = 0; d < n_distractors; ++d) {
      auto category = static_cast<ShapeCategory>((group.target_category + 1 + rng.index(kShapeCategoryCount - 1)) %
                                                 kShapeCategoryCount);
      double hue = rng.uniform();
      while (hue_distance(hue, target_hue) < 0.2) hue = rng.uniform();
      const Color color = hsv(hue, rng.uniform(0.6, 0.95), rng.uniform(0.7, 1.0));
      for (int attempt = 0; attempt < 30; ++attempt) {
        auto mask = rasterize(random_shape(rng, category, size, rmin, rmax), size);
        if (count(mask) == 0 || overlaps(mask, sal)) continue;
        if ((count(sal) + count(mask)) / total > spec.max_area) continue;
        paint(canvas, mask, color, rng);
        for (std::size_t i = 0; i < sal.size(); ++i) sal[i] |= mask[i];
        break;
      }
    }
    const Color target_color =
        hsv(target_hue + rng.uniform(-0.03, 0.03), rng.uniform(0.6, 0.95), rng.uniform(0.7, 1.0));
    paint(canvas, target_mask, target_color, rng);

    Raster image(size, size, 3);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      image.pixels[3 * i + 0] = quantize(canvas[i].r + spec.noise_sigma * rng.normal());
      image.pixels[3 * i + 1] = quantize(canvas[i].g + spec.noise_sigma * rng.normal());
      image.pixels[3 * i + 2] = quantize(canvas[i].b + spec.noise_sigma * rng.normal());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img%02lld", static_cast<long long>(n));
    group.names.emplace_back(name);
    group.images.push_back(std::move(image));
    group.cosal_masks.push_back(mask_to_raster(target_mask, size));
    group.sal_masks.push_back(mask_to_raster(sal, size));
  }
  return group;
}

bool has_raster_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Finds <dir>/<stem><suffix>.{png,pgm,ppm}.
std::optional<fs::path> find_sibling(const fs::path& dir, const std::string& stem, const std::string& suffix) {
  for (const char* ext : {".png", ".pgm", ".ppm"}) {
    fs::path p = dir / (stem + suffix + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

Raster to_gray(Raster r) {
  if (r.channels == 1) return r;
  Raster g(r.width, r.height, 1);
  for (std::int64_t i = 0; i < r.width * r.height; ++i) {
    int acc = 0;
    for (std::int64_t c = 0; c < r.channels; ++c) acc += r.pixels[static_cast<std::size_t>(i * r.channels + c)];
    g.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((acc + r.channels / 2) / r.channels);
  }
  return g;
}

Raster to_rgb(Raster r) {
  if (r.channels == 3) return r;
  Raster c(r.width, r.height, 3);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    c.pixels[3 * i] = c.pixels[3 * i + 1] = c.pixels[3 * i + 2] = r.pixels[i];
  }
  return c;
}

template <typename T>
Tensor<T> raster_planes(const Raster& r) {
  Tensor<T> t({r.channels, r.height, r.width});
  auto d = t.data();
  const std::int64_t plane = r.width * r.height;
  for (std::int64_t c = 0; c < r.channels; ++c) {
    for (std::int64_t i = 0; i < plane; ++i) {
      d[static_cast<std::size_t>(c * plane + i)] =
          static_cast<T>(r.pixels[static_cast<std::size_t>(i * r.channels + c)]) / T(255);
    }
  }
  return t;
}

}  // namespace

const char* category_name(ShapeCategory c) {
  switch (c) {
    case ShapeCategory::kDisc: return "disc";
    case ShapeCategory::kSquare: return "square";
    case ShapeCategory::kTriangle: return "triangle";
    case ShapeCategory::kRing: return "ring";
    case ShapeCategory::kCross: return "cross";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (canvas < 16 || canvas % 8 != 0) throw ConfigError("synth.canvas must be a multiple of 8 and >= 16");
  if (group_size < 2) throw ConfigError("synth.group_size must be >= 2");
  if (n_groups < 1) throw ConfigError("synth.n_groups must be >= 1");
  if (max_distractors < 0 || max_distractors > 2) throw ConfigError("synth.max_distractors must be in [0, 2]");
  if (!(noise_sigma >= 0)) throw ConfigError("synth.noise_sigma must be >= 0");
  if (!(min_area > 0) || !(max_area <= 0.5) || !(min_area < max_area)) {
    throw ConfigError("synth area band must satisfy 0 < min_area < max_area <= 0.5");
  }
}

std::vector<ImageGroup> generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<ImageGroup> groups;
  groups.reserve(static_cast<std::size_t>(spec.n_groups));
  for (std::int64_t g = 0; g < spec.n_groups; ++g) groups.push_back(generate_group(spec, g));
  return groups;
}

void write_dataset(const std::vector<ImageGroup>& groups, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot create " + (dir / "manifest.txt").string());
  for (const auto& g : groups) {
    const fs::path gdir = dir / g.group_id;
    fs::create_directories(gdir, ec);
    if (ec) throw IoError("cannot create " + gdir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < g.size(); ++i) {
      write_raster(gdir / (g.names[i] + default_raster_extension(3)), g.images[i]);
      if (i < g.cosal_masks.size()) write_raster(gdir / (g.names[i] + "_gt" + default_raster_extension(1)), g.cosal_masks[i]);
      if (i < g.sal_masks.size()) write_raster(gdir / (g.names[i] + "_sal" + default_raster_extension(1)), g.sal_masks[i]);
    }
    if (g.target_category >= 0) {
      std::ofstream meta(gdir / "meta.txt");
      meta << "category=" << category_name(static_cast<ShapeCategory>(g.target_category)) << "\nseed=" << g.seed << '\n';
    }
    manifest << g.group_id << '\n';
  }
  if (!manifest) throw IoError("write failed: " + (dir / "manifest.txt").string());
}

ImageGroup load_group(const fs::path& dir, MaskPolicy masks) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_raster_extension(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (ends_with(stem, "_gt") || ends_with(stem, "_sal")) continue;
    images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw IoError("no images in " + dir.string());

  ImageGroup group;
  group.group_id = dir.filename().string();
  if (group.group_id.empty()) group.group_id = dir.parent_path().filename().string();
  bool all_sal = true;
  std::vector<Raster> sal;
  for (const auto& path : images) {
    const std::string stem = path.stem().string();
    group.names.push_back(stem);
    group.images.push_back(to_rgb(read_raster(path)));
    if (auto gt = find_sibling(dir, stem, "_gt")) {
      group.cosal_masks.push_back(to_gray(read_raster(*gt)));
    } else if (masks == MaskPolicy::kRequired) {
      throw IoError("missing ground truth for " + path.string());
    }
    if (auto s = find_sibling(dir, stem, "_sal")) {
      sal.push_back(to_gray(read_raster(*s)));
    } else {
      all_sal = false;
    }
  }
  if (!group.cosal_masks.empty() && group.cosal_masks.size() != group.images.size()) {
    // partial ground truth is only acceptable when masks are optional; drop it
    group.cosal_masks.clear();
  }
  if (all_sal) group.sal_masks = std::move(sal);
  for (std::size_t i = 0; i < group.cosal_masks.size(); ++i) {
    const auto& im = group.images[i];
    const auto& gt = group.cosal_masks[i];
    if (gt.width != im.width || gt.height != im.height) {
      throw IoError("ground truth extents differ from image: " + (dir / group.names[i]).string());
    }
  }
  return group;
}

std::vector<ImageGroup> load_dataset(const fs::path& dir, MaskPolicy masks) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> group_dirs;
  const fs::path manifest = dir / "manifest.txt";
  if (fs::is_regular_file(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      group_dirs.push_back(dir / line);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory()) group_dirs.push_back(entry.path());
    }
    std::sort(group_dirs.begin(), group_dirs.end());
  }
  std::vector<ImageGroup> groups;
  for (const auto& g : group_dirs) groups.push_back(load_group(g, masks));
  return groups;
}

template <typename T>
Tensor<T> image_tensor(const Raster& image, std::int64_t size) {
  Tensor<T> t = raster_planes<T>(to_rgb(image));
  if (image.width == size && image.height == size) return t;
  NoGradGuard guard;
  return bilinear_resize(t, size, size);
}

template <typename T>
Tensor<T> mask_tensor(const Raster& mask, std::int64_t size) {
  Tensor<T> t = raster_planes<T>(to_gray(mask));
  if (mask.width != size || mask.height != size) {
    NoGradGuard guard;
    t = bilinear_resize(t, size, size);
  }
  for (auto& v : t.data()) v = v >= T(0.5) ? T(1) : T(0);
  return t;
}

template <typename T>
Raster map_raster(const Tensor<T>& map, std::int64_t width, std::int64_t height) {
  if (map.rank() != 3 || map.dim(0) != 1) throw ShapeError("map_raster: expected 1 x H x W, got " + shape_str(map.shape()));
  Tensor<T> restored = map;
  if (map.dim(1) != height || map.dim(2) != width) {
    NoGradGuard guard;
    restored = bilinear_resize(map, height, width);
  }
  Raster r(width, height, 1);
  const auto d = restored.data();
  for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = quantize(static_cast<double>(d[i]));
  return r;
}

template <typename T>
void write_maps(const std::vector<Tensor<T>>& maps, const std::vector<std::string>& names,
                const std::vector<Raster>& reference, const fs::path& dir) {
  if (maps.size() != names.size() || maps.size() != reference.size()) {
    throw ShapeError("write_maps: maps, names and reference rasters must have equal counts");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    write_raster(dir / (names[i] + default_raster_extension(1)),
                 map_raster(maps[i], reference[i].width, reference[i].height));
  }
}

#define COAD_INSTANTIATE_DATAIO(T)                                                                      \
  template Tensor<T> image_tensor<T>(const Raster&, std::int64_t);                                      \
  template Tensor<T> mask_tensor<T>(const Raster&, std::int64_t);                                       \
  template Raster map_raster(const Tensor<T>&, std::int64_t, std::int64_t);                             \
  template void write_maps(const std::vector<Tensor<T>>&, const std::vector<std::string>&,              \
                           const std::vector<Raster>&, const fs::path&);

COAD_INSTANTIATE_DATAIO(float)
COAD_INSTANTIATE_DATAIO(double)

}  // namespace coad
