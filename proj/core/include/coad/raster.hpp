#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace coad {

// 8-bit raster, channels interleaved row-major (1 = gray, 3 = RGB).
struct Raster {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::int64_t w, std::int64_t h, std::int64_t c)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w * h * c), 0) {}

  std::uint8_t& at(std::int64_t x, std::int64_t y, std::int64_t c = 0) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t at(std::int64_t x, std::int64_t y, std::int64_t c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  bool operator==(const Raster&) const = default;
};

// True when this build can read and write PNG files.
bool png_supported();

// Reads .png, .pgm or .ppm; throws IoError naming the file on failure.
Raster read_raster(const std::filesystem::path& path);
// Format chosen from the extension.
void write_raster(const std::filesystem::path& path, const Raster& raster);

// Extension used for newly written files: ".png" when supported, else ".pgm"/".ppm".
std::string default_raster_extension(std::int64_t channels);

}  // namespace coad
