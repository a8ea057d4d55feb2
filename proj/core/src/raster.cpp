#include "coad/raster.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "coad/error.hpp"

#ifdef COAD_HAVE_PNG
#include <png.h>
#endif

namespace coad {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

Raster read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  std::int64_t channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError(path.string() + ": not a binary PGM/PPM file");
  }
  std::int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(pnm_token(in));
    h = std::stoll(pnm_token(in));
    maxval = std::stoll(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported extents or depth");
  Raster r(w, h, channels);
  in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(r.pixels.size())) throw IoError(path.string() + ": truncated pixel data");
  return r;
}

void write_pnm(const std::filesystem::path& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path.string());
  out << (r.channels == 1 ? "P5" : "P6") << '\n' << r.width << ' ' << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

#ifdef COAD_HAVE_PNG
Raster read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster r(image.width, image.height, gray ? 1 : 3);
  if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
  return r;
}

void write_png(const std::filesystem::path& path, const Raster& r) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(r.width);
  image.height = static_cast<png_uint_32>(r.height);
  image.format = r.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, r.pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}
#endif

}  // namespace

bool png_supported() {
#ifdef COAD_HAVE_PNG
  return true;
#else
  return false;
#endif
}

std::string default_raster_extension(std::int64_t channels) {
  if (png_supported()) return ".png";
  return channels == 1 ? ".pgm" : ".ppm";
}

Raster read_raster(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
  if (ext == ".png") {
#ifdef COAD_HAVE_PNG
    return read_png(path);
#else
    throw IoError(path.string() + ": PNG support not compiled in");
#endif
  }
  throw IoError(path.string() + ": unsupported raster extension");
}

void write_raster(const std::filesystem::path& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) throw IoError(path.string() + ": only gray or RGB rasters");
  if (raster.pixels.size() != static_cast<std::size_t>(raster.width * raster.height * raster.channels)) {
    throw IoError(path.string() + ": raster buffer does not match its extents");
  }
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".ppm") {
    if ((ext == ".pgm") != (raster.channels == 1)) throw IoError(path.string() + ": channel count does not fit format");
    write_pnm(path, raster);
    return;
  }
  if (ext == ".png") {
#ifdef COAD_HAVE_PNG
    write_png(path, raster);
    return;
#else
    throw IoError(path.string() + ": PNG support not compiled in");
#endif
  }
  throw IoError(path.string() + ": unsupported raster extension");
}

}  // namespace coad
