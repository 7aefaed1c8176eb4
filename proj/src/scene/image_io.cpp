#include "gsedit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "gsedit/errors.hpp"

namespace gsedit {

void write_pfm(const ImageBuffer& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw ContractViolation("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << '\n'
      << image.width << ' ' << image.height << '\n'
      << "-1.0" << '\n';
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = image.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(image.data.data() + row * y),
              static_cast<std::streamsize>(row * sizeof(float)));
  if (!out) throw DataError("short write to " + path);
}

ImageBuffer read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || w < 0 || h < 0)
    throw ParseError("malformed PFM header in " + path, static_cast<std::size_t>(std::max<std::streamoff>(0, in.tellg())));
  in.get();  // single whitespace before raster
  if (scale >= 0.0) throw ParseError("big-endian PFM not supported: " + path, static_cast<std::size_t>(in.tellg()));
  const int channels = magic == "PF" ? 3 : 1;
  ImageBuffer img(w, h, channels);
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  const auto header_end = static_cast<std::size_t>(in.tellg());
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(img.data.data() + row * y), static_cast<std::streamsize>(row * sizeof(float)));
    if (!in) throw ParseError("truncated PFM raster in " + path, header_end + row * sizeof(float) * (h - 1 - y));
  }
  return img;
}

void write_png(const ImageBuffer& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw ContractViolation("PNG export supports 1 or 3 channels");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw DataError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  std::vector<png_byte> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), [](float v) {
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    return static_cast<png_byte>(std::lround(c * 255.0f));
  });
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) png_write_row(png, bytes.data() + stride * y);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string view_keyword_path(const std::string& dir, int view_id, const std::string& keyword) {
  return dir + "/" + std::to_string(view_id) + "_" + keyword + ".pfm";
}

}  // namespace gsedit
