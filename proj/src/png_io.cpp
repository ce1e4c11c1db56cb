#include "apf/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace apf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  return f;
}

void write_rows(const std::string& path, int width, int height, int color_type,
                int bit_depth, const std::vector<std::uint8_t>& packed,
                std::size_t stride) {
  auto f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::Io, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "failed writing " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, packed.data() + static_cast<std::size_t>(y) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RasterImage read_png(const std::string& path) {
  auto f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    fail(ErrorKind::Corrupt, path + " is not a PNG file");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::Io, "png_create_info_struct failed");
  }

  RasterImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Corrupt, "failed decoding " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Corrupt, path + ": unsupported channel layout");
  }
  img = RasterImage(width, height, channels);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = img.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::string& path, const RasterImage& img) {
  write_rows(path, img.width, img.height,
             img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8,
             img.data, static_cast<std::size_t>(img.width) * img.channels);
}

void write_png(const std::string& path, const GrayImage& img) {
  std::vector<std::uint8_t> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  write_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, bytes,
             img.width);
}

void write_png(const std::string& path, const EdgeMap& edges) {
  const std::size_t stride = (static_cast<std::size_t>(edges.width) + 7) / 8;
  std::vector<std::uint8_t> packed(stride * edges.height, 0);
  for (int y = 0; y < edges.height; ++y)
    for (int x = 0; x < edges.width; ++x)
      if (edges.at(x, y))
        packed[y * stride + x / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
  write_rows(path, edges.width, edges.height, PNG_COLOR_TYPE_GRAY, 1, packed,
             stride);
}

}  // namespace apf
