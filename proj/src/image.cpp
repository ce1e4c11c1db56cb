#include "apf/image.hpp"

#include <algorithm>
#include <string>

namespace apf {

namespace {

void check_dims(int w, int h) {
  if (w < 1 || h < 1)
    fail(ErrorKind::InvalidArgument, "image dimensions must be >= 1, got " +
                                         std::to_string(w) + "x" +
                                         std::to_string(h));
}

}  // namespace

RasterImage::RasterImage(int w, int h, int c)
    : width(w), height(h), channels(c) {
  check_dims(w, h);
  if (c != 1 && c != 3)
    fail(ErrorKind::InvalidArgument,
         "unsupported channel count " + std::to_string(c));
  data.assign(static_cast<std::size_t>(w) * h * c, 0);
}

RasterImage::RasterImage(int w, int h, int c, std::vector<std::uint8_t> pixels)
    : RasterImage(w, h, c) {
  if (pixels.size() != data.size())
    fail(ErrorKind::InvalidArgument, "pixel buffer has " +
                                         std::to_string(pixels.size()) +
                                         " bytes, expected " +
                                         std::to_string(data.size()));
  data = std::move(pixels);
}

GrayImage::GrayImage(int w, int h, double fill) : width(w), height(h) {
  check_dims(w, h);
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

EdgeMap::EdgeMap(int w, int h) : width(w), height(h) {
  check_dims(w, h);
  bits.assign(static_cast<std::size_t>(w) * h, 0);
}

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(
      std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

}  // namespace apf
