#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "apf/error.hpp"

namespace apf {

/// 8-bit raster, row-major, channels interleaved.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  RasterImage() = default;
  RasterImage(int w, int h, int c);
  RasterImage(int w, int h, int c, std::vector<std::uint8_t> pixels);

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Single-channel intensities in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0);

  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

/// Binary mask, 1 marks an edge pixel.
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  EdgeMap() = default;
  EdgeMap(int w, int h);

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool on = true) {
    bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
  }
  std::size_t count() const;
};

}  // namespace apf
