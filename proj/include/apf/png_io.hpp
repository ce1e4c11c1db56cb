#pragma once

#include <string>

#include "apf/image.hpp"

namespace apf {

// Decodes 8-bit gray or RGB. Palette images are expanded to RGB, 16-bit
// samples are reduced to 8 bits and alpha is discarded.
RasterImage read_png(const std::string& path);

void write_png(const std::string& path, const RasterImage& img);
void write_png(const std::string& path, const GrayImage& img);
// 1 bit per pixel.
void write_png(const std::string& path, const EdgeMap& edges);

}  // namespace apf
