#include "apf/edge_pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace apf {

void EdgeConfig::validate() const {
  if (kernel < 1 || kernel % 2 == 0)
    fail(ErrorKind::Config,
         "Gaussian kernel must be odd and >= 1, got " + std::to_string(kernel));
  if (!(sigma >= 0.0))
    fail(ErrorKind::Config, "sigma must be >= 0");
  if (!(t_low >= 0.0) || !(t_low <= t_high))
    fail(ErrorKind::Config, "Canny thresholds need 0 <= t_low <= t_high, got " +
                                std::to_string(t_low) + ", " +
                                std::to_string(t_high));
}

GrayImage to_grayscale(const RasterImage& img) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorKind::InvalidArgument,
         "unsupported channel count " + std::to_string(img.channels));
  GrayImage out(img.width, img.height);
  const std::size_t n = out.data.size();
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out.data[i] = img.data[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* px = &img.data[i * 3];
      const double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      out.data[i] = std::min(1.0, luma / 255.0);
    }
  }
  return out;
}

double sigma_for_kernel(int kernel) {
  return 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> gaussian_weights(int kernel, double sigma) {
  const int radius = kernel / 2;
  std::vector<double> w(kernel);
  double sum = 0.0;
  for (int i = 0; i < kernel; ++i) {
    const double d = i - radius;
    w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

namespace {

// One 1D pass. Writing the sum as center + sum(w * (x - center)) keeps flat
// regions bit-exact even though the taps only sum to 1 up to rounding.
GrayImage convolve(const GrayImage& in, const std::vector<double>& w,
                   bool horizontal) {
  const int radius = static_cast<int>(w.size()) / 2;
  GrayImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double center = in.at(x, y);
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const double v =
            horizontal ? in.at(std::clamp(x + i, 0, in.width - 1), y)
                       : in.at(x, std::clamp(y + i, 0, in.height - 1));
        acc += w[i + radius] * (v - center);
      }
      out.at(x, y) = std::clamp(center + acc, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, const EdgeConfig& cfg) {
  cfg.validate();
  if (cfg.kernel > std::min(img.width, img.height))
    fail(ErrorKind::InvalidArgument,
         "kernel " + std::to_string(cfg.kernel) + " exceeds image " +
             std::to_string(img.width) + "x" + std::to_string(img.height));
  if (cfg.kernel == 1) return img;
  const double sigma = cfg.sigma > 0.0 ? cfg.sigma : sigma_for_kernel(cfg.kernel);
  const auto w = gaussian_weights(cfg.kernel, sigma);
  return convolve(convolve(img, w, true), w, false);
}

GradientBin quantize_direction(double gx, double gy) {
  // tan(22.5deg) and tan(67.5deg)
  constexpr double kTan22 = 0.41421356237309503;
  constexpr double kTan67 = 2.4142135623730949;
  const double ax = std::abs(gx);
  const double ay = std::abs(gy);
  if (ay <= ax * kTan22) return GradientBin::Deg0;
  if (ay > ax * kTan67) return GradientBin::Deg90;
  return (gx > 0) == (gy > 0) ? GradientBin::Deg45 : GradientBin::Deg135;
}

EdgeMap canny(const GrayImage& img, const EdgeConfig& cfg) {
  cfg.validate();
  const int w = img.width;
  const int h = img.height;
  const auto px = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };

  std::vector<double> mag(static_cast<std::size_t>(w) * h);
  std::vector<GradientBin> dir(mag.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::sqrt(gx * gx + gy * gy);
      dir[i] = quantize_direction(gx, gy);
    }
  }

  const double low = cfg.t_low / 255.0;
  const double high = cfg.t_high / 255.0;
  const auto mag_at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(mag.size(), 0);
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m < low || m == 0.0) continue;
      int dx = 1, dy = 0;
      switch (dir[i]) {
        case GradientBin::Deg0: dx = 1; dy = 0; break;
        case GradientBin::Deg45: dx = 1; dy = 1; break;
        case GradientBin::Deg90: dx = 0; dy = 1; break;
        case GradientBin::Deg135: dx = -1; dy = 1; break;
      }
      // Ties resolve toward the pixel before the edge, so plateaus stay 1 wide.
      if (!(m > mag_at(x - dx, y - dy) && m >= mag_at(x + dx, y + dy))) continue;
      if (m >= high) {
        cls[i] = 2;
        stack.push_back(i);
      } else {
        cls[i] = 1;
      }
    }
  }

  EdgeMap edges(w, h);
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (edges.bits[i]) continue;
    edges.bits[i] = 1;
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (cls[j] != 0 && !edges.bits[j]) stack.push_back(j);
      }
    }
  }
  return edges;
}

EdgeMap detect_edges(const RasterImage& img, const EdgeConfig& cfg) {
  return canny(gaussian_blur(to_grayscale(img), cfg), cfg);
}

ScheduleEntry resolution_schedule(std::int64_t resolution) {
  struct Row {
    std::int64_t resolution;
    ScheduleEntry entry;
  };
  static constexpr std::array<Row, 7> kTable = {{
      {512, {3, 9}},
      {1024, {3, 10}},
      {4096, {5, 12}},
      {8192, {7, 13}},
      {16384, {9, 14}},
      {32768, {11, 15}},
      {65536, {13, 16}},
  }};
  if (resolution < 1)
    fail(ErrorKind::InvalidArgument, "resolution must be >= 1");
  const double target = std::log2(static_cast<double>(resolution));
  const Row* best = &kTable.front();
  double best_distance = std::abs(target - std::log2(double(best->resolution)));
  for (const auto& row : kTable) {
    const double d = std::abs(target - std::log2(double(row.resolution)));
    if (d < best_distance) {
      best = &row;
      best_distance = d;
    }
  }
  return best->entry;
}

}  // namespace apf
