#pragma once

#include <cstdint>
#include <vector>

#include "apf/image.hpp"

namespace apf {

/// Smoothing and Canny parameters. Thresholds are on the 0-255 gradient
/// magnitude scale even though GrayImage intensities are in [0,1].
struct EdgeConfig {
  int kernel = 3;
  double sigma = 0.0;  // 0 derives sigma from the kernel size
  double t_low = 100.0;
  double t_high = 200.0;

  void validate() const;
};

/// Kernel size and depth limit tuned for an input resolution.
struct ScheduleEntry {
  int kernel = 3;
  int depth_limit = 9;
};

GrayImage to_grayscale(const RasterImage& img);

/// sigma used for a kernel side when EdgeConfig::sigma is 0.
double sigma_for_kernel(int kernel);

/// Normalized 1D Gaussian taps, length `kernel`.
std::vector<double> gaussian_weights(int kernel, double sigma);

/// Separable Gaussian, horizontal pass then vertical, replicated borders.
GrayImage gaussian_blur(const GrayImage& img, const EdgeConfig& cfg);

/// Sobel gradients, non-maximum suppression over four direction bins,
/// double threshold and 8-connected hysteresis. The input is expected to be
/// smoothed already.
EdgeMap canny(const GrayImage& img, const EdgeConfig& cfg);

/// to_grayscale -> gaussian_blur -> canny.
EdgeMap detect_edges(const RasterImage& img, const EdgeConfig& cfg);

/// Table lookup over 512..65536; other resolutions snap to the entry nearest
/// in log2 space, ties going to the smaller resolution.
ScheduleEntry resolution_schedule(std::int64_t resolution);

// Quantized gradient direction used by NMS, exposed for tests.
enum class GradientBin : std::uint8_t { Deg0, Deg45, Deg90, Deg135 };
GradientBin quantize_direction(double gx, double gy);

}  // namespace apf
