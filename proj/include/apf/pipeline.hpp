#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apf/cache.hpp"
#include "apf/edge_pipeline.hpp"
#include "apf/patcher.hpp"
#include "apf/quadtree.hpp"

namespace apf {

struct APFConfig {
  std::uint64_t split_value = 20;
  // Unset: per image, deepest level whose leaves are still patch_side wide.
  std::optional<int> depth_limit;
  int kernel = 3;
  double sigma = 0.0;
  double t_low = 100.0;
  double t_high = 200.0;
  int patch_side = 4;
  std::uint32_t seq_len = 512;
  std::uint64_t seed = 0;
  // Take kernel and depth limit from resolution_schedule(max(w, h)).
  bool use_schedule = false;

  void validate() const;
};

/// Kernel/depth actually applied to an image of the given size.
struct ResolvedConfig {
  EdgeConfig edge;
  int depth_limit = 0;
};

ResolvedConfig resolve_config(const APFConfig& cfg, int width, int height);

/// splitmix64 of (seed + index); the drop seed of image `index`.
std::uint64_t image_seed(std::uint64_t seed, std::uint64_t index);

struct ImageResult {
  Quadtree tree;
  TokenSequence tokens;
  std::optional<TokenSequence> mask_tokens;
  std::uint64_t leaf_side_sum = 0;
};

/// blur -> canny -> build_quadtree -> extract_patches (+ copatch_mask) ->
/// normalize_sequence for a single image.
ImageResult preprocess_image(const RasterImage& img, const GrayImage* mask,
                             const APFConfig& cfg, std::uint64_t seed);

GrayImage mask_from_raster(const RasterImage& mask);

struct ManifestEntry {
  std::string image;
  std::optional<std::string> mask;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  APFConfig config;

  std::size_t count() const { return entries.size(); }
};

/// One entry per non-empty line: image path, optionally followed by a mask
/// path (whitespace separated). '#' starts a comment. Relative paths are
/// resolved against the manifest's directory.
DatasetManifest read_manifest(const std::string& path, const APFConfig& cfg);

struct ImageStats {
  std::string id;
  std::uint32_t length = 0;  // tokens before pad/drop
  std::uint64_t side_sum = 0;        // summed leaf sides
  std::uint64_t measured_leaves = 0;  // leaves behind side_sum
  std::uint32_t dropped = 0;
  std::optional<double> seconds;

  double avg_patch_size() const {
    return measured_leaves ? static_cast<double>(side_sum) / measured_leaves
                           : 0.0;
  }
};

struct Failure {
  std::string path;
  std::string reason;
};

struct SweepRow {
  std::uint64_t split_value = 0;
  double avg_patch_size = 0.0;
  double avg_length = 0.0;
};

struct StatsReport {
  std::vector<ImageStats> images;
  std::vector<Failure> failures;
  std::map<std::uint32_t, std::uint64_t> patch_size_histogram;  // side -> leaves
  std::vector<SweepRow> sweep;

  double avg_length() const;
  /// Pooled over all leaves of all images.
  double avg_patch_size() const;
  /// Power-of-two buckets: key k counts lengths in [2^k, 2^(k+1)).
  std::map<int, std::uint64_t> length_histogram() const;
};

std::string stats_to_json(const StatsReport& report, bool include_timings = true);

/// Runs every manifest entry and appends records to `cache_path` in
/// manifest order. Unreadable images are skipped and listed as failures;
/// configuration errors abort. `threads` > 1 preprocesses in parallel.
StatsReport preprocess_dataset(const DatasetManifest& manifest,
                               const std::string& cache_path,
                               unsigned threads = 1);

/// Stats over the tokens stored in a cache.
StatsReport stats_report(const std::string& cache_path);
StatsReport stats_report(std::span<const CacheRecord> records);

/// Tokenizes the manifest once per split value (no cache written).
std::vector<SweepRow> split_value_sweep(const DatasetManifest& manifest,
                                        std::span<const std::uint64_t> values);

struct CostEstimate {
  std::uint64_t uniform_length = 0;   // (Z/P)^2
  std::uint64_t uniform_entries = 0;  // (Z/P)^4
  std::optional<std::uint64_t> adaptive_length;
  std::optional<std::uint64_t> adaptive_entries;
  std::optional<double> reduction;  // uniform_entries / adaptive_entries
};

CostEstimate attention_cost(std::uint64_t resolution, std::uint64_t patch,
                            std::optional<std::uint64_t> adaptive_length = {});

inline constexpr std::uint8_t kOverlayColor[3] = {0, 255, 0};

/// RGB copy of `img` with every leaf outlined one pixel wide.
RasterImage render_overlay(const RasterImage& img, const Quadtree& tree);

}  // namespace apf
