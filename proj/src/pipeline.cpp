#include "apf/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <variant>

#include "apf/cache.hpp"
#include "apf/png_io.hpp"
#include "json.hpp"

namespace apf {

void APFConfig::validate() const {
  if (depth_limit && *depth_limit < 0)
    fail(ErrorKind::Config, "depth limit must be >= 0");
  EdgeConfig{kernel, sigma, t_low, t_high}.validate();
  if (patch_side < 2 || !std::has_single_bit(static_cast<unsigned>(patch_side)))
    fail(ErrorKind::Config, "patch side must be a power of two >= 2, got " +
                                std::to_string(patch_side));
  if (seq_len < 1) fail(ErrorKind::Config, "sequence length must be >= 1");
}

ResolvedConfig resolve_config(const APFConfig& cfg, int width, int height) {
  cfg.validate();
  ResolvedConfig out;
  out.edge = EdgeConfig{cfg.kernel, cfg.sigma, cfg.t_low, cfg.t_high};
  const auto side = static_cast<std::uint32_t>(std::max(width, height));
  const std::uint32_t grid = next_pow2(side);
  const int grid_log2 = std::bit_width(grid) - 1;
  const int patch_log2 = std::bit_width(static_cast<unsigned>(cfg.patch_side)) - 1;
  if (cfg.use_schedule) {
    const auto entry = resolution_schedule(side);
    out.edge.kernel = entry.kernel;
    out.depth_limit = entry.depth_limit;
  } else {
    out.depth_limit = cfg.depth_limit.value_or(std::max(0, grid_log2 - patch_log2));
  }
  const std::uint32_t min_leaf = grid >> effective_depth(grid, out.depth_limit);
  if (min_leaf < static_cast<std::uint32_t>(cfg.patch_side))
    fail(ErrorKind::Config,
         "patch side " + std::to_string(cfg.patch_side) +
             " exceeds the minimum leaf side " + std::to_string(min_leaf) +
             " for a " + std::to_string(width) + "x" + std::to_string(height) +
             " image at depth limit " + std::to_string(out.depth_limit));
  return out;
}

std::uint64_t image_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + index + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

GrayImage mask_from_raster(const RasterImage& mask) {
  return to_grayscale(mask);
}

ImageResult preprocess_image(const RasterImage& img, const GrayImage* mask,
                             const APFConfig& cfg, std::uint64_t seed) {
  const auto resolved = resolve_config(cfg, img.width, img.height);
  if (mask && (mask->width != img.width || mask->height != img.height))
    fail(ErrorKind::InvalidArgument, "mask dimensions differ from the image");

  const EdgeMap edges = detect_edges(img, resolved.edge);
  Quadtree tree = build_quadtree(edges, cfg.split_value, resolved.depth_limit);
  const auto leaves = ordered_leaves(tree);

  std::uint64_t side_sum = 0;
  for (const auto& l : leaves) side_sum += l.region.size;

  auto tokens = extract_patches(img, leaves, cfg.patch_side);
  auto seq = normalize_sequence(std::move(tokens),
                                geometry_of(tree, cfg.patch_side, img.channels),
                                cfg.seq_len, seed);
  std::optional<TokenSequence> mask_seq;
  if (mask) {
    // Same seed and count, so the same survivors as the image tokens.
    mask_seq = normalize_sequence(copatch_mask(*mask, tree, cfg.patch_side),
                                  geometry_of(tree, cfg.patch_side, 1),
                                  cfg.seq_len, seed);
  }
  return ImageResult{std::move(tree), std::move(seq), std::move(mask_seq),
                     side_sum};
}

DatasetManifest read_manifest(const std::string& path, const APFConfig& cfg) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp.string() : (base / fp).string();
  };

  DatasetManifest manifest;
  manifest.config = cfg;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string image, mask, extra;
    if (!(fields >> image)) continue;
    ManifestEntry e;
    e.image = resolve(image);
    if (fields >> mask) e.mask = resolve(mask);
    if (fields >> extra)
      fail(ErrorKind::Config, "manifest line has more than two paths: " + line);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

double StatsReport::avg_length() const {
  if (images.empty()) return 0.0;
  std::uint64_t total = 0;
  for (const auto& s : images) total += s.length;
  return static_cast<double>(total) / images.size();
}

double StatsReport::avg_patch_size() const {
  std::uint64_t sides = 0, leaves = 0;
  for (const auto& s : images) {
    sides += s.side_sum;
    leaves += s.measured_leaves;
  }
  return leaves ? static_cast<double>(sides) / leaves : 0.0;
}

std::map<int, std::uint64_t> StatsReport::length_histogram() const {
  std::map<int, std::uint64_t> h;
  for (const auto& s : images)
    if (s.length > 0) ++h[std::bit_width(s.length) - 1];
  return h;
}

std::string stats_to_json(const StatsReport& report, bool include_timings) {
  using json = nlohmann::ordered_json;
  json j;
  j["image_count"] = report.images.size();
  j["failed_count"] = report.failures.size();
  j["avg_length"] = report.avg_length();
  j["avg_patch_size"] = report.avg_patch_size();
  std::uint64_t dropped = 0;
  for (const auto& s : report.images) dropped += s.dropped;
  j["total_dropped"] = dropped;

  auto lengths = json::array();
  for (const auto& [k, count] : report.length_histogram())
    lengths.push_back({{"min", std::uint64_t{1} << k},
                       {"max", (std::uint64_t{2} << k) - 1},
                       {"count", count}});
  j["length_histogram"] = std::move(lengths);

  auto sizes = json::array();
  for (const auto& [side, count] : report.patch_size_histogram)
    sizes.push_back({{"size", side}, {"count", count}});
  j["patch_size_histogram"] = std::move(sizes);

  auto images = json::array();
  double total_seconds = 0.0;
  for (const auto& s : report.images) {
    json e;
    e["id"] = s.id;
    e["length"] = s.length;
    e["avg_patch_size"] = s.avg_patch_size();
    e["dropped"] = s.dropped;
    if (include_timings && s.seconds) {
      e["seconds"] = *s.seconds;
      total_seconds += *s.seconds;
    }
    images.push_back(std::move(e));
  }
  if (include_timings) j["total_seconds"] = total_seconds;
  j["images"] = std::move(images);

  auto failures = json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"path", f.path}, {"reason", f.reason}});
  j["failures"] = std::move(failures);

  if (!report.sweep.empty()) {
    auto sweep = json::array();
    for (const auto& r : report.sweep)
      sweep.push_back({{"split_value", r.split_value},
                       {"avg_patch_size", r.avg_patch_size},
                       {"avg_length", r.avg_length}});
    j["sweep"] = std::move(sweep);
  }
  return j.dump(2);
}

namespace {

struct Processed {
  CacheRecord record;
  ImageStats stats;
  std::map<std::uint32_t, std::uint64_t> sides;
};

using Outcome = std::variant<Processed, Failure>;

Outcome process_entry(const ManifestEntry& entry, const APFConfig& cfg,
                      std::uint64_t index) {
  const auto start = std::chrono::steady_clock::now();
  RasterImage img;
  std::optional<GrayImage> mask;
  try {
    img = read_png(entry.image);
    if (entry.mask) mask = mask_from_raster(read_png(*entry.mask));
  } catch (const Error& e) {
    return Failure{entry.image, e.what()};
  }

  try {
    auto result = preprocess_image(img, mask ? &*mask : nullptr, cfg,
                                   image_seed(cfg.seed, index));
    Processed p;
    p.stats.id = entry.image;
    p.stats.length = result.tokens.real_count;
    p.stats.side_sum = result.leaf_side_sum;
    p.stats.measured_leaves = result.tokens.real_count;
    p.stats.dropped = result.tokens.dropped;
    for (const auto& leaf : ordered_leaves(result.tree)) ++p.sides[leaf.region.size];
    p.record = CacheRecord{entry.image, std::move(result.tokens),
                           std::move(result.mask_tokens)};
    p.stats.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    return p;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    return Failure{entry.image, e.what()};
  }
}

}  // namespace

StatsReport preprocess_dataset(const DatasetManifest& manifest,
                               const std::string& cache_path, unsigned threads) {
  manifest.config.validate();
  threads = std::max(1u, threads);
  CacheWriter writer(cache_path);
  StatsReport report;

  const auto consume = [&](Outcome outcome) {
    if (auto* f = std::get_if<Failure>(&outcome)) {
      report.failures.push_back(std::move(*f));
      return;
    }
    auto& p = std::get<Processed>(outcome);
    writer.write(p.record);
    for (const auto& [side, n] : p.sides) report.patch_size_histogram[side] += n;
    report.images.push_back(std::move(p.stats));
  };

  const auto& entries = manifest.entries;
  for (std::size_t begin = 0; begin < entries.size(); begin += threads) {
    const std::size_t end = std::min(entries.size(), begin + threads);
    if (threads == 1) {
      consume(process_entry(entries[begin], manifest.config, begin));
      continue;
    }
    std::vector<std::future<Outcome>> batch;
    for (std::size_t i = begin; i < end; ++i)
      batch.push_back(std::async(std::launch::async, process_entry,
                                 std::cref(entries[i]), std::cref(manifest.config),
                                 std::uint64_t{i}));
    // Results are written in manifest order.
    for (auto& f : batch) consume(f.get());
  }
  writer.close();
  return report;
}

StatsReport stats_report(std::span<const CacheRecord> records) {
  StatsReport report;
  for (const auto& r : records) {
    ImageStats s;
    s.id = r.id;
    s.length = r.tokens.real_count;
    s.dropped = r.tokens.dropped;
    for (const auto& t : r.tokens.tokens) {
      if (t.is_pad) continue;
      s.side_sum += t.size;
      ++s.measured_leaves;
      ++report.patch_size_histogram[t.size];
    }
    report.images.push_back(std::move(s));
  }
  return report;
}

StatsReport stats_report(const std::string& cache_path) {
  const CacheReader reader(cache_path);
  const auto records = reader.read_all();
  return stats_report(records);
}

std::vector<SweepRow> split_value_sweep(const DatasetManifest& manifest,
                                        std::span<const std::uint64_t> values) {
  manifest.config.validate();
  std::vector<RasterImage> images;
  for (const auto& e : manifest.entries) {
    try {
      images.push_back(read_png(e.image));
    } catch (const Error&) {
      // unreadable inputs do not contribute to the sweep
    }
  }
  std::vector<SweepRow> rows;
  for (const auto v : values) {
    APFConfig cfg = manifest.config;
    cfg.split_value = v;
    std::uint64_t lengths = 0, sides = 0, n = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto resolved = resolve_config(cfg, images[i].width, images[i].height);
      const auto tree = build_quadtree(detect_edges(images[i], resolved.edge), v,
                                       resolved.depth_limit);
      const auto leaves = ordered_leaves(tree);
      lengths += leaves.size();
      for (const auto& l : leaves) sides += l.region.size;
      ++n;
    }
    SweepRow row;
    row.split_value = v;
    row.avg_length = n ? double(lengths) / n : 0.0;
    row.avg_patch_size = lengths ? double(sides) / lengths : 0.0;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a)
    fail(ErrorKind::InvalidArgument, "attention entry count overflows 64 bits");
  return a * b;
}

}  // namespace

CostEstimate attention_cost(std::uint64_t resolution, std::uint64_t patch,
                            std::optional<std::uint64_t> adaptive_length) {
  if (patch == 0 || resolution == 0 || resolution % patch != 0)
    fail(ErrorKind::InvalidArgument, "patch " + std::to_string(patch) +
                                         " must divide resolution " +
                                         std::to_string(resolution));
  const std::uint64_t per_side = resolution / patch;
  CostEstimate c;
  c.uniform_length = checked_mul(per_side, per_side);
  c.uniform_entries = checked_mul(c.uniform_length, c.uniform_length);
  if (adaptive_length) {
    if (*adaptive_length == 0)
      fail(ErrorKind::InvalidArgument, "adaptive sequence length must be >= 1");
    c.adaptive_length = *adaptive_length;
    c.adaptive_entries = checked_mul(*adaptive_length, *adaptive_length);
    c.reduction = double(c.uniform_entries) / double(*c.adaptive_entries);
  }
  return c;
}

RasterImage render_overlay(const RasterImage& img, const Quadtree& tree) {
  RasterImage out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = img.at(x, y, img.channels == 3 ? c : 0);

  const auto paint = [&](int x, int y) {
    for (int c = 0; c < 3; ++c) out.at(x, y, c) = kOverlayColor[c];
  };
  for (const Leaf& leaf : ordered_leaves(tree)) {
    const Region& r = leaf.region;
    if (r.x >= std::uint32_t(img.width) || r.y >= std::uint32_t(img.height))
      continue;
    // Outline of the leaf clipped to the image.
    const int x0 = int(r.x), y0 = int(r.y);
    const int x1 = int(std::min<std::uint64_t>(std::uint64_t{r.x} + r.size, img.width)) - 1;
    const int y1 = int(std::min<std::uint64_t>(std::uint64_t{r.y} + r.size, img.height)) - 1;
    for (int x = x0; x <= x1; ++x) {
      paint(x, y0);
      paint(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
      paint(x0, y);
      paint(x1, y);
    }
  }
  return out;
}

}  // namespace apf
