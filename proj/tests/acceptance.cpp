// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `--write-golden PATH` regenerates the golden cache file.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "apf/pipeline.hpp"
#include "apf/png_io.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace apf;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

// Leaf count of the circle-outline demo, from the brute-force reference.
constexpr std::size_t kCircleLeaves = 712;

Outcome partition_suite() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> dim(1, 256);
  std::uniform_int_distribution<int> vdist(0, 64);
  std::uniform_int_distribution<int> hdist(0, 9);
  const int maps = 1200;
  for (int i = 0; i < maps; ++i) {
    const auto e = oracle::random_edges(rng, dim(rng), dim(rng));
    const auto tree = build_quadtree(e, vdist(rng), hdist(rng));
    const auto report = verify_partition(tree, &e);
    if (!report.ok()) {
      const auto& c = !report.tiling.passed ? report.tiling
                      : !report.criterion.passed ? report.criterion
                                                 : report.morton;
      return {false, "map " + std::to_string(i) + ": " + c.counterexample};
    }
  }
  return {true, std::to_string(maps) + " maps, tiling/criterion/Morton all pass"};
}

Outcome exhaustive_small() {
  std::mt19937_64 rng(10000);
  const int maps = 10000;
  for (int i = 0; i < maps; ++i) {
    EdgeMap e(8, 8);
    // Vary density so every depth is reached.
    std::uint64_t word = rng();
    for (int k = 0; k < i % 3; ++k) word &= rng();
    for (int b = 0; b < 64; ++b) e.bits[b] = (word >> b) & 1;
    const std::uint64_t v = i % 5;
    const int h = (i / 5) % 4;
    const auto leaves = ordered_leaves(build_quadtree(e, v, h));
    const auto ref = oracle::reference_leaves(e, v, h);
    bool same = leaves.size() == ref.size();
    for (std::size_t k = 0; same && k < ref.size(); ++k)
      same = leaves[k].region == Region{ref[k].x, ref[k].y, ref[k].size} &&
             leaves[k].depth == ref[k].depth && leaves[k].edge_count == ref[k].count;
    if (!same) return {false, "map " + std::to_string(i) + " differs from the reference"};
  }
  return {true, std::to_string(maps) + " seeded 8x8 maps match the reference"};
}

GrayImage random_binary_mask(std::mt19937_64& rng, int side) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GrayImage m(side, side);
  const int blobs = 1 + int(unit(rng) * 6);
  for (int b = 0; b < blobs; ++b) {
    const double cx = unit(rng) * side, cy = unit(rng) * side;
    const double r = 0.5 + unit(rng) * side / 3.0;
    const bool square = unit(rng) < 0.5;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const bool in = square ? std::abs(x - cx) <= r && std::abs(y - cy) <= r
                               : std::hypot(x - cx, y - cy) <= r;
        if (in) m.at(x, y) = 1.0 - m.at(x, y);
      }
  }
  return m;
}

// Pixels whose value differs from a 4-neighbour.
EdgeMap mask_boundary(const GrayImage& m) {
  EdgeMap e(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double v = m.at(x, y);
      if ((x > 0 && m.at(x - 1, y) != v) || (x + 1 < m.width && m.at(x + 1, y) != v) ||
          (y > 0 && m.at(x, y - 1) != v) || (y + 1 < m.height && m.at(x, y + 1) != v))
        e.set(x, y);
    }
  return e;
}

std::uint64_t count_mismatches(const GrayImage& mask, const Quadtree& tree, int patch_side) {
  const auto toks = copatch_mask(mask, tree, patch_side);
  const auto seq = normalize_sequence(toks, geometry_of(tree, patch_side, 1), toks.size(), 0);
  const auto rec = reconstruct_mask(seq, token_predictions(seq));
  std::uint64_t n = 0;
  for (std::size_t k = 0; k < rec.data.size(); ++k) n += rec.data[k] != mask.data[k];
  return n;
}

Outcome round_trip() {
  // Power-of-two square masks: padding reads as zero with no edges, so a
  // leaf straddling the image border would otherwise blend in padding.
  // Two trees are checked, both with v=0 and P_m = Z'/2^H_eff: full depth
  // (every leaf 2x2) and one built on the mask's own boundary pixels, which
  // splits every non-uniform region. The Canny tree is reported only: edge
  // thinning can leave a boundary corner without an edge pixel.
  std::mt19937_64 rng(200);
  std::uint64_t full = 0, boundary = 0, canny_tree = 0, pixels = 0;
  for (int i = 0; i < 200; ++i) {
    const int side = 4 << (i % 6);  // 4 .. 128
    const auto mask = random_binary_mask(rng, side);
    pixels += mask.data.size();

    EdgeMap all(side, side);
    std::fill(all.bits.begin(), all.bits.end(), 1);
    const auto full_tree = build_quadtree(all, 0, 99);
    full += count_mismatches(mask, full_tree, int(full_tree.min_leaf_size()));

    const auto btree = build_quadtree(mask_boundary(mask), 0, 99);
    boundary += count_mismatches(mask, btree, int(side >> btree.effective_depth()));

    RasterImage raster(side, side, 1);
    for (std::size_t k = 0; k < mask.data.size(); ++k) raster.data[k] = mask.data[k] ? 255 : 0;
    const auto ctree = build_quadtree(detect_edges(raster, EdgeConfig{}), 0, 99);
    canny_tree += count_mismatches(mask, ctree, int(side >> ctree.effective_depth()));
  }
  return {full == 0 && boundary == 0,
          "200 masks, " + std::to_string(pixels) + " pixels; mismatches full-depth " +
              std::to_string(full) + ", mask-boundary tree " + std::to_string(boundary) +
              " (Canny tree, informational: " + std::to_string(canny_tree) + ")"};
}

Outcome uniform_baseline() {
  const auto seq = uniform_grid_patch(RasterImage(512, 512, 3), 8);
  const auto cost = attention_cost(512, 8);
  const bool ok = seq.length() == 4096 && cost.uniform_length == 4096;
  return {ok, "Z=512 P=8 -> " + std::to_string(seq.length()) + " tokens"};
}

Outcome monotone_sweep() {
  fixture::TempDir dir("acceptance_sweep");
  const auto path = fixture::shapes_corpus(dir, 12, 256, 2024, false);
  const auto manifest = read_manifest(path, APFConfig{});
  const std::uint64_t values[] = {20, 50, 100};
  const auto rows = split_value_sweep(manifest, values);
  std::ostringstream detail;
  bool ok = rows.size() == 3;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail << (i ? "; " : "") << "v=" << rows[i].split_value << " len=" << rows[i].avg_length
           << " size=" << rows[i].avg_patch_size;
    if (i > 0)
      ok = ok && rows[i].avg_length < rows[i - 1].avg_length &&
           rows[i].avg_patch_size > rows[i - 1].avg_patch_size;
  }
  return {ok, detail.str()};
}

Outcome reduction_demo() {
  const auto img = oracle::circle_outline(512, 256, 256, 160, 3);
  APFConfig cfg;
  cfg.split_value = 10;
  cfg.depth_limit = 7;
  cfg.patch_side = 4;
  cfg.seq_len = 16384;
  const auto result = preprocess_image(img, nullptr, cfg, 0);
  const auto n = result.tree.leaf_count();
  const auto uniform = uniform_grid_patch(img, 4).length();
  const bool ok = result.tree.effective_depth() == 7 && uniform == 16384 &&
                  n == kCircleLeaves && n * 4 <= uniform;
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.2f%%", 100.0 * double(n) / double(uniform));
  return {ok, std::to_string(n) + " of " + std::to_string(uniform) + " tokens (" + pct + ")"};
}

Outcome worst_case() {
  std::string detail;
  for (int side : {4, 16, 64, 256, 512}) {
    EdgeMap e(side, side);
    std::fill(e.bits.begin(), e.bits.end(), 1);
    const auto tree = build_quadtree(e, 0, 99);
    const std::size_t expect = std::size_t{1} << (2 * tree.effective_depth());
    if (tree.leaf_count() != expect || tree.min_leaf_size() != 2)
      return {false, std::to_string(side) + ": " + std::to_string(tree.leaf_count()) +
                         " leaves, expected " + std::to_string(expect)};
    detail += (detail.empty() ? "" : ", ") + std::to_string(side) + "->" +
              std::to_string(tree.leaf_count());
  }
  return {true, detail};
}

Outcome overhead() {
  fixture::TempDir dir("acceptance_overhead");
  std::mt19937_64 rng(512);
  const auto img = oracle::random_shapes(rng, 512);
  APFConfig cfg;
  const auto start = std::chrono::steady_clock::now();
  auto result = preprocess_image(img, nullptr, cfg, image_seed(0, 0));
  CacheWriter writer(dir.file("one.apt"));
  writer.write(CacheRecord{"img", std::move(result.tokens), {}});
  writer.close();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "512x512 end to end in %.3f s", secs);
  return {secs < 1.0, buf};
}

std::vector<std::uint8_t> golden_bytes() {
  // Fixed images and masks through the per-image pipeline, short enough
  // that some records drop tokens.
  std::mt19937_64 rng(7);
  std::vector<CacheRecord> records;
  for (int i = 0; i < 3; ++i) {
    GrayImage mask;
    const auto img = oracle::random_shapes(rng, 64, &mask);
    APFConfig cfg;
    cfg.split_value = 2;
    cfg.seq_len = 48;
    cfg.seed = 99;
    auto r = preprocess_image(img, &mask, cfg, image_seed(cfg.seed, std::uint64_t(i)));
    records.push_back(CacheRecord{"shape_" + std::to_string(i), std::move(r.tokens),
                                  std::move(r.mask_tokens)});
  }
  return encode_cache(records);
}

Outcome cache_format(const std::string& golden_path) {
  const auto bytes = golden_bytes();
  // Bit-identical round trip: read then re-encode.
  const CacheReader reader(bytes);
  const auto records = reader.read_all();
  if (encode_cache(records) != bytes) return {false, "re-encoding differs"};
  // Writer and in-memory encoder agree.
  fixture::TempDir dir("acceptance_cache");
  {
    CacheWriter w(dir.file("c.apt"));
    for (const auto& r : records) w.write(r);
    w.close();
  }
  if (fixture::read_bytes(dir.file("c.apt")) != bytes) return {false, "file bytes differ"};
  if (CacheReader(dir.file("c.apt")).read_all() != records)
    return {false, "records differ after reading back"};
  if (golden_bytes() != bytes) return {false, "two runs differ"};
  const auto golden = fixture::read_bytes(golden_path);
  if (golden.empty()) return {false, "golden file missing: " + golden_path};
  if (golden != bytes) return {false, "differs from the golden file"};
  return {true, std::to_string(records.size()) + " records, " + std::to_string(bytes.size()) +
                    " bytes, golden match"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string golden = APF_GOLDEN_PATH;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--write-golden") == 0 && i + 1 < argc) {
      const auto bytes = golden_bytes();
      std::FILE* f = std::fopen(argv[i + 1], "wb");
      if (!f) return 1;
      std::fwrite(bytes.data(), 1, bytes.size(), f);
      std::fclose(f);
      std::printf("wrote %zu bytes to %s\n", bytes.size(), argv[i + 1]);
      return 0;
    }
    if (std::strcmp(argv[i], "--golden") == 0 && i + 1 < argc) golden = argv[++i];
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"partition suite", partition_suite},
      {"exhaustive small-instance oracle", exhaustive_small},
      {"mask round trip", round_trip},
      {"uniform baseline", uniform_baseline},
      {"monotone split-value sweep", monotone_sweep},
      {"reduction demo", reduction_demo},
      {"worst-case degeneration", worst_case},
      {"preprocessing overhead", overhead},
      {"cache format", [&] { return cache_format(golden); }},
  };

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
