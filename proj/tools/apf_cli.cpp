// apf: adaptive quadtree patching from the command line.
//
// Exit status: 0 success, 1 input error, 2 configuration or usage error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apf/apf.h"

namespace {

constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

struct Failure {
  apf_status status;
};

int exit_code(apf_status s) {
  switch (s) {
    case APF_OK: return 0;
    case APF_ERR_CONFIG:
    case APF_ERR_INVALID_ARGUMENT: return kExitConfig;
    default: return kExitInput;
  }
}

void check(apf_status s) {
  if (s != APF_OK) {
    std::cerr << "apf: " << apf_last_error() << "\n";
    throw Failure{s};
  }
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Image = std::unique_ptr<apf_image, Deleter<apf_image, apf_image_free>>;
using Tree = std::unique_ptr<apf_tree, Deleter<apf_tree, apf_tree_free>>;
using Sequence =
    std::unique_ptr<apf_sequence, Deleter<apf_sequence, apf_sequence_free>>;
using Reader = std::unique_ptr<apf_cache_reader,
                               Deleter<apf_cache_reader, apf_cache_reader_free>>;

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { apf_string_free(s); }
};

Image load(const std::string& path) {
  apf_image* img = nullptr;
  check(apf_image_load_png(path.c_str(), &img));
  return Image(img);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    std::cerr << "apf: cannot write " << path << "\n";
    throw Failure{APF_ERR_INPUT};
  }
  std::fwrite(text.data(), 1, text.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

struct ConfigFlags {
  apf_config cfg{};
  int32_t depth = -1;
  bool schedule = false;

  ConfigFlags() { apf_config_init(&cfg); }

  void attach(CLI::App* app) {
    app->add_option("--split-value", cfg.split_value,
                    "Edge pixels a region may hold before it splits (v)")
        ->capture_default_str();
    app->add_option("--depth", depth,
                    "Depth limit H (default: leaves no smaller than --patch-size)");
    app->add_option("--kernel", cfg.kernel, "Gaussian kernel side (odd)")
        ->capture_default_str();
    app->add_option("--sigma", cfg.sigma, "Gaussian sigma, 0 derives it from the kernel")
        ->capture_default_str();
    app->add_option("--t-low", cfg.t_low, "Canny low threshold (0-255 scale)")
        ->capture_default_str();
    app->add_option("--t-high", cfg.t_high, "Canny high threshold (0-255 scale)")
        ->capture_default_str();
    app->add_option("--patch-size", cfg.patch_side, "Token side P_m in pixels")
        ->capture_default_str();
    app->add_option("--seq-len", cfg.seq_len, "Sequence length L")
        ->capture_default_str();
    app->add_option("--seed", cfg.seed, "Drop RNG seed")->capture_default_str();
    app->add_flag("--schedule", schedule,
                  "Derive kernel and depth limit from the image resolution");
  }

  const apf_config* get() {
    cfg.depth_limit = depth;
    cfg.use_schedule = schedule ? 1 : 0;
    check(apf_config_validate(&cfg));
    return &cfg;
  }
};

void print_sequence_summary(const apf_sequence* seq, const char* label) {
  apf_sequence_info info{};
  check(apf_sequence_info_get(seq, &info));
  std::cout << label << ": tokens=" << info.real_count << " length=" << info.length
            << " dropped=" << info.dropped << " pads="
            << (info.real_count < info.length ? info.length - info.real_count : 0)
            << " grid=" << info.grid_size << " patch=" << info.patch_side << "\n";
}

void write_cache(const std::string& path, const std::string& id,
                 const apf_sequence* tokens, const apf_sequence* mask) {
  apf_cache_writer* w = nullptr;
  check(apf_cache_writer_open(path.c_str(), &w));
  const auto add = apf_cache_writer_add(w, id.c_str(), tokens, mask);
  const auto close = apf_cache_writer_close(w);
  check(add);
  check(close);
}

void save_overlay_and_tree(const apf_image* img, const apf_config* cfg,
                           const std::string& overlay, const std::string& tree_json,
                           const std::string& edges_png) {
  if (!edges_png.empty()) {
    apf_image* edges = nullptr;
    check(apf_detect_edges(img, cfg, &edges));
    Image owned(edges);
    check(apf_edges_save_png(edges, edges_png.c_str()));
  }
  if (overlay.empty() && tree_json.empty()) return;
  apf_tree* t = nullptr;
  check(apf_tree_from_image(img, cfg, &t));
  Tree tree(t);
  if (!overlay.empty()) {
    apf_image* out = nullptr;
    check(apf_render_overlay(img, tree.get(), &out));
    Image owned(out);
    check(apf_image_save_png(out, overlay.c_str()));
  }
  if (!tree_json.empty()) {
    OwnedString json;
    check(apf_tree_to_json(tree.get(), &json.s));
    write_text(tree_json, json.s);
  }
}

std::vector<uint64_t> parse_values(const std::string& csv) {
  std::vector<uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      std::cerr << "apf: bad split value '" << item << "'\n";
      throw Failure{APF_ERR_CONFIG};
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive quadtree patching for transformer inputs", "apf"};
  app.require_subcommand(1);

  ConfigFlags flags;

  // patch
  std::string patch_image, patch_mask, patch_out, patch_overlay, patch_tree,
      patch_edges, patch_id;
  auto* patch = app.add_subcommand("patch", "Tokenize one image into a cache file");
  patch->add_option("image", patch_image, "Input PNG")->required();
  patch->add_option("--mask", patch_mask, "Mask PNG co-patched with the image");
  patch->add_option("--out", patch_out, "Output .apt cache")->required();
  patch->add_option("--overlay", patch_overlay, "Write a leaf overlay PNG");
  patch->add_option("--tree-json", patch_tree, "Write the quadtree as JSON");
  patch->add_option("--edges", patch_edges, "Write the edge map as a 1-bit PNG");
  patch->add_option("--id", patch_id, "Record id (default: image path)");
  flags.attach(patch);

  // dataset
  std::string manifest, dataset_out, dataset_stats;
  unsigned threads = 1;
  auto* dataset = app.add_subcommand("dataset", "Tokenize every image of a manifest");
  dataset->add_option("manifest", manifest,
                      "Text file: one 'image.png [mask.png]' per line")
      ->required();
  dataset->add_option("--out", dataset_out, "Output .apt cache")->required();
  dataset->add_option("--stats", dataset_stats, "Stats JSON path (default stdout)");
  dataset->add_option("--threads", threads, "Worker threads")->capture_default_str();
  flags.attach(dataset);

  // grid
  std::string grid_image, grid_out;
  int32_t grid_patch = 16;
  auto* grid = app.add_subcommand("grid", "Uniform P x P patching baseline");
  grid->add_option("image", grid_image, "Input PNG")->required();
  grid->add_option("--patch", grid_patch, "Patch side P")->capture_default_str();
  grid->add_option("--out", grid_out, "Optional .apt cache");

  // stats
  std::string stats_cache, stats_manifest, stats_values, stats_out;
  auto* stats = app.add_subcommand(
      "stats", "Sequence-length statistics of a cache, or a split-value sweep");
  stats->add_option("cache", stats_cache, "Input .apt cache");
  stats->add_option("--manifest", stats_manifest, "Manifest for a split-value sweep");
  stats->add_option("--split-values", stats_values, "Comma-separated v values to sweep");
  stats->add_option("--out", stats_out, "Output JSON (default stdout)");
  flags.attach(stats);

  // cost
  uint64_t cost_resolution = 0, cost_patch = 0;
  int64_t cost_adaptive = -1;
  auto* cost = app.add_subcommand("cost", "Attention score entries, uniform vs adaptive");
  cost->add_option("--resolution", cost_resolution, "Image side Z")->required();
  cost->add_option("--patch", cost_patch, "Uniform patch side P")->required();
  cost->add_option("--adaptive", cost_adaptive, "Adaptive sequence length N");

  // viz
  std::string viz_image, viz_out, viz_tree, viz_edges;
  auto* viz = app.add_subcommand("viz", "Draw quadtree leaves over an image");
  viz->add_option("image", viz_image, "Input PNG")->required();
  viz->add_option("--out", viz_out, "Output overlay PNG")->required();
  viz->add_option("--tree-json", viz_tree, "Write the quadtree as JSON");
  viz->add_option("--edges", viz_edges, "Write the edge map as a 1-bit PNG");
  flags.attach(viz);

  // reconstruct
  std::string rec_cache, rec_out, rec_source = "auto";
  std::size_t rec_index = 0;
  auto* reconstruct = app.add_subcommand(
      "reconstruct", "Rebuild a full-resolution mask from cached tokens");
  reconstruct->add_option("cache", rec_cache, "Input .apt cache")->required();
  reconstruct->add_option("--out", rec_out, "Output PNG")->required();
  reconstruct->add_option("--index", rec_index, "Record index")->capture_default_str();
  reconstruct->add_option("--source", rec_source, "mask, image or auto")
      ->check(CLI::IsMember({"auto", "mask", "image"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (argc > 1) std::cerr << "apf: " << e.what() << "\n";
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (*patch) {
      const apf_config* cfg = flags.get();
      Image img = load(patch_image);
      Image mask;
      if (!patch_mask.empty()) mask = load(patch_mask);
      apf_sequence* tokens = nullptr;
      apf_sequence* mask_tokens = nullptr;
      check(apf_tokenize(img.get(), mask.get(), cfg, apf_image_seed(cfg->seed, 0),
                         &tokens, mask ? &mask_tokens : nullptr));
      Sequence owned_tokens(tokens), owned_mask(mask_tokens);
      write_cache(patch_out, patch_id.empty() ? patch_image : patch_id, tokens,
                  mask_tokens);
      print_sequence_summary(tokens, patch_image.c_str());
      save_overlay_and_tree(img.get(), cfg, patch_overlay, patch_tree, patch_edges);
    } else if (*dataset) {
      const apf_config* cfg = flags.get();
      OwnedString json;
      check(apf_preprocess_dataset(manifest.c_str(), cfg, dataset_out.c_str(),
                                   threads, &json.s));
      write_text(dataset_stats, json.s);
    } else if (*grid) {
      Image img = load(grid_image);
      apf_sequence* seq = nullptr;
      check(apf_grid_patch(img.get(), grid_patch, &seq));
      Sequence owned(seq);
      apf_sequence_info info{};
      check(apf_sequence_info_get(seq, &info));
      std::cout << "N=" << info.length << "\n";
      if (!grid_out.empty()) write_cache(grid_out, grid_image, seq, nullptr);
    } else if (*stats) {
      OwnedString json;
      if (!stats_manifest.empty()) {
        const apf_config* cfg = flags.get();
        auto values = parse_values(stats_values.empty() ? std::to_string(cfg->split_value)
                                                        : stats_values);
        check(apf_split_value_sweep(stats_manifest.c_str(), cfg, values.data(),
                                    values.size(), &json.s));
      } else if (!stats_cache.empty()) {
        check(apf_cache_stats(stats_cache.c_str(), &json.s));
      } else {
        std::cerr << "apf: stats needs a cache file or --manifest\n"
                  << stats->help();
        return kExitConfig;
      }
      write_text(stats_out, json.s);
    } else if (*cost) {
      apf_cost c{};
      check(apf_attention_cost(cost_resolution, cost_patch, cost_adaptive, &c));
      std::cout << "N=" << c.uniform_length << "\n"
                << "uniform_entries=" << c.uniform_entries << "\n";
      if (c.has_adaptive)
        std::cout << "adaptive_N=" << c.adaptive_length << "\n"
                  << "adaptive_entries=" << c.adaptive_entries << "\n"
                  << "reduction=" << c.reduction << "\n";
    } else if (*viz) {
      const apf_config* cfg = flags.get();
      Image img = load(viz_image);
      save_overlay_and_tree(img.get(), cfg, viz_out, viz_tree, viz_edges);
    } else if (*reconstruct) {
      apf_cache_reader* r = nullptr;
      check(apf_cache_reader_open(rec_cache.c_str(), &r));
      Reader reader(r);
      apf_sequence* tokens = nullptr;
      apf_sequence* mask = nullptr;
      check(apf_cache_reader_get(r, rec_index, nullptr, &tokens, &mask));
      Sequence owned_tokens(tokens), owned_mask(mask);
      if (rec_source == "mask" && !mask) {
        std::cerr << "apf: record " << rec_index << " has no mask tokens\n";
        return kExitInput;
      }
      const apf_sequence* source =
          (rec_source == "image" || !mask) ? tokens : mask;

      apf_sequence_info info{};
      check(apf_sequence_info_get(source, &info));
      std::vector<float> predictions;
      for (std::size_t i = 0; i < info.length; ++i) {
        apf_token_view v{};
        check(apf_sequence_token(source, i, &v));
        if (v.is_pad) continue;
        const std::size_t block = v.pixel_count / info.channels;
        for (std::size_t k = 0; k < block; ++k)
          predictions.push_back(v.pixels[k * info.channels]);
      }
      apf_image* out = nullptr;
      check(apf_reconstruct(source, predictions.data(), predictions.size(), &out));
      Image owned(out);
      check(apf_image_save_png(out, rec_out.c_str()));
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
