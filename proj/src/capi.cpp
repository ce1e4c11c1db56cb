#include "apf/apf.h"

#include <climits>
#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "apf/cache.hpp"
#include "apf/edge_pipeline.hpp"
#include "apf/patcher.hpp"
#include "apf/pipeline.hpp"
#include "apf/png_io.hpp"
#include "apf/quadtree.hpp"

struct apf_image {
  apf::RasterImage img;
};
struct apf_tree {
  apf::Quadtree tree;
};
struct apf_sequence {
  apf::TokenSequence seq;
};
struct apf_cache_writer {
  apf::CacheWriter writer;
};
struct apf_cache_reader {
  apf::CacheReader reader;
};

namespace {

thread_local std::string g_last_error;

apf_status to_status(apf::ErrorKind kind) {
  switch (kind) {
    case apf::ErrorKind::InvalidArgument: return APF_ERR_INVALID_ARGUMENT;
    case apf::ErrorKind::Config: return APF_ERR_CONFIG;
    case apf::ErrorKind::Io: return APF_ERR_INPUT;
    case apf::ErrorKind::Corrupt: return APF_ERR_CORRUPT;
  }
  return APF_ERR_INTERNAL;
}

template <typename Fn>
apf_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return APF_OK;
  } catch (const apf::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return APF_ERR_INTERNAL;
}

template <typename... Ptrs>
void require(const Ptrs*... ptrs) {
  if (((ptrs == nullptr) || ...))
    apf::fail(apf::ErrorKind::InvalidArgument, "NULL argument");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

apf::APFConfig to_config(const apf_config* c) {
  apf::APFConfig cfg;
  cfg.split_value = c->split_value;
  if (c->depth_limit >= 0) cfg.depth_limit = c->depth_limit;
  cfg.kernel = c->kernel;
  cfg.sigma = c->sigma;
  cfg.t_low = c->t_low;
  cfg.t_high = c->t_high;
  cfg.patch_side = c->patch_side;
  cfg.seq_len = c->seq_len;
  cfg.seed = c->seed;
  cfg.use_schedule = c->use_schedule != 0;
  return cfg;
}

apf::EdgeMap to_edges(const apf::RasterImage& img) {
  if (img.channels != 1)
    apf::fail(apf::ErrorKind::InvalidArgument, "edge image must have 1 channel");
  apf::EdgeMap edges(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) edges.bits[i] = img.data[i] != 0;
  return edges;
}

apf::RasterImage to_raster(const apf::GrayImage& g) {
  apf::RasterImage out(g.width, g.height, 1);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    out.data[i] = apf::quantize_pixel(static_cast<float>(g.data[i]));
  return out;
}

apf::DatasetManifest load_manifest(const char* path, const apf_config* cfg) {
  return apf::read_manifest(path, to_config(cfg));
}

}  // namespace

extern "C" {

const char* apf_version(void) { return "1.0.0"; }

const char* apf_last_error(void) { return g_last_error.c_str(); }

void apf_string_free(char* s) { std::free(s); }

void apf_config_init(apf_config* cfg) {
  if (!cfg) return;
  const apf::APFConfig d;
  cfg->split_value = d.split_value;
  cfg->depth_limit = -1;
  cfg->kernel = d.kernel;
  cfg->sigma = d.sigma;
  cfg->t_low = d.t_low;
  cfg->t_high = d.t_high;
  cfg->patch_side = d.patch_side;
  cfg->seq_len = d.seq_len;
  cfg->seed = d.seed;
  cfg->use_schedule = 0;
}

apf_status apf_config_validate(const apf_config* cfg) {
  return guarded([&] {
    require(cfg);
    to_config(cfg).validate();
  });
}

uint64_t apf_image_seed(uint64_t seed, uint64_t index) {
  return apf::image_seed(seed, index);
}

apf_status apf_resolution_schedule(int64_t resolution, int32_t* kernel,
                                   int32_t* depth_limit) {
  return guarded([&] {
    require(kernel, depth_limit);
    const auto e = apf::resolution_schedule(resolution);
    *kernel = e.kernel;
    *depth_limit = e.depth_limit;
  });
}

apf_status apf_image_create(int32_t width, int32_t height, int32_t channels,
                            const uint8_t* data, apf_image** out) {
  return guarded([&] {
    require(out);
    *out = nullptr;
    apf::RasterImage img(width, height, channels);
    if (data) std::memcpy(img.data.data(), data, img.data.size());
    *out = new apf_image{std::move(img)};
  });
}

apf_status apf_image_load_png(const char* path, apf_image** out) {
  return guarded([&] {
    require(path, out);
    *out = nullptr;
    *out = new apf_image{apf::read_png(path)};
  });
}

apf_status apf_image_save_png(const apf_image* img, const char* path) {
  return guarded([&] {
    require(img, path);
    apf::write_png(path, img->img);
  });
}

apf_status apf_image_info(const apf_image* img, int32_t* width, int32_t* height,
                          int32_t* channels) {
  return guarded([&] {
    require(img);
    if (width) *width = img->img.width;
    if (height) *height = img->img.height;
    if (channels) *channels = img->img.channels;
  });
}

const uint8_t* apf_image_data(const apf_image* img) {
  return img ? img->img.data.data() : nullptr;
}

void apf_image_free(apf_image* img) { delete img; }

apf_status apf_detect_edges(const apf_image* img, const apf_config* cfg,
                            apf_image** out_edges) {
  return guarded([&] {
    require(img, cfg, out_edges);
    *out_edges = nullptr;
    const auto c = to_config(cfg);
    apf::EdgeConfig edge{c.kernel, c.sigma, c.t_low, c.t_high};
    if (c.use_schedule)
      edge.kernel = apf::resolution_schedule(std::max(img->img.width, img->img.height)).kernel;
    const auto edges = apf::detect_edges(img->img, edge);
    apf::RasterImage out(edges.width, edges.height, 1);
    for (std::size_t i = 0; i < edges.bits.size(); ++i)
      out.data[i] = edges.bits[i] ? 255 : 0;
    *out_edges = new apf_image{std::move(out)};
  });
}

apf_status apf_edges_save_png(const apf_image* edges, const char* path) {
  return guarded([&] {
    require(edges, path);
    apf::write_png(path, to_edges(edges->img));
  });
}

apf_status apf_tree_build(const apf_image* edges, uint64_t split_value,
                          int32_t depth_limit, apf_tree** out) {
  return guarded([&] {
    require(edges, out);
    *out = nullptr;
    const int depth = depth_limit < 0 ? INT_MAX : depth_limit;
    *out = new apf_tree{apf::build_quadtree(to_edges(edges->img), split_value, depth)};
  });
}

apf_status apf_tree_from_image(const apf_image* img, const apf_config* cfg,
                               apf_tree** out) {
  return guarded([&] {
    require(img, cfg, out);
    *out = nullptr;
    const auto c = to_config(cfg);
    const auto resolved = apf::resolve_config(c, img->img.width, img->img.height);
    const auto edges = apf::detect_edges(img->img, resolved.edge);
    *out = new apf_tree{apf::build_quadtree(edges, c.split_value, resolved.depth_limit)};
  });
}

size_t apf_tree_leaf_count(const apf_tree* tree) {
  return tree ? tree->tree.leaf_count() : 0;
}

apf_status apf_tree_info(const apf_tree* tree, uint32_t* grid_size,
                         int32_t* effective_depth, uint32_t* min_leaf_size) {
  return guarded([&] {
    require(tree);
    if (grid_size) *grid_size = tree->tree.grid_size();
    if (effective_depth) *effective_depth = tree->tree.effective_depth();
    if (min_leaf_size) *min_leaf_size = tree->tree.min_leaf_size();
  });
}

apf_status apf_tree_leaves(const apf_tree* tree, apf_leaf* out, size_t capacity,
                           size_t* written) {
  return guarded([&] {
    require(tree);
    const auto leaves = apf::ordered_leaves(tree->tree);
    const size_t n = std::min(capacity, leaves.size());
    if (n > 0) require(out);
    for (size_t i = 0; i < n; ++i) {
      const auto& l = leaves[i];
      out[i] = apf_leaf{l.region.x, l.region.y, l.region.size, l.depth,
                        l.edge_count, l.morton};
    }
    if (written) *written = n;
  });
}

apf_status apf_tree_verify(const apf_tree* tree, int32_t* ok) {
  apf::PartitionReport report;
  const auto status = guarded([&] {
    require(tree, ok);
    report = apf::verify_partition(tree->tree);
    *ok = report.ok() ? 1 : 0;
  });
  if (status == APF_OK && !report.ok()) {
    for (const auto* check : {&report.tiling, &report.criterion, &report.morton})
      if (!check->passed) {
        g_last_error = check->counterexample;
        break;
      }
  }
  return status;
}

apf_status apf_tree_to_json(const apf_tree* tree, char** out_json) {
  return guarded([&] {
    require(tree, out_json);
    *out_json = copy_string(apf::tree_to_json(tree->tree, 2));
  });
}

void apf_tree_free(apf_tree* tree) { delete tree; }

apf_status apf_render_overlay(const apf_image* img, const apf_tree* tree,
                              apf_image** out) {
  return guarded([&] {
    require(img, tree, out);
    *out = nullptr;
    *out = new apf_image{apf::render_overlay(img->img, tree->tree)};
  });
}

apf_status apf_tokenize(const apf_image* img, const apf_image* mask,
                        const apf_config* cfg, uint64_t seed,
                        apf_sequence** out_tokens, apf_sequence** out_mask) {
  return guarded([&] {
    require(img, cfg, out_tokens);
    *out_tokens = nullptr;
    if (out_mask) *out_mask = nullptr;
    std::optional<apf::GrayImage> gray_mask;
    if (mask && out_mask) gray_mask = apf::mask_from_raster(mask->img);
    auto result = apf::preprocess_image(img->img, gray_mask ? &*gray_mask : nullptr,
                                        to_config(cfg), seed);
    auto* tokens = new apf_sequence{std::move(result.tokens)};
    if (result.mask_tokens) {
      try {
        *out_mask = new apf_sequence{std::move(*result.mask_tokens)};
      } catch (...) {
        delete tokens;
        throw;
      }
    }
    *out_tokens = tokens;
  });
}

apf_status apf_grid_patch(const apf_image* img, int32_t patch, apf_sequence** out) {
  return guarded([&] {
    require(img, out);
    *out = nullptr;
    *out = new apf_sequence{apf::uniform_grid_patch(img->img, patch)};
  });
}

apf_status apf_sequence_info_get(const apf_sequence* seq, apf_sequence_info* info) {
  return guarded([&] {
    require(seq, info);
    const auto& s = seq->seq;
    info->length = static_cast<uint32_t>(s.tokens.size());
    info->real_count = s.real_count;
    info->dropped = s.dropped;
    info->grid_size = s.grid_size;
    info->patch_side = s.patch_side;
    info->width = s.original_width;
    info->height = s.original_height;
    info->channels = s.channels;
    info->seed = s.seed;
  });
}

apf_status apf_sequence_token(const apf_sequence* seq, size_t index,
                              apf_token_view* view) {
  return guarded([&] {
    require(seq, view);
    if (index >= seq->seq.tokens.size())
      apf::fail(apf::ErrorKind::InvalidArgument, "token index out of range");
    const auto& t = seq->seq.tokens[index];
    *view = apf_token_view{t.morton, t.x, t.y, t.size, t.is_pad ? 1 : 0,
                           t.pixels.data(), t.pixels.size()};
  });
}

void apf_sequence_free(apf_sequence* seq) { delete seq; }

apf_status apf_reconstruct(const apf_sequence* seq, const float* predictions,
                           size_t count, apf_image** out) {
  return guarded([&] {
    require(seq, out);
    *out = nullptr;
    if (count > 0) require(predictions);
    const auto mask = apf::reconstruct_mask(
        seq->seq, std::span<const float>(predictions, count));
    *out = new apf_image{to_raster(mask)};
  });
}

apf_status apf_dice(const apf_image* pred, const apf_image* truth, double* out) {
  return guarded([&] {
    require(pred, truth, out);
    *out = apf::dice_score(apf::to_grayscale(pred->img), apf::to_grayscale(truth->img));
  });
}

apf_status apf_cache_writer_open(const char* path, apf_cache_writer** out) {
  return guarded([&] {
    require(path, out);
    *out = nullptr;
    *out = new apf_cache_writer{apf::CacheWriter(path)};
  });
}

apf_status apf_cache_writer_add(apf_cache_writer* writer, const char* id,
                                const apf_sequence* tokens,
                                const apf_sequence* mask) {
  return guarded([&] {
    require(writer, id, tokens);
    apf::CacheRecord rec{id, tokens->seq, std::nullopt};
    if (mask) rec.mask = mask->seq;
    writer->writer.write(rec);
  });
}

apf_status apf_cache_writer_close(apf_cache_writer* writer) {
  const auto status = guarded([&] {
    require(writer);
    writer->writer.close();
  });
  delete writer;
  return status;
}

apf_status apf_cache_reader_open(const char* path, apf_cache_reader** out) {
  return guarded([&] {
    require(path, out);
    *out = nullptr;
    *out = new apf_cache_reader{apf::CacheReader(std::string(path))};
  });
}

size_t apf_cache_reader_count(const apf_cache_reader* reader) {
  return reader ? reader->reader.size() : 0;
}

apf_status apf_cache_reader_get(const apf_cache_reader* reader, size_t index,
                                char** out_id, apf_sequence** out_tokens,
                                apf_sequence** out_mask) {
  return guarded([&] {
    require(reader);
    if (out_id) *out_id = nullptr;
    if (out_tokens) *out_tokens = nullptr;
    if (out_mask) *out_mask = nullptr;
    auto rec = reader->reader.read(index);
    char* id = out_id ? copy_string(rec.id) : nullptr;
    apf_sequence* tokens = nullptr;
    apf_sequence* mask = nullptr;
    try {
      if (out_tokens) tokens = new apf_sequence{std::move(rec.tokens)};
      if (out_mask && rec.mask) mask = new apf_sequence{std::move(*rec.mask)};
    } catch (...) {
      std::free(id);
      delete tokens;
      throw;
    }
    if (out_id) *out_id = id;
    if (out_tokens) *out_tokens = tokens;
    if (out_mask) *out_mask = mask;
  });
}

void apf_cache_reader_free(apf_cache_reader* reader) { delete reader; }

apf_status apf_preprocess_dataset(const char* manifest_path, const apf_config* cfg,
                                  const char* cache_path, uint32_t threads,
                                  char** out_stats_json) {
  return guarded([&] {
    require(manifest_path, cfg, cache_path);
    if (out_stats_json) *out_stats_json = nullptr;
    const auto report = apf::preprocess_dataset(load_manifest(manifest_path, cfg),
                                                cache_path, threads);
    if (out_stats_json) *out_stats_json = copy_string(apf::stats_to_json(report));
  });
}

apf_status apf_cache_stats(const char* cache_path, char** out_json) {
  return guarded([&] {
    require(cache_path, out_json);
    *out_json = nullptr;
    *out_json = copy_string(apf::stats_to_json(apf::stats_report(cache_path), false));
  });
}

apf_status apf_split_value_sweep(const char* manifest_path, const apf_config* cfg,
                                 const uint64_t* values, size_t count,
                                 char** out_json) {
  return guarded([&] {
    require(manifest_path, cfg, out_json);
    *out_json = nullptr;
    if (count > 0) require(values);
    apf::StatsReport report;
    report.sweep = apf::split_value_sweep(load_manifest(manifest_path, cfg),
                                          std::span<const uint64_t>(values, count));
    *out_json = copy_string(apf::stats_to_json(report, false));
  });
}

apf_status apf_attention_cost(uint64_t resolution, uint64_t patch,
                              int64_t adaptive_length, apf_cost* out) {
  return guarded([&] {
    require(out);
    std::optional<uint64_t> n;
    if (adaptive_length >= 0) n = static_cast<uint64_t>(adaptive_length);
    const auto c = apf::attention_cost(resolution, patch, n);
    *out = apf_cost{c.uniform_length, c.uniform_entries, c.adaptive_length ? 1 : 0,
                    c.adaptive_length.value_or(0), c.adaptive_entries.value_or(0),
                    c.reduction.value_or(0.0)};
  });
}

}  // extern "C"
