/*
 * C interface to the adaptive patching library.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Functions return an apf_status; on failure a
 * description is available from apf_last_error() on the same thread.
 */
#ifndef APF_APF_H
#define APF_APF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(APF_BUILDING_LIBRARY)
#    define APF_API __declspec(dllexport)
#  else
#    define APF_API __declspec(dllimport)
#  endif
#else
#  define APF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum apf_status {
  APF_OK = 0,
  APF_ERR_INPUT = 1,            /* unreadable or unwritable file */
  APF_ERR_CONFIG = 2,           /* rejected configuration */
  APF_ERR_INVALID_ARGUMENT = 3, /* precondition violated, NULL handle */
  APF_ERR_CORRUPT = 4,          /* malformed cache or image data */
  APF_ERR_INTERNAL = 5
} apf_status;

typedef struct apf_image apf_image;
typedef struct apf_tree apf_tree;
typedef struct apf_sequence apf_sequence;
typedef struct apf_cache_writer apf_cache_writer;
typedef struct apf_cache_reader apf_cache_reader;

typedef struct apf_config {
  uint64_t split_value;
  int32_t depth_limit; /* < 0: deepest level with leaves >= patch_side */
  int32_t kernel;
  double sigma;        /* 0: derived from kernel */
  double t_low;        /* 0-255 gradient scale */
  double t_high;
  int32_t patch_side;
  uint32_t seq_len;
  uint64_t seed;
  int32_t use_schedule; /* nonzero: kernel/depth from image resolution */
} apf_config;

typedef struct apf_leaf {
  uint32_t x;
  uint32_t y;
  uint32_t size;
  int32_t depth;
  uint64_t edge_count;
  uint64_t morton;
} apf_leaf;

typedef struct apf_sequence_info {
  uint32_t length;
  uint32_t real_count;
  uint32_t dropped;
  uint32_t grid_size;
  int32_t patch_side;
  int32_t width;
  int32_t height;
  int32_t channels;
  uint64_t seed;
} apf_sequence_info;

typedef struct apf_token_view {
  uint64_t morton;
  uint32_t x;
  uint32_t y;
  uint32_t size;
  int32_t is_pad;
  const float* pixels; /* valid while the sequence lives */
  size_t pixel_count;
} apf_token_view;

typedef struct apf_cost {
  uint64_t uniform_length;
  uint64_t uniform_entries;
  int32_t has_adaptive;
  uint64_t adaptive_length;
  uint64_t adaptive_entries;
  double reduction;
} apf_cost;

APF_API const char* apf_version(void);
APF_API const char* apf_last_error(void);
APF_API void apf_string_free(char* s);

APF_API void apf_config_init(apf_config* cfg);
APF_API apf_status apf_config_validate(const apf_config* cfg);
/* Drop-RNG seed the dataset pass uses for the image at `index`. */
APF_API uint64_t apf_image_seed(uint64_t seed, uint64_t index);
APF_API apf_status apf_resolution_schedule(int64_t resolution, int32_t* kernel,
                                           int32_t* depth_limit);

/* Images: 8-bit, 1 or 3 interleaved channels. */
APF_API apf_status apf_image_create(int32_t width, int32_t height,
                                    int32_t channels, const uint8_t* data,
                                    apf_image** out);
APF_API apf_status apf_image_load_png(const char* path, apf_image** out);
APF_API apf_status apf_image_save_png(const apf_image* img, const char* path);
APF_API apf_status apf_image_info(const apf_image* img, int32_t* width,
                                  int32_t* height, int32_t* channels);
APF_API const uint8_t* apf_image_data(const apf_image* img);
APF_API void apf_image_free(apf_image* img);

/* Edge map as a 1-channel image, 255 = edge. */
APF_API apf_status apf_detect_edges(const apf_image* img, const apf_config* cfg,
                                    apf_image** out_edges);
/* Writes nonzero pixels as a 1-bit PNG. */
APF_API apf_status apf_edges_save_png(const apf_image* edges, const char* path);

/* Quadtree over a 1-channel edge image (nonzero = edge). depth_limit < 0
 * means no limit beyond the 2x2 floor. */
APF_API apf_status apf_tree_build(const apf_image* edges, uint64_t split_value,
                                  int32_t depth_limit, apf_tree** out);
/* Edge detection and tree construction with the resolved config. */
APF_API apf_status apf_tree_from_image(const apf_image* img,
                                       const apf_config* cfg, apf_tree** out);
APF_API size_t apf_tree_leaf_count(const apf_tree* tree);
APF_API apf_status apf_tree_info(const apf_tree* tree, uint32_t* grid_size,
                                 int32_t* effective_depth,
                                 uint32_t* min_leaf_size);
/* Leaves in Z-order. Writes min(capacity, leaf count) entries. */
APF_API apf_status apf_tree_leaves(const apf_tree* tree, apf_leaf* out,
                                   size_t capacity, size_t* written);
/* *ok = 1 when every partition check passes; otherwise apf_last_error()
 * names the first counterexample. */
APF_API apf_status apf_tree_verify(const apf_tree* tree, int32_t* ok);
APF_API apf_status apf_tree_to_json(const apf_tree* tree, char** out_json);
APF_API void apf_tree_free(apf_tree* tree);

APF_API apf_status apf_render_overlay(const apf_image* img, const apf_tree* tree,
                                      apf_image** out);

/* Full single-image pipeline. `mask` (1 channel, nullable) is co-patched
 * into *out_mask when both are non-NULL. */
APF_API apf_status apf_tokenize(const apf_image* img, const apf_image* mask,
                                const apf_config* cfg, uint64_t seed,
                                apf_sequence** out_tokens,
                                apf_sequence** out_mask);
APF_API apf_status apf_grid_patch(const apf_image* img, int32_t patch,
                                  apf_sequence** out);
APF_API apf_status apf_sequence_info_get(const apf_sequence* seq,
                                         apf_sequence_info* info);
APF_API apf_status apf_sequence_token(const apf_sequence* seq, size_t index,
                                      apf_token_view* view);
APF_API void apf_sequence_free(apf_sequence* seq);

/* One patch_side^2 block per non-pad token. Output is a 1-channel image
 * with values round(v * 255). */
APF_API apf_status apf_reconstruct(const apf_sequence* seq,
                                   const float* predictions, size_t count,
                                   apf_image** out);
APF_API apf_status apf_dice(const apf_image* pred, const apf_image* truth,
                            double* out);

APF_API apf_status apf_cache_writer_open(const char* path,
                                         apf_cache_writer** out);
APF_API apf_status apf_cache_writer_add(apf_cache_writer* writer,
                                        const char* id,
                                        const apf_sequence* tokens,
                                        const apf_sequence* mask);
/* Flushes and releases the writer. */
APF_API apf_status apf_cache_writer_close(apf_cache_writer* writer);

APF_API apf_status apf_cache_reader_open(const char* path,
                                         apf_cache_reader** out);
APF_API size_t apf_cache_reader_count(const apf_cache_reader* reader);
/* *out_mask is set to NULL when the record has no mask payload. */
APF_API apf_status apf_cache_reader_get(const apf_cache_reader* reader,
                                        size_t index, char** out_id,
                                        apf_sequence** out_tokens,
                                        apf_sequence** out_mask);
APF_API void apf_cache_reader_free(apf_cache_reader* reader);

/* Stats are returned as JSON strings released with apf_string_free. */
APF_API apf_status apf_preprocess_dataset(const char* manifest_path,
                                          const apf_config* cfg,
                                          const char* cache_path,
                                          uint32_t threads,
                                          char** out_stats_json);
APF_API apf_status apf_cache_stats(const char* cache_path, char** out_json);
APF_API apf_status apf_split_value_sweep(const char* manifest_path,
                                         const apf_config* cfg,
                                         const uint64_t* values, size_t count,
                                         char** out_json);

/* adaptive_length < 0 omits the adaptive comparison. */
APF_API apf_status apf_attention_cost(uint64_t resolution, uint64_t patch,
                                      int64_t adaptive_length, apf_cost* out);

#ifdef __cplusplus
}
#endif

#endif /* APF_APF_H */
