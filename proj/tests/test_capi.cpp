#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "apf/apf.h"
#include "doctest.h"
#include "json.hpp"

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// 64x64 RGB with a bright square, so the tree splits.
apf_image* square_image() {
  std::vector<uint8_t> px(64 * 64 * 3, 10);
  for (int y = 16; y < 40; ++y)
    for (int x = 20; x < 44; ++x)
      for (int c = 0; c < 3; ++c) px[(y * 64 + x) * 3 + c] = 230;
  apf_image* img = nullptr;
  REQUIRE(apf_image_create(64, 64, 3, px.data(), &img) == APF_OK);
  return img;
}

apf_image* square_mask() {
  std::vector<uint8_t> px(64 * 64, 0);
  for (int y = 16; y < 40; ++y)
    for (int x = 20; x < 44; ++x) px[y * 64 + x] = 255;
  apf_image* img = nullptr;
  REQUIRE(apf_image_create(64, 64, 1, px.data(), &img) == APF_OK);
  return img;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  apf_config cfg;
  apf_config_init(&cfg);
  CHECK(cfg.split_value == 20);
  CHECK(cfg.kernel == 3);
  CHECK(cfg.t_low == 100.0);
  CHECK(cfg.t_high == 200.0);
  CHECK(cfg.patch_side == 4);
  CHECK(cfg.seq_len == 512);
  CHECK(cfg.depth_limit < 0);
  CHECK(apf_config_validate(&cfg) == APF_OK);
  cfg.patch_side = 3;
  CHECK(apf_config_validate(&cfg) == APF_ERR_CONFIG);
  CHECK(std::strlen(apf_last_error()) > 0);
  CHECK(apf_config_validate(nullptr) == APF_ERR_INVALID_ARGUMENT);
  CHECK(std::string(apf_version()) == "1.0.0");
}

TEST_CASE("schedule and cost") {
  int32_t k = 0, h = 0;
  CHECK(apf_resolution_schedule(512, &k, &h) == APF_OK);
  CHECK(k == 3);
  CHECK(h == 9);
  CHECK(apf_resolution_schedule(0, &k, &h) != APF_OK);
  apf_cost cost;
  CHECK(apf_attention_cost(512, 8, -1, &cost) == APF_OK);
  CHECK(cost.uniform_length == 4096);
  CHECK(cost.uniform_entries == 16777216ull);
  CHECK(cost.has_adaptive == 0);
  CHECK(apf_attention_cost(512, 8, 424, &cost) == APF_OK);
  CHECK(cost.has_adaptive == 1);
  CHECK(cost.reduction == doctest::Approx(93.32).epsilon(1e-3));
  CHECK(apf_attention_cost(512, 7, -1, &cost) == APF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("images") {
  apf_image* img = nullptr;
  CHECK(apf_image_create(0, 4, 1, nullptr, &img) != APF_OK);
  CHECK(img == nullptr);
  CHECK(apf_image_create(4, 4, 2, nullptr, &img) != APF_OK);
  CHECK(apf_image_create(4, 4, 1, nullptr, &img) == APF_OK);
  int32_t w, h, c;
  CHECK(apf_image_info(img, &w, &h, &c) == APF_OK);
  CHECK(w == 4);
  CHECK(c == 1);
  CHECK(apf_image_data(img)[5] == 0);
  apf_image_free(img);
  CHECK(apf_image_load_png("/nonexistent.png", &img) == APF_ERR_INPUT);
  apf_image_free(nullptr);
}

TEST_CASE("tree through the C API") {
  apf_image* img = square_image();
  apf_config cfg;
  apf_config_init(&cfg);
  cfg.split_value = 4;
  apf_tree* tree = nullptr;
  REQUIRE(apf_tree_from_image(img, &cfg, &tree) == APF_OK);
  const size_t n = apf_tree_leaf_count(tree);
  CHECK(n > 4);
  std::vector<apf_leaf> leaves(n);
  size_t written = 0;
  CHECK(apf_tree_leaves(tree, leaves.data(), n, &written) == APF_OK);
  CHECK(written == n);
  uint64_t area = 0;
  for (size_t i = 0; i < n; ++i) {
    area += uint64_t(leaves[i].size) * leaves[i].size;
    if (i) CHECK(leaves[i - 1].morton < leaves[i].morton);
  }
  uint32_t grid, min_leaf;
  int32_t eff;
  CHECK(apf_tree_info(tree, &grid, &eff, &min_leaf) == APF_OK);
  CHECK(grid == 64);
  CHECK(area == 64u * 64u);
  CHECK(min_leaf >= 4);
  int32_t ok = 0;
  CHECK(apf_tree_verify(tree, &ok) == APF_OK);
  CHECK(ok == 1);
  char* json = nullptr;
  CHECK(apf_tree_to_json(tree, &json) == APF_OK);
  CHECK(nlohmann::json::parse(json)["leaf_count"] == n);
  apf_string_free(json);

  apf_image* overlay = nullptr;
  CHECK(apf_render_overlay(img, tree, &overlay) == APF_OK);
  int32_t w, h, c;
  apf_image_info(overlay, &w, &h, &c);
  CHECK(w == 64);
  CHECK(c == 3);
  apf_image_free(overlay);

  apf_image* edges = nullptr;
  CHECK(apf_detect_edges(img, &cfg, &edges) == APF_OK);
  apf_tree* tree2 = nullptr;
  CHECK(apf_tree_build(edges, 4, cfg.depth_limit, &tree2) == APF_OK);
  CHECK(apf_tree_leaf_count(tree2) >= n);
  CHECK(apf_tree_build(img, 4, -1, &tree2) == APF_ERR_INVALID_ARGUMENT);
  apf_tree_free(tree2);
  apf_image_free(edges);
  apf_tree_free(tree);
  apf_image_free(img);
}

TEST_CASE("tokenize, cache and reconstruct") {
  apf_image* img = square_image();
  apf_image* mask = square_mask();
  apf_config cfg;
  apf_config_init(&cfg);
  cfg.split_value = 0;
  cfg.seq_len = 400;
  apf_sequence* toks = nullptr;
  apf_sequence* mtoks = nullptr;
  REQUIRE(apf_tokenize(img, mask, &cfg, 7, &toks, &mtoks) == APF_OK);
  REQUIRE(mtoks != nullptr);
  apf_sequence_info info;
  CHECK(apf_sequence_info_get(toks, &info) == APF_OK);
  CHECK(info.length == 400);
  CHECK(info.channels == 3);
  CHECK(info.seed == 7);
  apf_token_view view;
  CHECK(apf_sequence_token(toks, 0, &view) == APF_OK);
  CHECK(view.pixel_count == 4u * 4u * 3u);
  CHECK(apf_sequence_token(toks, 400, &view) == APF_ERR_INVALID_ARGUMENT);

  const auto path = temp_file("apf_capi.apt");
  apf_cache_writer* w = nullptr;
  REQUIRE(apf_cache_writer_open(path.c_str(), &w) == APF_OK);
  CHECK(apf_cache_writer_add(w, "square", toks, mtoks) == APF_OK);
  CHECK(apf_cache_writer_add(w, "nomask", toks, nullptr) == APF_OK);
  CHECK(apf_cache_writer_close(w) == APF_OK);

  apf_cache_reader* r = nullptr;
  REQUIRE(apf_cache_reader_open(path.c_str(), &r) == APF_OK);
  CHECK(apf_cache_reader_count(r) == 2);
  char* id = nullptr;
  apf_sequence* rt = nullptr;
  apf_sequence* rm = nullptr;
  REQUIRE(apf_cache_reader_get(r, 0, &id, &rt, &rm) == APF_OK);
  CHECK(std::string(id) == "square");
  REQUIRE(rm != nullptr);

  // Reconstruct the mask from its own tokens.
  apf_sequence_info minfo;
  apf_sequence_info_get(rm, &minfo);
  std::vector<float> preds;
  for (uint32_t i = 0; i < minfo.length; ++i) {
    apf_sequence_token(rm, i, &view);
    if (!view.is_pad) preds.insert(preds.end(), view.pixels, view.pixels + view.pixel_count);
  }
  apf_image* rec = nullptr;
  CHECK(apf_reconstruct(rm, preds.data(), preds.size(), &rec) == APF_OK);
  double dice = 0;
  CHECK(apf_dice(rec, mask, &dice) == APF_OK);
  CHECK(dice == 1.0);
  CHECK(apf_reconstruct(rm, preds.data(), preds.size() - 1, &rec) == APF_ERR_INVALID_ARGUMENT);
  apf_image_free(rec);
  apf_string_free(id);
  apf_sequence_free(rt);
  apf_sequence_free(rm);

  CHECK(apf_cache_reader_get(r, 1, &id, &rt, &rm) == APF_OK);
  CHECK(rm == nullptr);
  apf_string_free(id);
  apf_sequence_free(rt);
  CHECK(apf_cache_reader_get(r, 2, &id, &rt, &rm) == APF_ERR_INVALID_ARGUMENT);
  apf_cache_reader_free(r);

  char* stats = nullptr;
  CHECK(apf_cache_stats(path.c_str(), &stats) == APF_OK);
  CHECK(nlohmann::json::parse(stats)["image_count"] == 2);
  apf_string_free(stats);

  std::FILE* f = std::fopen(path.c_str(), "r+b");
  std::fputc('Z', f);
  std::fclose(f);
  CHECK(apf_cache_reader_open(path.c_str(), &r) == APF_ERR_CORRUPT);
  std::remove(path.c_str());

  apf_sequence* grid = nullptr;
  CHECK(apf_grid_patch(img, 8, &grid) == APF_OK);
  apf_sequence_info_get(grid, &info);
  CHECK(info.length == 64);
  apf_sequence_free(grid);

  apf_sequence_free(toks);
  apf_sequence_free(mtoks);
  apf_image_free(mask);
  apf_image_free(img);
}

TEST_CASE("null handles are rejected") {
  apf_tree* tree = nullptr;
  CHECK(apf_tree_from_image(nullptr, nullptr, &tree) == APF_ERR_INVALID_ARGUMENT);
  CHECK(apf_tree_leaf_count(nullptr) == 0);
  CHECK(apf_sequence_info_get(nullptr, nullptr) == APF_ERR_INVALID_ARGUMENT);
  CHECK(apf_cache_reader_count(nullptr) == 0);
}
