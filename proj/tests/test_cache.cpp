#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "apf/cache.hpp"
#include "doctest.h"

using namespace apf;

namespace {

// Independent little-endian encoder for a hand-written record.
struct Bytes {
  std::vector<std::uint8_t> v;
  void le(std::uint64_t x, int n) {
    for (int i = 0; i < n; ++i) v.push_back(std::uint8_t(x >> (8 * i)));
  }
  void raw(std::initializer_list<int> b) {
    for (int x : b) v.push_back(std::uint8_t(x));
  }
};

CacheRecord tiny_record(bool with_mask) {
  CacheRecord r;
  r.id = "a.png";
  auto& s = r.tokens;
  s.patch_side = 2;
  s.grid_size = 4;
  s.original_width = 3;
  s.original_height = 4;
  s.channels = 1;
  s.seed = 0x0102030405060708ull;
  s.real_count = 1;
  PatchToken t;
  t.morton = 0;
  t.size = 4;
  t.pixels = {0.0f, 1.0f, 0.5f, 0.2f};
  s.tokens = {t, make_pad_token(2, 1)};
  if (with_mask) {
    TokenSequence m = s;
    m.tokens[0].pixels = {1.0f, 0.0f, 0.0f, 1.0f};
    r.mask = m;
  }
  return r;
}

std::vector<std::uint8_t> tiny_expected(bool with_mask) {
  Bytes b;
  b.le(5, 4);
  b.raw({'a', '.', 'p', 'n', 'g'});
  b.le(4, 4);
  b.le(3, 4);
  b.le(4, 4);
  b.le(1, 1);
  b.le(2, 2);
  b.le(2, 4);
  b.le(1, 4);
  b.raw({8, 7, 6, 5, 4, 3, 2, 1});
  b.le(with_mask ? 1 : 0, 1);
  // real token: morton, x, y, size, is_pad, 4 pixels
  b.le(0, 8);
  b.le(0, 4);
  b.le(0, 4);
  b.le(4, 4);
  b.le(0, 1);
  b.raw({0, 255, 128, 51});
  // pad token
  b.le(0, 8);
  b.le(0, 4);
  b.le(0, 4);
  b.le(0, 4);
  b.le(1, 1);
  b.raw({0, 0, 0, 0});
  if (with_mask) b.raw({255, 0, 0, 255, 0, 0, 0, 0});
  return b.v;
}

CacheRecord random_record(std::mt19937_64& rng, int index) {
  std::uniform_int_distribution<int> len(0, 40);
  CacheRecord r;
  r.id = "img_" + std::to_string(index) + ".png";
  auto& s = r.tokens;
  s.patch_side = 1 << std::uniform_int_distribution<int>(1, 3)(rng);
  s.channels = rng() % 2 ? 3 : 1;
  s.grid_size = 64;
  s.original_width = 60;
  s.original_height = 64;
  s.seed = rng();
  const int real = len(rng);
  const int l = 1 + len(rng);
  s.real_count = std::uint32_t(real);
  s.dropped = real > l ? std::uint32_t(real - l) : 0;
  const std::size_t stride = std::size_t(s.patch_side) * s.patch_side * s.channels;
  for (int i = 0; i < l; ++i) {
    if (i >= real) {
      s.tokens.push_back(make_pad_token(s.patch_side, s.channels));
      continue;
    }
    PatchToken t;
    t.morton = rng() >> 20;
    t.x = std::uint32_t(rng() % 64);
    t.y = std::uint32_t(rng() % 64);
    t.size = std::uint32_t(s.patch_side) << (rng() % 3);
    // Values on the u8 lattice survive quantization.
    for (std::size_t k = 0; k < stride; ++k) t.pixels.push_back(float(rng() % 256) / 255.0f);
    s.tokens.push_back(t);
  }
  if (rng() % 2) {
    TokenSequence m = s;
    m.channels = 1;
    for (auto& t : m.tokens) {
      t.pixels.assign(std::size_t(s.patch_side) * s.patch_side, 0.0f);
      if (!t.is_pad)
        for (auto& p : t.pixels) p = float(rng() % 2);
    }
    r.mask = m;
  }
  return r;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("record encoding matches the layout byte for byte") {
  CHECK(encode_record(tiny_record(false)) == tiny_expected(false));
  CHECK(encode_record(tiny_record(true)) == tiny_expected(true));

  const CacheRecord recs[] = {tiny_record(true)};
  const auto file = encode_cache(recs);
  REQUIRE(file.size() == 6 + tiny_expected(true).size());
  CHECK(std::equal(file.begin(), file.begin() + 6,
                   std::vector<std::uint8_t>{'A', 'P', 'F', '1', 1, 0}.begin()));
  // Token stride: 21 header bytes plus the pixel block.
  CHECK(tiny_expected(false).size() == 4 + 5 + 32 + 2 * (21 + 4));
}

TEST_CASE("quantize_pixel") {
  CHECK(quantize_pixel(0.0f) == 0);
  CHECK(quantize_pixel(1.0f) == 255);
  CHECK(quantize_pixel(0.5f) == 128);
  CHECK(quantize_pixel(-3.0f) == 0);
  CHECK(quantize_pixel(7.0f) == 255);
  for (int b = 0; b < 256; ++b) CHECK(quantize_pixel(b / 255.0f) == b);
}

TEST_CASE("round trip through a file") {
  std::mt19937_64 rng(77);
  std::vector<CacheRecord> recs;
  for (int i = 0; i < 50; ++i) recs.push_back(random_record(rng, i));
  const auto path = temp_path("apf_test_roundtrip.apt");
  {
    CacheWriter w(path);
    for (const auto& r : recs) w.write(r);
    CHECK(w.records_written() == recs.size());
    w.close();
  }
  CacheReader reader(path);
  REQUIRE(reader.size() == recs.size());
  const auto back = reader.read_all();
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(back[i] == recs[i]);
  CHECK(reader.read(17) == recs[17]);
  CHECK_THROWS_AS(reader.read(recs.size()), Error);

  // write(read(x)) reproduces the file exactly.
  std::ifstream in(path, std::ios::binary);
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  CHECK(encode_cache(back) == bytes);
  std::remove(path.c_str());
}

TEST_CASE("empty cache") {
  const auto path = temp_path("apf_test_empty.apt");
  {
    CacheWriter w(path);
    w.close();
  }
  CHECK(CacheReader(path).size() == 0);
  std::remove(path.c_str());
}

TEST_CASE("corrupt input") {
  const CacheRecord recs[] = {tiny_record(true), tiny_record(false)};
  const auto good = encode_cache(recs);
  CHECK(CacheReader(good).size() == 2);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(CacheReader{bad_magic}, Error);

  auto bad_version = good;
  bad_version[4] = 9;
  CHECK_THROWS_AS(CacheReader{bad_version}, Error);

  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    if (cut == 6 || cut == 6 + tiny_expected(true).size()) continue;  // record boundaries
    std::vector<std::uint8_t> truncated(good.begin(), good.begin() + std::ptrdiff_t(cut));
    CHECK_THROWS_AS(CacheReader{truncated}, Error);
  }

  auto bad_flag = good;
  bad_flag[6 + tiny_expected(true).size() - 2 * 25 - 8 - 1] = 7;
  try {
    CacheReader r(bad_flag);
    FAIL("accepted a bad mask flag");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Corrupt);
  }
}

TEST_CASE("encode_record rejects inconsistent records") {
  auto r = tiny_record(true);
  r.mask->tokens[0].x = 1;
  CHECK_THROWS_AS(encode_record(r), Error);
  auto s = tiny_record(false);
  s.tokens.tokens[0].pixels.pop_back();
  CHECK_THROWS_AS(encode_record(s), Error);
}

TEST_CASE("writer reports unwritable paths") {
  CHECK_THROWS_AS(CacheWriter{"/nonexistent-dir/x.apt"}, Error);
}
