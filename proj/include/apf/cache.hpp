#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apf/patcher.hpp"

namespace apf {

// On-disk token cache (".apt"), little-endian:
//
//   "APF1" magic, u16 version
//   per record:
//     u32 id length, id bytes (UTF-8)
//     u32 grid side, u32 width, u32 height, u8 channels, u16 patch side,
//     u32 sequence length L, u32 real-token count, u64 seed, u8 has_mask
//     L x { u64 morton, u32 x, u32 y, u32 size, u8 is_pad,
//           patch_side^2 * channels u8 pixels }
//     if has_mask: L x patch_side^2 u8 mask pixels
//
// Every token entry of a record has the same stride, so a loader can seek
// to token i directly. Pixels are stored as round(v * 255).

inline constexpr char kCacheMagic[4] = {'A', 'P', 'F', '1'};
inline constexpr std::uint16_t kCacheVersion = 1;

struct CacheRecord {
  std::string id;
  TokenSequence tokens;
  std::optional<TokenSequence> mask;

  friend bool operator==(const CacheRecord&, const CacheRecord&) = default;
};

std::uint8_t quantize_pixel(float v);

/// Serialized bytes of one record (no file header).
std::vector<std::uint8_t> encode_record(const CacheRecord& record);

/// Whole-file bytes for a list of records.
std::vector<std::uint8_t> encode_cache(std::span<const CacheRecord> records);

class CacheWriter {
 public:
  explicit CacheWriter(const std::string& path);
  ~CacheWriter();
  CacheWriter(const CacheWriter&) = delete;
  CacheWriter& operator=(const CacheWriter&) = delete;

  void write(const CacheRecord& record);
  void close();
  std::size_t records_written() const { return written_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t written_ = 0;
};

/// Loads a cache into memory and indexes record offsets. Throws Corrupt on
/// malformed input.
class CacheReader {
 public:
  explicit CacheReader(const std::string& path);
  explicit CacheReader(std::vector<std::uint8_t> bytes);

  std::size_t size() const { return offsets_.size(); }
  CacheRecord read(std::size_t index) const;
  std::vector<CacheRecord> read_all() const;

 private:
  void index();

  std::vector<std::uint8_t> bytes_;
  std::vector<std::size_t> offsets_;
};

}  // namespace apf
