#include "apf/cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iterator>

namespace apf {

std::uint8_t quantize_pixel(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<std::uint8_t>(
          static_cast<std::uint64_t>(value) >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& in, std::size_t pos)
      : in_(in), pos_(pos) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  const std::uint8_t* take(std::size_t n) {
    need(n);
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  void skip(std::size_t n) { take(n); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > in_.size() - pos_)
      fail(ErrorKind::Corrupt, "cache truncated at byte " + std::to_string(pos_));
  }

  const std::vector<std::uint8_t>& in_;
  std::size_t pos_;
};

void check_encodable(const CacheRecord& r) {
  const auto& s = r.tokens;
  const std::size_t stride = std::size_t(s.patch_side) * s.patch_side * s.channels;
  if (s.patch_side < 1 || s.patch_side > 0xFFFF)
    fail(ErrorKind::InvalidArgument, "patch side out of range for the cache");
  if (s.channels < 1 || s.channels > 255)
    fail(ErrorKind::InvalidArgument, "channel count out of range for the cache");
  for (const auto& t : s.tokens)
    if (t.pixels.size() != stride)
      fail(ErrorKind::InvalidArgument, "token pixel count does not match geometry");
  if (!r.mask) return;
  const auto& m = *r.mask;
  if (m.tokens.size() != s.tokens.size() || m.patch_side != s.patch_side ||
      m.channels != 1)
    fail(ErrorKind::InvalidArgument,
         "mask tokens must be single-channel and match the image tokens");
  const std::size_t mstride = std::size_t(s.patch_side) * s.patch_side;
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    const auto& a = s.tokens[i];
    const auto& b = m.tokens[i];
    if (a.x != b.x || a.y != b.y || a.size != b.size || a.is_pad != b.is_pad ||
        a.morton != b.morton || b.pixels.size() != mstride)
      fail(ErrorKind::InvalidArgument,
           "mask token " + std::to_string(i) + " does not match image geometry");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_record(const CacheRecord& record) {
  check_encodable(record);
  const TokenSequence& s = record.tokens;
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(record.id.size()));
  w.bytes(record.id.data(), record.id.size());
  w.put<std::uint32_t>(s.grid_size);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.original_width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.original_height));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.channels));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(s.patch_side));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.tokens.size()));
  w.put<std::uint32_t>(s.real_count);
  w.put<std::uint64_t>(s.seed);
  w.put<std::uint8_t>(record.mask ? 1 : 0);
  for (const PatchToken& t : s.tokens) {
    w.put<std::uint64_t>(t.morton);
    w.put<std::uint32_t>(t.x);
    w.put<std::uint32_t>(t.y);
    w.put<std::uint32_t>(t.size);
    w.put<std::uint8_t>(t.is_pad ? 1 : 0);
    for (float v : t.pixels) out.push_back(quantize_pixel(v));
  }
  if (record.mask)
    for (const PatchToken& t : record.mask->tokens)
      for (float v : t.pixels) out.push_back(quantize_pixel(v));
  return out;
}

std::vector<std::uint8_t> encode_cache(std::span<const CacheRecord> records) {
  std::vector<std::uint8_t> out(std::begin(kCacheMagic), std::end(kCacheMagic));
  ByteWriter(out).put<std::uint16_t>(kCacheVersion);
  for (const auto& r : records) {
    auto bytes = encode_record(r);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

CacheWriter::CacheWriter(const std::string& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) fail(ErrorKind::Io, "cannot write " + path);
  std::vector<std::uint8_t> header(std::begin(kCacheMagic), std::end(kCacheMagic));
  ByteWriter(header).put<std::uint16_t>(kCacheVersion);
  out_.write(reinterpret_cast<const char*>(header.data()),
             static_cast<std::streamsize>(header.size()));
}

CacheWriter::~CacheWriter() {
  if (out_.is_open()) out_.close();
}

void CacheWriter::write(const CacheRecord& record) {
  const auto bytes = encode_record(record);
  out_.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!out_) fail(ErrorKind::Io, "failed writing " + path_);
  ++written_;
}

void CacheWriter::close() {
  if (!out_.is_open()) return;
  out_.flush();
  const bool ok = static_cast<bool>(out_);
  out_.close();
  if (!ok) fail(ErrorKind::Io, "failed writing " + path_);
}

CacheReader::CacheReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  bytes_.assign(std::istreambuf_iterator<char>(in), {});
  index();
}

CacheReader::CacheReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
  index();
}

void CacheReader::index() {
  if (bytes_.size() < 6 || std::memcmp(bytes_.data(), kCacheMagic, 4) != 0)
    fail(ErrorKind::Corrupt, "missing APF1 magic");
  ByteReader r(bytes_, 4);
  const auto version = r.get<std::uint16_t>();
  if (version != kCacheVersion)
    fail(ErrorKind::Corrupt, "unsupported cache version " + std::to_string(version));
  while (r.pos() < bytes_.size()) {
    offsets_.push_back(r.pos());
    r.skip(r.get<std::uint32_t>());
    r.skip(12);  // grid, width, height
    const auto channels = r.get<std::uint8_t>();
    const auto side = r.get<std::uint16_t>();
    const auto length = r.get<std::uint32_t>();
    r.skip(4 + 8);  // real count, seed
    const auto has_mask = r.get<std::uint8_t>();
    if (has_mask > 1) fail(ErrorKind::Corrupt, "bad mask flag");
    const std::uint64_t block = std::uint64_t{side} * side;
    const std::uint64_t payload =
        std::uint64_t{length} * (21 + block * channels) +
        (has_mask ? std::uint64_t{length} * block : 0);
    if (payload > bytes_.size() - r.pos())
      fail(ErrorKind::Corrupt, "record " + std::to_string(offsets_.size() - 1) +
                                   " is truncated");
    r.skip(static_cast<std::size_t>(payload));
  }
}

CacheRecord CacheReader::read(std::size_t index) const {
  if (index >= offsets_.size())
    fail(ErrorKind::InvalidArgument, "record index " + std::to_string(index) +
                                         " out of range");
  ByteReader r(bytes_, offsets_[index]);
  CacheRecord rec;
  const auto id_len = r.get<std::uint32_t>();
  const auto* id = r.take(id_len);
  rec.id.assign(reinterpret_cast<const char*>(id), id_len);

  TokenSequence& s = rec.tokens;
  s.grid_size = r.get<std::uint32_t>();
  s.original_width = static_cast<int>(r.get<std::uint32_t>());
  s.original_height = static_cast<int>(r.get<std::uint32_t>());
  s.channels = r.get<std::uint8_t>();
  s.patch_side = r.get<std::uint16_t>();
  const auto length = r.get<std::uint32_t>();
  s.real_count = r.get<std::uint32_t>();
  s.seed = r.get<std::uint64_t>();
  const bool has_mask = r.get<std::uint8_t>() != 0;
  s.dropped = s.real_count > length ? s.real_count - length : 0;

  const std::size_t stride = std::size_t(s.patch_side) * s.patch_side * s.channels;
  s.tokens.resize(length);
  for (auto& t : s.tokens) {
    t.morton = r.get<std::uint64_t>();
    t.x = r.get<std::uint32_t>();
    t.y = r.get<std::uint32_t>();
    t.size = r.get<std::uint32_t>();
    t.is_pad = r.get<std::uint8_t>() != 0;
    const auto* px = r.take(stride);
    t.pixels.resize(stride);
    for (std::size_t i = 0; i < stride; ++i) t.pixels[i] = px[i] / 255.0f;
  }
  if (has_mask) {
    TokenSequence m = s;
    m.channels = 1;
    const std::size_t block = std::size_t(s.patch_side) * s.patch_side;
    for (auto& t : m.tokens) {
      const auto* px = r.take(block);
      t.pixels.resize(block);
      for (std::size_t i = 0; i < block; ++i) t.pixels[i] = px[i] / 255.0f;
    }
    rec.mask = std::move(m);
  }
  return rec;
}

std::vector<CacheRecord> CacheReader::read_all() const {
  std::vector<CacheRecord> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
  return out;
}

}  // namespace apf
