#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "apf/png_io.hpp"
#include "oracles.hpp"

namespace fixture {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("apf_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes `count` random-shape images (and masks) into `dir` plus a manifest
/// listing them in order; returns the manifest path.
inline std::string shapes_corpus(const TempDir& dir, int count, int side,
                                 std::uint64_t seed, bool with_masks = true) {
  std::mt19937_64 rng(seed);
  std::ofstream manifest(dir.file("manifest.txt"));
  manifest << "# synthetic shapes\n";
  for (int i = 0; i < count; ++i) {
    apf::GrayImage mask;
    const auto img = oracle::random_shapes(rng, side, &mask);
    const std::string name = "img_" + std::to_string(i) + ".png";
    apf::write_png(dir.file(name), img);
    manifest << name;
    if (with_masks) {
      const std::string mname = "mask_" + std::to_string(i) + ".png";
      apf::write_png(dir.file(mname), mask);
      manifest << " " << mname;
    }
    manifest << "\n";
  }
  return dir.file("manifest.txt");
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace fixture
