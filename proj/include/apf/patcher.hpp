#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "apf/image.hpp"
#include "apf/quadtree.hpp"

namespace apf {

/// One model token: a leaf resampled to patch_side x patch_side.
struct PatchToken {
  std::uint64_t morton = 0;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t size = 0;  // source leaf side; 0 for pads
  bool is_pad = false;
  std::vector<float> pixels;  // patch_side^2 * channels, HWC, in [0,1]

  friend bool operator==(const PatchToken&, const PatchToken&) = default;
};

/// Fixed-length token sequence. Real tokens precede pads.
struct TokenSequence {
  std::vector<PatchToken> tokens;
  int patch_side = 0;
  std::uint32_t grid_size = 0;
  int original_width = 0;
  int original_height = 0;
  int channels = 0;
  std::uint64_t seed = 0;
  std::uint32_t real_count = 0;  // leaves before pad/drop
  std::uint32_t dropped = 0;

  std::size_t length() const { return tokens.size(); }
  std::size_t non_pad_count() const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Box-reduces every leaf of `tree` (in Z-order) to patch_side x patch_side.
/// Pixels outside the source image read as zero. Throws Config when a leaf
/// is smaller than patch_side.
std::vector<PatchToken> extract_patches(const RasterImage& img,
                                        const Quadtree& tree, int patch_side);
std::vector<PatchToken> extract_patches(const RasterImage& img,
                                        std::span<const Leaf> leaves,
                                        int patch_side);

/// Same geometry as extract_patches, applied to a single-channel mask.
std::vector<PatchToken> copatch_mask(const GrayImage& mask,
                                     const Quadtree& tree, int patch_side);

/// Indices (ascending) of the `length` tokens kept out of `count`. Identity
/// when count <= length.
std::vector<std::size_t> select_survivors(std::size_t count,
                                          std::size_t length,
                                          std::uint64_t seed);

struct SequenceGeometry {
  int patch_side = 0;
  std::uint32_t grid_size = 0;
  int original_width = 0;
  int original_height = 0;
  int channels = 0;
};

SequenceGeometry geometry_of(const Quadtree& tree, int patch_side,
                             int channels);

PatchToken make_pad_token(int patch_side, int channels);

/// Pads with zero tokens or drops a seeded uniform random subset to reach
/// exactly `length` tokens. Survivors keep their order.
TokenSequence normalize_sequence(std::vector<PatchToken> tokens,
                                 const SequenceGeometry& geometry,
                                 std::size_t length, std::uint64_t seed);

/// Row-major P x P tiles over the zero-padded power-of-two square.
TokenSequence uniform_grid_patch(const RasterImage& img, int patch);

/// Nearest-neighbour upsampling of one patch_side^2 prediction per non-pad
/// token back to its leaf, cropped to the original size. Regions without a
/// token stay 0.
GrayImage reconstruct_mask(const TokenSequence& seq,
                           std::span<const float> predictions);

/// First channel of every non-pad token, concatenated; a valid
/// `predictions` argument for reconstruct_mask.
std::vector<float> token_predictions(const TokenSequence& seq);

/// 2|X and Y| / (|X| + |Y|) after binarizing at 0.5; 1 when both are empty.
double dice_score(const GrayImage& pred, const GrayImage& truth);

}  // namespace apf
