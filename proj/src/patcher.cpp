#include "apf/patcher.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <random>
#include <string>

namespace apf {

std::size_t TokenSequence::non_pad_count() const {
  return static_cast<std::size_t>(std::count_if(
      tokens.begin(), tokens.end(), [](const PatchToken& t) { return !t.is_pad; }));
}

namespace {

void check_patch_side(int patch_side) {
  if (patch_side < 1)
    fail(ErrorKind::Config, "patch side must be >= 1, got " +
                                std::to_string(patch_side));
}

// Area-average of each leaf down to patch_side^2. `sum_block` adds the
// samples of channel c in [x0,x1) x [y0,y1), already clipped to the source.
template <typename SumBlock>
std::vector<PatchToken> box_reduce(std::span<const Leaf> leaves, int patch_side,
                                   int channels, int width, int height,
                                   SumBlock sum_block, double scale) {
  check_patch_side(patch_side);
  const auto side = static_cast<std::uint32_t>(patch_side);
  std::vector<PatchToken> tokens;
  tokens.reserve(leaves.size());
  for (const Leaf& leaf : leaves) {
    const Region& r = leaf.region;
    if (r.size < side)
      fail(ErrorKind::Config,
           "leaf of side " + std::to_string(r.size) + " is smaller than patch side " +
               std::to_string(patch_side) +
               "; use a patch side no larger than the minimum leaf side");
    if (r.size % side != 0)
      fail(ErrorKind::InvalidArgument, "leaf side " + std::to_string(r.size) +
                                           " is not a multiple of patch side " +
                                           std::to_string(patch_side));
    const std::uint32_t factor = r.size / side;
    const double norm = scale * double(factor) * double(factor);

    PatchToken t;
    t.morton = leaf.morton;
    t.x = r.x;
    t.y = r.y;
    t.size = r.size;
    t.pixels.assign(std::size_t{side} * side * channels, 0.0f);
    for (std::uint32_t oy = 0; oy < side; ++oy) {
      const std::int64_t y0 = std::int64_t{r.y} + std::int64_t{oy} * factor;
      const std::int64_t y1 = std::min<std::int64_t>(y0 + factor, height);
      if (y0 >= height) break;
      for (std::uint32_t ox = 0; ox < side; ++ox) {
        const std::int64_t x0 = std::int64_t{r.x} + std::int64_t{ox} * factor;
        const std::int64_t x1 = std::min<std::int64_t>(x0 + factor, width);
        if (x0 >= width) break;
        for (int c = 0; c < channels; ++c) {
          const double sum = sum_block(int(x0), int(y0), int(x1), int(y1), c);
          t.pixels[(std::size_t{oy} * side + ox) * channels + c] =
              static_cast<float>(sum / norm);
        }
      }
    }
    tokens.push_back(std::move(t));
  }
  return tokens;
}

void check_matches_tree(int w, int h, const Quadtree& tree, const char* what) {
  if (w != tree.original_width() || h != tree.original_height())
    fail(ErrorKind::InvalidArgument,
         std::string(what) + " is " + std::to_string(w) + "x" + std::to_string(h) +
             " but the tree was built over " +
             std::to_string(tree.original_width()) + "x" +
             std::to_string(tree.original_height()));
}

}  // namespace

std::vector<PatchToken> extract_patches(const RasterImage& img,
                                        std::span<const Leaf> leaves,
                                        int patch_side) {
  const int ch = img.channels;
  auto sum_block = [&](int x0, int y0, int x1, int y1, int c) {
    std::uint64_t sum = 0;
    for (int y = y0; y < y1; ++y) {
      const std::uint8_t* row =
          img.data.data() + (static_cast<std::size_t>(y) * img.width) * ch + c;
      for (int x = x0; x < x1; ++x) sum += row[static_cast<std::size_t>(x) * ch];
    }
    return static_cast<double>(sum);
  };
  return box_reduce(leaves, patch_side, ch, img.width, img.height, sum_block,
                    255.0);
}

std::vector<PatchToken> extract_patches(const RasterImage& img,
                                        const Quadtree& tree, int patch_side) {
  check_matches_tree(img.width, img.height, tree, "image");
  const auto leaves = ordered_leaves(tree);
  return extract_patches(img, leaves, patch_side);
}

std::vector<PatchToken> copatch_mask(const GrayImage& mask, const Quadtree& tree,
                                     int patch_side) {
  check_matches_tree(mask.width, mask.height, tree, "mask");
  const auto leaves = ordered_leaves(tree);
  auto sum_block = [&](int x0, int y0, int x1, int y1, int) {
    double sum = 0.0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) sum += mask.at(x, y);
    return sum;
  };
  return box_reduce(leaves, patch_side, 1, mask.width, mask.height, sum_block,
                    1.0);
}

namespace {

// Unbiased draw in [0, n); std::uniform_int_distribution differs between
// standard libraries, which would break cache reproducibility.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t reject_below = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= reject_below) return r % n;
  }
}

}  // namespace

std::vector<std::size_t> select_survivors(std::size_t count, std::size_t length,
                                          std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count <= length) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < length; ++i) {
    const auto j = i + static_cast<std::size_t>(draw_below(rng, count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(length);
  std::sort(idx.begin(), idx.end());
  return idx;
}

SequenceGeometry geometry_of(const Quadtree& tree, int patch_side, int channels) {
  return {patch_side, tree.grid_size(), tree.original_width(),
          tree.original_height(), channels};
}

PatchToken make_pad_token(int patch_side, int channels) {
  PatchToken t;
  t.is_pad = true;
  t.pixels.assign(static_cast<std::size_t>(patch_side) * patch_side * channels,
                  0.0f);
  return t;
}

TokenSequence normalize_sequence(std::vector<PatchToken> tokens,
                                 const SequenceGeometry& geometry,
                                 std::size_t length, std::uint64_t seed) {
  if (length == 0) fail(ErrorKind::Config, "sequence length must be >= 1");
  if (std::any_of(tokens.begin(), tokens.end(),
                  [](const PatchToken& t) { return t.is_pad; }))
    fail(ErrorKind::InvalidArgument, "normalize_sequence expects real tokens only");

  TokenSequence seq;
  seq.patch_side = geometry.patch_side;
  seq.grid_size = geometry.grid_size;
  seq.original_width = geometry.original_width;
  seq.original_height = geometry.original_height;
  seq.channels = geometry.channels;
  seq.seed = seed;
  seq.real_count = static_cast<std::uint32_t>(tokens.size());

  if (tokens.size() > length) {
    seq.dropped = static_cast<std::uint32_t>(tokens.size() - length);
    const auto keep = select_survivors(tokens.size(), length, seed);
    seq.tokens.reserve(length);
    for (auto i : keep) seq.tokens.push_back(std::move(tokens[i]));
  } else {
    seq.tokens = std::move(tokens);
    while (seq.tokens.size() < length)
      seq.tokens.push_back(make_pad_token(geometry.patch_side, geometry.channels));
  }
  return seq;
}

TokenSequence uniform_grid_patch(const RasterImage& img, int patch) {
  const int side = std::max(img.width, img.height);
  if (patch < 1 || patch > side)
    fail(ErrorKind::InvalidArgument, "patch " + std::to_string(patch) +
                                         " must be in [1, " +
                                         std::to_string(side) + "]");
  const std::uint32_t grid = next_pow2(static_cast<std::uint32_t>(side));
  if (grid % static_cast<std::uint32_t>(patch) != 0)
    fail(ErrorKind::InvalidArgument, "patch " + std::to_string(patch) +
                                         " does not divide padded side " +
                                         std::to_string(grid));
  const std::uint32_t p = static_cast<std::uint32_t>(patch);
  const std::uint32_t cells = grid / p;
  const int ch = img.channels;

  TokenSequence seq;
  seq.patch_side = patch;
  seq.grid_size = grid;
  seq.original_width = img.width;
  seq.original_height = img.height;
  seq.channels = ch;
  seq.real_count = cells * cells;
  seq.tokens.reserve(std::size_t{cells} * cells);
  for (std::uint32_t cy = 0; cy < cells; ++cy) {
    for (std::uint32_t cx = 0; cx < cells; ++cx) {
      PatchToken t;
      t.morton = morton_encode(cx, cy);
      t.x = cx * p;
      t.y = cy * p;
      t.size = p;
      t.pixels.assign(std::size_t{p} * p * ch, 0.0f);
      for (std::uint32_t dy = 0; dy < p; ++dy) {
        const std::uint64_t y = std::uint64_t{t.y} + dy;
        if (y >= std::uint64_t(img.height)) break;
        for (std::uint32_t dx = 0; dx < p; ++dx) {
          const std::uint64_t x = std::uint64_t{t.x} + dx;
          if (x >= std::uint64_t(img.width)) break;
          for (int c = 0; c < ch; ++c)
            t.pixels[(std::size_t{dy} * p + dx) * ch + c] =
                img.at(int(x), int(y), c) / 255.0f;
        }
      }
      seq.tokens.push_back(std::move(t));
    }
  }
  return seq;
}

GrayImage reconstruct_mask(const TokenSequence& seq,
                           std::span<const float> predictions) {
  const std::size_t block =
      static_cast<std::size_t>(seq.patch_side) * seq.patch_side;
  const std::size_t real = seq.non_pad_count();
  if (predictions.size() != real * block)
    fail(ErrorKind::InvalidArgument,
         "expected " + std::to_string(real) + " predictions of " +
             std::to_string(block) + " values, got " +
             std::to_string(predictions.size()) + " values");

  GrayImage out(seq.original_width, seq.original_height);
  const std::uint64_t side = static_cast<std::uint64_t>(seq.patch_side);
  std::size_t k = 0;
  for (const PatchToken& t : seq.tokens) {
    if (t.is_pad) continue;
    const float* pred = predictions.data() + k * block;
    ++k;
    if (t.size == 0) continue;
    for (std::uint64_t dy = 0; dy < t.size; ++dy) {
      const std::uint64_t y = t.y + dy;
      if (y >= std::uint64_t(out.height)) break;
      const std::uint64_t sy = dy * side / t.size;
      for (std::uint64_t dx = 0; dx < t.size; ++dx) {
        const std::uint64_t x = t.x + dx;
        if (x >= std::uint64_t(out.width)) break;
        out.at(int(x), int(y)) = pred[sy * side + dx * side / t.size];
      }
    }
  }
  return out;
}

std::vector<float> token_predictions(const TokenSequence& seq) {
  const std::size_t block =
      static_cast<std::size_t>(seq.patch_side) * seq.patch_side;
  std::vector<float> out;
  out.reserve(seq.non_pad_count() * block);
  for (const PatchToken& t : seq.tokens) {
    if (t.is_pad) continue;
    for (std::size_t i = 0; i < block; ++i)
      out.push_back(t.pixels[i * seq.channels]);
  }
  return out;
}

double dice_score(const GrayImage& pred, const GrayImage& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    fail(ErrorKind::InvalidArgument, "dice_score needs equal dimensions");
  std::uint64_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] >= 0.5;
    const bool t = truth.data[i] >= 0.5;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * double(both) / double(a + b);
}

}  // namespace apf
