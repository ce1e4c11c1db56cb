#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apf/image.hpp"

namespace apf {

/// Square, power-of-two sized block of the padded grid.
struct Region {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t size = 0;

  friend bool operator==(const Region&, const Region&) = default;
};

struct QuadNode {
  Region region;
  int depth = 0;
  std::uint64_t edge_count = 0;
  // Index of the NW child in Quadtree::nodes(); NE, SW, SE follow it.
  // -1 for leaves.
  std::int32_t first_child = -1;

  bool is_leaf() const { return first_child < 0; }
};

/// Leaf with its Z-order key.
struct Leaf {
  Region region;
  int depth = 0;
  std::uint64_t edge_count = 0;
  std::uint64_t morton = 0;
};

/// Edge counts over arbitrary rectangles in O(1). Coordinates outside the
/// source map count as empty, which is how the zero padding is realized.
class SummedAreaTable {
 public:
  explicit SummedAreaTable(const EdgeMap& edges);

  int width() const { return width_; }
  int height() const { return height_; }

  /// T(x,y): edge pixels in [0,x) x [0,y), with 0 <= x <= width, 0 <= y <= height.
  std::uint64_t at(int x, int y) const {
    return table_[static_cast<std::size_t>(y) * (width_ + 1) + x];
  }

  std::uint64_t count(std::int64_t x0, std::int64_t y0, std::int64_t x1,
                      std::int64_t y1) const;
  std::uint64_t count(const Region& r) const {
    return count(r.x, r.y, std::int64_t{r.x} + r.size,
                 std::int64_t{r.y} + r.size);
  }

 private:
  int width_;
  int height_;
  std::vector<std::uint64_t> table_;
};

SummedAreaTable integral_image(const EdgeMap& edges);

/// Interleaves the bits of x and y; y takes the more significant bit of
/// each pair so quadrants order NW < NE < SW < SE.
std::uint64_t morton_encode(std::uint32_t cx, std::uint32_t cy);

/// Smallest power of two >= n (n >= 1).
std::uint32_t next_pow2(std::uint32_t n);

class Quadtree {
 public:
  /// Wraps a prebuilt node array without validation; used by tests and by
  /// verify_partition negative controls. nodes[0] is the root.
  Quadtree(std::vector<QuadNode> nodes, std::uint32_t grid_size,
           int original_width, int original_height, std::uint64_t split_value,
           int depth_limit);

  const QuadNode& root() const { return nodes_.front(); }
  std::span<const QuadNode> nodes() const { return nodes_; }
  std::span<const QuadNode> children(const QuadNode& n) const;

  std::uint32_t grid_size() const { return grid_size_; }
  int original_width() const { return original_width_; }
  int original_height() const { return original_height_; }
  std::uint64_t split_value() const { return split_value_; }
  int depth_limit() const { return depth_limit_; }

  /// min(H, log2(Z') - 1), floored at 0: leaves never go below 2x2.
  int effective_depth() const { return effective_depth_; }
  /// Z' / 2^effective_depth.
  std::uint32_t min_leaf_size() const { return grid_size_ >> effective_depth_; }

  std::size_t leaf_count() const;

 private:
  std::vector<QuadNode> nodes_;
  std::uint32_t grid_size_;
  int original_width_;
  int original_height_;
  std::uint64_t split_value_;
  int depth_limit_;
  int effective_depth_;
};

int effective_depth(std::uint32_t grid_size, int depth_limit);

/// Splits a node iff edge_count > split_value and depth < effective depth.
Quadtree build_quadtree(const EdgeMap& edges, std::uint64_t split_value,
                        int depth_limit);

/// Leaves in depth-first NW, NE, SW, SE order. Morton keys use cell
/// coordinates on the min_leaf_size() lattice.
std::vector<Leaf> ordered_leaves(const Quadtree& tree);

struct CheckResult {
  bool passed = true;
  std::string counterexample;  // first failure, empty when passed
};

struct PartitionReport {
  CheckResult tiling;     // leaves cover the grid exactly, no overlap
  CheckResult criterion;  // split rule at every node
  CheckResult morton;     // DFS leaf order strictly increasing in Z-order

  bool ok() const { return tiling.passed && criterion.passed && morton.passed; }
};

/// When `edges` is given, stored edge counts are also recounted against it.
PartitionReport verify_partition(const Quadtree& tree,
                                 const EdgeMap* edges = nullptr);

/// Nested {region, depth, edge_count, children} JSON.
std::string tree_to_json(const Quadtree& tree, int indent = -1);

}  // namespace apf
