#include "apf/quadtree.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "json.hpp"

namespace apf {

SummedAreaTable::SummedAreaTable(const EdgeMap& edges)
    : width_(edges.width), height_(edges.height) {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  table_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  for (int y = 0; y < height_; ++y) {
    std::uint64_t row = 0;
    for (int x = 0; x < width_; ++x) {
      row += edges.at(x, y) ? 1 : 0;
      table_[(y + 1) * stride + x + 1] = table_[y * stride + x + 1] + row;
    }
  }
}

std::uint64_t SummedAreaTable::count(std::int64_t x0, std::int64_t y0,
                                     std::int64_t x1, std::int64_t y1) const {
  x0 = std::clamp<std::int64_t>(x0, 0, width_);
  x1 = std::clamp<std::int64_t>(x1, 0, width_);
  y0 = std::clamp<std::int64_t>(y0, 0, height_);
  y1 = std::clamp<std::int64_t>(y1, 0, height_);
  if (x1 <= x0 || y1 <= y0) return 0;
  return at(int(x1), int(y1)) - at(int(x0), int(y1)) - at(int(x1), int(y0)) +
         at(int(x0), int(y0));
}

SummedAreaTable integral_image(const EdgeMap& edges) {
  return SummedAreaTable(edges);
}

namespace {

std::uint64_t spread_bits(std::uint32_t v) {
  std::uint64_t x = v;
  x = (x | (x << 16)) & 0x0000FFFF0000FFFFull;
  x = (x | (x << 8)) & 0x00FF00FF00FF00FFull;
  x = (x | (x << 4)) & 0x0F0F0F0F0F0F0F0Full;
  x = (x | (x << 2)) & 0x3333333333333333ull;
  x = (x | (x << 1)) & 0x5555555555555555ull;
  return x;
}

}  // namespace

std::uint64_t morton_encode(std::uint32_t cx, std::uint32_t cy) {
  return spread_bits(cx) | (spread_bits(cy) << 1);
}

std::uint32_t next_pow2(std::uint32_t n) {
  return n <= 1 ? 1u : std::bit_ceil(n);
}

int effective_depth(std::uint32_t grid_size, int depth_limit) {
  const int floor_depth = std::bit_width(grid_size) - 2;  // log2(Z') - 1
  return std::max(0, std::min(depth_limit, floor_depth));
}

Quadtree::Quadtree(std::vector<QuadNode> nodes, std::uint32_t grid_size,
                   int original_width, int original_height,
                   std::uint64_t split_value, int depth_limit)
    : nodes_(std::move(nodes)),
      grid_size_(grid_size),
      original_width_(original_width),
      original_height_(original_height),
      split_value_(split_value),
      depth_limit_(depth_limit),
      effective_depth_(apf::effective_depth(grid_size, depth_limit)) {
  if (nodes_.empty()) fail(ErrorKind::InvalidArgument, "tree has no root");
  if (!std::has_single_bit(grid_size))
    fail(ErrorKind::InvalidArgument, "grid size must be a power of two");
}

std::span<const QuadNode> Quadtree::children(const QuadNode& n) const {
  if (n.is_leaf()) return {};
  const auto first = static_cast<std::size_t>(n.first_child);
  if (first + 4 > nodes_.size()) return {};
  return std::span<const QuadNode>(nodes_).subspan(first, 4);
}

std::size_t Quadtree::leaf_count() const {
  return ordered_leaves(*this).size();
}

namespace {

void split_recursive(std::vector<QuadNode>& nodes, std::size_t index,
                     const SummedAreaTable& sat, std::uint64_t split_value,
                     int max_depth) {
  const QuadNode node = nodes[index];
  if (node.edge_count <= split_value || node.depth >= max_depth) return;

  const auto first = static_cast<std::int32_t>(nodes.size());
  nodes[index].first_child = first;
  const std::uint32_t half = node.region.size / 2;
  const Region quadrants[4] = {
      {node.region.x, node.region.y, half},
      {node.region.x + half, node.region.y, half},
      {node.region.x, node.region.y + half, half},
      {node.region.x + half, node.region.y + half, half},
  };
  for (const auto& r : quadrants)
    nodes.push_back(QuadNode{r, node.depth + 1, sat.count(r), -1});
  for (std::size_t c = 0; c < 4; ++c)
    split_recursive(nodes, first + c, sat, split_value, max_depth);
}

}  // namespace

Quadtree build_quadtree(const EdgeMap& edges, std::uint64_t split_value,
                        int depth_limit) {
  if (depth_limit < 0)
    fail(ErrorKind::InvalidArgument, "depth limit must be >= 0");
  const std::uint32_t grid = next_pow2(static_cast<std::uint32_t>(
      std::max(edges.width, edges.height)));
  const SummedAreaTable sat(edges);
  const int max_depth = effective_depth(grid, depth_limit);

  std::vector<QuadNode> nodes;
  nodes.push_back(QuadNode{Region{0, 0, grid}, 0, sat.count(Region{0, 0, grid}), -1});
  split_recursive(nodes, 0, sat, split_value, max_depth);
  return Quadtree(std::move(nodes), grid, edges.width, edges.height,
                  split_value, depth_limit);
}

std::vector<Leaf> ordered_leaves(const Quadtree& tree) {
  const std::uint32_t cell = tree.min_leaf_size();
  const auto nodes = tree.nodes();
  std::vector<Leaf> leaves;
  std::vector<std::size_t> stack{0};
  std::size_t visits = 0;
  while (!stack.empty() && visits++ <= nodes.size()) {
    const QuadNode& n = nodes[stack.back()];
    stack.pop_back();
    const auto kids = tree.children(n);
    if (kids.empty()) {
      leaves.push_back(Leaf{n.region, n.depth, n.edge_count,
                            morton_encode(n.region.x / cell, n.region.y / cell)});
      continue;
    }
    for (int c = 3; c >= 0; --c) stack.push_back(n.first_child + c);
  }
  return leaves;
}

namespace {

std::string describe(const Region& r) {
  std::ostringstream s;
  s << "(x=" << r.x << ", y=" << r.y << ", size=" << r.size << ")";
  return s.str();
}

bool overlaps(const Region& a, const Region& b) {
  return std::uint64_t{a.x} < std::uint64_t{b.x} + b.size &&
         std::uint64_t{b.x} < std::uint64_t{a.x} + a.size &&
         std::uint64_t{a.y} < std::uint64_t{b.y} + b.size &&
         std::uint64_t{b.y} < std::uint64_t{a.y} + a.size;
}

CheckResult check_tiling(const Quadtree& tree, const std::vector<Leaf>& leaves) {
  const std::uint32_t grid = tree.grid_size();
  const auto root = tree.root().region;
  if (root != Region{0, 0, grid})
    return {false, "root region " + describe(root) + " is not the full grid"};

  bool aligned = true;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Region& r = leaves[i].region;
    if (r.size == 0 || std::uint64_t{r.x} + r.size > grid ||
        std::uint64_t{r.y} + r.size > grid)
      return {false, "leaf #" + std::to_string(i) + " " + describe(r) +
                         " lies outside the grid"};
    if (!std::has_single_bit(r.size) || r.x % r.size || r.y % r.size)
      aligned = false;
  }

  if (aligned) {
    // Aligned power-of-two blocks are contiguous Z-order intervals at pixel
    // resolution, so sorting them reduces overlap detection to neighbours.
    struct Span {
      std::uint64_t begin, end;
      std::size_t leaf;
    };
    std::vector<Span> spans;
    spans.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Region& r = leaves[i].region;
      const std::uint64_t begin = morton_encode(r.x, r.y);
      spans.push_back({begin, begin + std::uint64_t{r.size} * r.size, i});
    }
    std::sort(spans.begin(), spans.end(),
              [](const Span& a, const Span& b) { return a.begin < b.begin; });
    std::uint64_t covered = 0;
    for (std::size_t k = 0; k < spans.size(); ++k) {
      if (k > 0 && spans[k].begin < spans[k - 1].end) {
        const auto a = spans[k - 1].leaf, b = spans[k].leaf;
        return {false, "leaves #" + std::to_string(a) + " " +
                           describe(leaves[a].region) + " and #" +
                           std::to_string(b) + " " + describe(leaves[b].region) +
                           " overlap"};
      }
      if (spans[k].begin != covered)
        return {false, "gap before leaf #" + std::to_string(spans[k].leaf) + " " +
                           describe(leaves[spans[k].leaf].region)};
      covered = spans[k].end;
    }
    if (covered != std::uint64_t{grid} * grid)
      return {false, "leaves cover " + std::to_string(covered) + " of " +
                         std::to_string(std::uint64_t{grid} * grid) + " pixels"};
  } else {
    for (std::size_t i = 0; i < leaves.size(); ++i)
      for (std::size_t j = i + 1; j < leaves.size(); ++j)
        if (overlaps(leaves[i].region, leaves[j].region))
          return {false, "leaves #" + std::to_string(i) + " " +
                             describe(leaves[i].region) + " and #" +
                             std::to_string(j) + " " +
                             describe(leaves[j].region) + " overlap"};
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Region& r = leaves[i].region;
      if (!std::has_single_bit(r.size) || r.x % r.size || r.y % r.size)
        return {false, "leaf #" + std::to_string(i) + " " + describe(r) +
                           " is not aligned to the quadtree lattice"};
    }
  }

  // Parent/child geometry.
  for (const QuadNode& n : tree.nodes()) {
    if (n.is_leaf()) continue;
    const auto kids = tree.children(n);
    if (kids.size() != 4)
      return {false, "node " + describe(n.region) + " has a dangling child index"};
    const std::uint32_t half = n.region.size / 2;
    const Region expect[4] = {{n.region.x, n.region.y, half},
                              {n.region.x + half, n.region.y, half},
                              {n.region.x, n.region.y + half, half},
                              {n.region.x + half, n.region.y + half, half}};
    for (int c = 0; c < 4; ++c) {
      if (kids[c].region != expect[c] || kids[c].depth != n.depth + 1)
        return {false, "child " + std::to_string(c) + " of " +
                           describe(n.region) + " is " +
                           describe(kids[c].region) + " at depth " +
                           std::to_string(kids[c].depth)};
    }
  }
  return {};
}

CheckResult check_criterion(const Quadtree& tree, const EdgeMap* edges) {
  const std::uint64_t v = tree.split_value();
  const int max_depth = tree.effective_depth();
  std::optional<SummedAreaTable> sat;
  if (edges) sat.emplace(*edges);
  for (const QuadNode& n : tree.nodes()) {
    if (sat) {
      const auto actual = sat->count(n.region);
      if (actual != n.edge_count)
        return {false, "node " + describe(n.region) + " stores edge_count " +
                           std::to_string(n.edge_count) + " but contains " +
                           std::to_string(actual)};
    }
    if (!n.is_leaf()) {
      if (n.edge_count <= v)
        return {false, "internal node " + describe(n.region) + " has edge_count " +
                           std::to_string(n.edge_count) + " <= v=" +
                           std::to_string(v)};
      if (n.depth >= max_depth)
        return {false, "internal node " + describe(n.region) + " at depth " +
                           std::to_string(n.depth) + " >= depth limit " +
                           std::to_string(max_depth)};
    } else if (n.edge_count > v && n.depth != max_depth) {
      return {false, "leaf " + describe(n.region) + " has edge_count " +
                         std::to_string(n.edge_count) + " > v=" +
                         std::to_string(v) + " above the depth limit"};
    }
  }
  return {};
}

CheckResult check_morton(const std::vector<Leaf>& leaves) {
  for (std::size_t i = 1; i < leaves.size(); ++i) {
    if (leaves[i].morton <= leaves[i - 1].morton)
      return {false, "leaf #" + std::to_string(i) + " " +
                         describe(leaves[i].region) + " has Morton code " +
                         std::to_string(leaves[i].morton) + " <= predecessor " +
                         std::to_string(leaves[i - 1].morton)};
  }
  return {};
}

nlohmann::ordered_json node_json(const Quadtree& tree, const QuadNode& n) {
  nlohmann::ordered_json j;
  j["x"] = n.region.x;
  j["y"] = n.region.y;
  j["size"] = n.region.size;
  j["depth"] = n.depth;
  j["edge_count"] = n.edge_count;
  const auto kids = tree.children(n);
  if (!kids.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& k : kids) arr.push_back(node_json(tree, k));
    j["children"] = std::move(arr);
  }
  return j;
}

}  // namespace

PartitionReport verify_partition(const Quadtree& tree, const EdgeMap* edges) {
  const auto leaves = ordered_leaves(tree);
  PartitionReport report;
  report.tiling = check_tiling(tree, leaves);
  report.criterion = check_criterion(tree, edges);
  report.morton = check_morton(leaves);
  return report;
}

std::string tree_to_json(const Quadtree& tree, int indent) {
  nlohmann::ordered_json j;
  j["grid_size"] = tree.grid_size();
  j["original_width"] = tree.original_width();
  j["original_height"] = tree.original_height();
  j["split_value"] = tree.split_value();
  j["depth_limit"] = tree.depth_limit();
  j["effective_depth"] = tree.effective_depth();
  j["leaf_count"] = tree.leaf_count();
  j["root"] = node_json(tree, tree.root());
  return j.dump(indent);
}

}  // namespace apf
