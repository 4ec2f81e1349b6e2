#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace abe_cities::segtree {

using NodeIndex = std::uint32_t;
inline constexpr NodeIndex kNoNode = std::numeric_limits<NodeIndex>::max();

// Position of a node in the complete binary tree over [1, 2^k]: level 0 holds
// the leaves, index is 1-based within the level. Ids do not depend on
// range_max beyond clipping, which keeps attribute names stable.
struct NodeId {
  std::uint32_t level = 0;
  std::uint32_t index = 0;

  auto operator<=>(const NodeId&) const = default;

  // "l5" for leaves, "n<level>_<index>" for internal nodes.
  std::string label() const;
};

struct Node {
  NodeId id;
  std::uint32_t lo = 0;  // first covered point
  std::uint32_t hi = 0;  // last covered point
  NodeIndex parent = kNoNode;
  NodeIndex left = kNoNode;
  NodeIndex right = kNoNode;

  bool is_leaf() const { return left == kNoNode; }
  bool covers(std::uint32_t point) const { return lo <= point && point <= hi; }
};

// Closed integer interval [lo, hi].
struct Interval {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  bool contains(std::uint32_t p) const { return lo <= p && p <= hi; }
  bool operator==(const Interval&) const = default;
};

// Sorted, duplicate-free set of node indices.
class NodeSet {
 public:
  NodeSet() = default;
  explicit NodeSet(std::vector<NodeIndex> members);

  std::span<const NodeIndex> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(NodeIndex n) const;
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  NodeSet intersect(const NodeSet& other) const;
  bool intersects(const NodeSet& other) const;

  bool operator==(const NodeSet&) const = default;

 private:
  std::vector<NodeIndex> members_;
};

// Discrete segment tree over [1, range_max].
//
// The shape is the complete tree over [1, 2^ceil(log2 range_max)] with every
// subtree lying entirely beyond range_max removed, and every node left with a
// single child replaced by that child. The result is a full binary tree with
// exactly range_max leaves whose node ids depend only on range_max. Nodes are
// stored in level order starting from the root.
//
// Immutable once built.
class SegmentTree {
 public:
  // Throws std::invalid_argument when range_max == 0.
  static SegmentTree build(std::uint32_t range_max);

  std::uint32_t range_max() const { return range_max_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const { return range_max_; }
  std::size_t internal_count() const { return nodes_.size() - range_max_; }
  // Number of edges on the longest root-to-leaf path.
  std::uint32_t depth() const { return depth_; }

  NodeIndex root() const { return 0; }
  const Node& node(NodeIndex n) const { return nodes_.at(n); }
  std::span<const Node> nodes() const { return nodes_; }
  NodeIndex leaf(std::uint32_t point) const;
  // Lookup by id; kNoNode when the id is not part of this tree.
  NodeIndex find(NodeId id) const;

  // Root-to-leaf path of `point`. Throws std::out_of_range outside [1, range_max].
  NodeSet point_rep(std::uint32_t point) const;
  // Minimal exact cover of `interval` by tree nodes. Throws std::out_of_range
  // for empty or out-of-range intervals.
  NodeSet interval_rep(Interval interval) const;

 private:
  SegmentTree() = default;

  std::uint32_t range_max_ = 0;
  std::uint32_t depth_ = 0;
  std::vector<Node> nodes_;
  std::vector<NodeIndex> leaf_of_;  // leaf_of_[p - 1]
};

// ceil(log2(n)) for n >= 1.
std::uint32_t ceil_log2(std::uint64_t n);

}  // namespace abe_cities::segtree
