#include "abe_cities/segment_tree.hpp"

#include <algorithm>
#include <deque>
#include <iterator>
#include <stdexcept>

namespace abe_cities::segtree {

std::string NodeId::label() const {
  if (level == 0) return "l" + std::to_string(index);
  return "n" + std::to_string(level) + "_" + std::to_string(index);
}

NodeSet::NodeSet(std::vector<NodeIndex> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool NodeSet::contains(NodeIndex n) const {
  return std::binary_search(members_.begin(), members_.end(), n);
}

NodeSet NodeSet::intersect(const NodeSet& other) const {
  std::vector<NodeIndex> out;
  std::set_intersection(members_.begin(), members_.end(), other.members_.begin(),
                        other.members_.end(), std::back_inserter(out));
  return NodeSet(std::move(out));
}

bool NodeSet::intersects(const NodeSet& other) const {
  auto a = members_.begin();
  auto b = other.members_.begin();
  while (a != members_.end() && b != other.members_.end()) {
    if (*a == *b) return true;
    if (*a < *b) ++a; else ++b;
  }
  return false;
}

std::uint32_t ceil_log2(std::uint64_t n) {
  std::uint32_t k = 0;
  while ((std::uint64_t{1} << k) < n) ++k;
  return k;
}

namespace {

std::uint64_t first_point(NodeId id) { return ((std::uint64_t{id.index} - 1) << id.level) + 1; }

// Descend through nodes of the complete tree whose right half lies beyond
// range_max; such nodes collapse onto their left child.
NodeId effective(NodeId id, std::uint32_t range_max) {
  while (id.level > 0) {
    const std::uint64_t right_start = first_point(id) + (std::uint64_t{1} << (id.level - 1));
    if (right_start <= range_max) break;
    id = NodeId{id.level - 1, 2 * id.index - 1};
  }
  return id;
}

}  // namespace

SegmentTree SegmentTree::build(std::uint32_t range_max) {
  if (range_max == 0) throw std::invalid_argument("segment tree range must be at least 1");

  SegmentTree tree;
  tree.range_max_ = range_max;
  tree.leaf_of_.assign(range_max, kNoNode);
  tree.nodes_.reserve(2 * std::size_t{range_max} - 1);

  struct Pending {
    NodeId id;
    NodeIndex parent;
    bool is_right;
    std::uint32_t depth;
  };
  std::deque<Pending> queue;
  queue.push_back({effective(NodeId{ceil_log2(range_max), 1}, range_max), kNoNode, false, 0});

  while (!queue.empty()) {
    Pending p = queue.front();
    queue.pop_front();

    const auto self = static_cast<NodeIndex>(tree.nodes_.size());
    Node node;
    node.id = p.id;
    node.parent = p.parent;
    node.lo = static_cast<std::uint32_t>(first_point(p.id));
    node.hi = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(first_point(p.id) + (std::uint64_t{1} << p.id.level) - 1, range_max));
    tree.nodes_.push_back(node);
    tree.depth_ = std::max(tree.depth_, p.depth);

    if (p.parent != kNoNode) {
      Node& parent = tree.nodes_[p.parent];
      (p.is_right ? parent.right : parent.left) = self;
    }

    if (p.id.level == 0) {
      tree.leaf_of_[node.lo - 1] = self;
      continue;
    }
    const NodeId left{p.id.level - 1, 2 * p.id.index - 1};
    const NodeId right{p.id.level - 1, 2 * p.id.index};
    queue.push_back({effective(left, range_max), self, false, p.depth + 1});
    queue.push_back({effective(right, range_max), self, true, p.depth + 1});
  }
  return tree;
}

NodeIndex SegmentTree::leaf(std::uint32_t point) const {
  if (point < 1 || point > range_max_)
    throw std::out_of_range("point " + std::to_string(point) + " outside [1," +
                            std::to_string(range_max_) + "]");
  return leaf_of_[point - 1];
}

NodeIndex SegmentTree::find(NodeId id) const {
  if (id.index == 0) return kNoNode;
  const std::uint64_t lo = first_point(id);
  if (lo > range_max_) return kNoNode;
  NodeIndex n = leaf_of_[lo - 1];
  // Walk up from the leftmost covered leaf; the id must appear on that path.
  while (n != kNoNode) {
    if (nodes_[n].id == id) return n;
    if (nodes_[n].id.level > id.level) return kNoNode;
    n = nodes_[n].parent;
  }
  return kNoNode;
}

NodeSet SegmentTree::point_rep(std::uint32_t point) const {
  std::vector<NodeIndex> path;
  for (NodeIndex n = leaf(point); n != kNoNode; n = nodes_[n].parent) path.push_back(n);
  return NodeSet(std::move(path));
}

NodeSet SegmentTree::interval_rep(Interval interval) const {
  if (interval.lo < 1 || interval.lo > interval.hi || interval.hi > range_max_)
    throw std::out_of_range("interval [" + std::to_string(interval.lo) + "," +
                            std::to_string(interval.hi) + "] is empty or outside [1," +
                            std::to_string(range_max_) + "]");
  std::vector<NodeIndex> cover;
  std::vector<NodeIndex> stack{root()};
  while (!stack.empty()) {
    const NodeIndex n = stack.back();
    stack.pop_back();
    const Node& node = nodes_[n];
    if (node.hi < interval.lo || node.lo > interval.hi) continue;
    if (interval.lo <= node.lo && node.hi <= interval.hi) {
      cover.push_back(n);
      continue;
    }
    stack.push_back(node.right);
    stack.push_back(node.left);
  }
  return NodeSet(std::move(cover));
}

}  // namespace abe_cities::segtree
