#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "abe_cities/segment_tree.hpp"

using namespace abe_cities::segtree;

namespace {

std::set<std::string> labels(const SegmentTree& t, const NodeSet& s) {
  std::set<std::string> out;
  for (auto n : s) out.insert(t.node(n).id.label());
  return out;
}

std::set<std::uint32_t> covered_points(const SegmentTree& t, const NodeSet& s) {
  std::set<std::uint32_t> pts;
  for (auto n : s)
    for (auto p = t.node(n).lo; p <= t.node(n).hi; ++p) pts.insert(p);
  return pts;
}

bool is_ancestor(const SegmentTree& t, NodeIndex a, NodeIndex d) {
  for (NodeIndex n = t.node(d).parent; n != kNoNode; n = t.node(n).parent)
    if (n == a) return true;
  return false;
}

// Minimum number of tree nodes that tile [lo, hi] exactly, by dynamic
// programming over prefix lengths.
std::size_t brute_min_cover(const SegmentTree& t, Interval iv) {
  std::vector<std::size_t> best(iv.hi - iv.lo + 2, SIZE_MAX);
  best[0] = 0;
  for (std::uint32_t end = iv.lo; end <= iv.hi; ++end) {
    for (const Node& n : t.nodes()) {
      if (n.hi != end || n.lo < iv.lo) continue;
      const std::size_t before = n.lo - iv.lo;
      if (best[before] != SIZE_MAX) best[end - iv.lo + 1] = std::min(best[end - iv.lo + 1], best[before] + 1);
    }
  }
  return best.back();
}

}  // namespace

TEST(SegmentTree, SevenLeafTreeShape) {
  auto t = SegmentTree::build(7);
  EXPECT_EQ(t.leaf_count(), 7u);
  EXPECT_EQ(t.internal_count(), 6u);
  EXPECT_EQ(t.size(), 13u);
}

TEST(SegmentTree, SinglePointTreeIsOneLeaf) {
  auto t = SegmentTree::build(1);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_TRUE(t.node(t.root()).is_leaf());
  EXPECT_EQ(t.point_rep(1), NodeSet({t.root()}));
  EXPECT_EQ(t.interval_rep({1, 1}), NodeSet({t.root()}));
}

TEST(SegmentTree, EightLeafTreeIsComplete) {
  auto t = SegmentTree::build(8);
  EXPECT_EQ(t.leaf_count(), 8u);
  EXPECT_EQ(t.internal_count(), 7u);
  EXPECT_EQ(t.depth(), 3u);
  auto rep = t.point_rep(1);
  EXPECT_EQ(rep.size(), 4u);
  for (auto n : rep) EXPECT_TRUE(n == t.leaf(1) || is_ancestor(t, n, t.leaf(1)));
}

TEST(SegmentTree, RejectsEmptyRange) { EXPECT_THROW(SegmentTree::build(0), std::invalid_argument); }

TEST(SegmentTree, PointRepOfFiveInSevenLeafTree) {
  auto t = SegmentTree::build(7);
  auto rep = t.point_rep(5);
  EXPECT_EQ(rep.size(), 4u);
  // root, [5,7], [5,6], leaf 5
  std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;
  for (auto n : rep) spans.emplace_back(t.node(n).lo, t.node(n).hi);
  std::sort(spans.begin(), spans.end());
  EXPECT_EQ(spans, (std::vector<std::pair<std::uint32_t, std::uint32_t>>{{1, 7}, {5, 5}, {5, 6}, {5, 7}}));
  EXPECT_EQ(labels(t, rep), (std::set<std::string>{"n3_1", "n2_2", "n1_3", "l5"}));
}

TEST(SegmentTree, IntervalRepThreeToSeven) {
  auto t = SegmentTree::build(7);
  auto rep = t.interval_rep({3, 7});
  ASSERT_EQ(rep.size(), 2u);
  std::set<std::pair<std::uint32_t, std::uint32_t>> spans;
  for (auto n : rep) spans.emplace(t.node(n).lo, t.node(n).hi);
  EXPECT_EQ(spans, (std::set<std::pair<std::uint32_t, std::uint32_t>>{{3, 4}, {5, 7}}));
  EXPECT_EQ(labels(t, rep), (std::set<std::string>{"n1_2", "n2_2"}));
}

TEST(SegmentTree, FullRangeIsRoot) {
  auto t = SegmentTree::build(7);
  EXPECT_EQ(t.interval_rep({1, 7}), NodeSet({t.root()}));
}

TEST(SegmentTree, SingletonIntervalIsLeaf) {
  auto t = SegmentTree::build(8);
  EXPECT_EQ(t.interval_rep({2, 2}), NodeSet({t.leaf(2)}));
}

TEST(SegmentTree, RejectsOutOfRangeQueries) {
  auto t = SegmentTree::build(7);
  EXPECT_THROW(t.point_rep(0), std::out_of_range);
  EXPECT_THROW(t.point_rep(8), std::out_of_range);
  EXPECT_THROW(t.interval_rep({0, 3}), std::out_of_range);
  EXPECT_THROW(t.interval_rep({3, 8}), std::out_of_range);
  EXPECT_THROW(t.interval_rep({5, 4}), std::out_of_range);
}

TEST(SegmentTree, StructuralInvariants) {
  for (std::uint32_t rho = 1; rho <= 300; ++rho) {
    auto t = SegmentTree::build(rho);
    ASSERT_EQ(t.leaf_count(), rho);
    ASSERT_EQ(t.size(), 2 * rho - 1);
    std::set<NodeId> ids;
    for (NodeIndex n = 0; n < t.size(); ++n) {
      const Node& node = t.node(n);
      ASSERT_TRUE(ids.insert(node.id).second);
      ASSERT_EQ(t.find(node.id), n);
      if (node.is_leaf()) {
        ASSERT_EQ(node.right, kNoNode);
        ASSERT_EQ(node.lo, node.hi);
        ASSERT_EQ(t.leaf(node.lo), n);
      } else {
        ASSERT_NE(node.right, kNoNode);
        const Node& l = t.node(node.left);
        const Node& r = t.node(node.right);
        ASSERT_EQ(l.parent, n);
        ASSERT_EQ(r.parent, n);
        ASSERT_EQ(node.lo, l.lo);
        ASSERT_EQ(l.hi + 1, r.lo);
        ASSERT_EQ(r.hi, node.hi);
      }
    }
    ASSERT_EQ(t.node(t.root()).lo, 1u);
    ASSERT_EQ(t.node(t.root()).hi, rho);
  }
}

TEST(SegmentTree, IdsStableAcrossRanges) {
  // A node present in two trees covers the same points, clipped to the range.
  auto small = SegmentTree::build(13);
  auto large = SegmentTree::build(16);
  for (const Node& n : small.nodes()) {
    auto m = large.find(n.id);
    if (m == kNoNode) continue;
    EXPECT_EQ(large.node(m).lo, n.lo);
    EXPECT_EQ(std::min<std::uint32_t>(large.node(m).hi, 13), n.hi);
  }
  auto a = SegmentTree::build(13);
  for (NodeIndex n = 0; n < a.size(); ++n) EXPECT_EQ(a.node(n).id, small.node(n).id);
}

TEST(SegmentTreeProperty, IntersectionExhaustive) {
  for (std::uint32_t rho = 1; rho <= 64; ++rho) {
    auto t = SegmentTree::build(rho);
    std::vector<NodeSet> points;
    for (std::uint32_t v = 1; v <= rho; ++v) points.push_back(t.point_rep(v));
    for (std::uint32_t lo = 1; lo <= rho; ++lo)
      for (std::uint32_t hi = lo; hi <= rho; ++hi) {
        auto iv = t.interval_rep({lo, hi});
        for (std::uint32_t v = 1; v <= rho; ++v) {
          const auto common = points[v - 1].intersect(iv);
          const bool inside = lo <= v && v <= hi;
          ASSERT_EQ(!common.empty(), inside) << rho << " " << v << " [" << lo << "," << hi << "]";
          if (inside) ASSERT_EQ(common.size(), 1u);
        }
      }
  }
}

TEST(SegmentTreeProperty, DisjointIntervalsHaveDisjointReps) {
  for (std::uint32_t rho = 1; rho <= 32; ++rho) {
    auto t = SegmentTree::build(rho);
    std::vector<std::pair<Interval, NodeSet>> reps;
    for (std::uint32_t lo = 1; lo <= rho; ++lo)
      for (std::uint32_t hi = lo; hi <= rho; ++hi) reps.push_back({{lo, hi}, t.interval_rep({lo, hi})});
    for (const auto& [a, ra] : reps)
      for (const auto& [b, rb] : reps)
        if (a.hi < b.lo || b.hi < a.lo) ASSERT_FALSE(ra.intersects(rb));
  }
}

TEST(SegmentTreeProperty, IntervalRepIsExactAntichainAndMinimal) {
  for (std::uint32_t rho = 1; rho <= 40; ++rho) {
    auto t = SegmentTree::build(rho);
    for (std::uint32_t lo = 1; lo <= rho; ++lo)
      for (std::uint32_t hi = lo; hi <= rho; ++hi) {
        auto rep = t.interval_rep({lo, hi});
        auto pts = covered_points(t, rep);
        ASSERT_EQ(pts.size(), hi - lo + 1);
        ASSERT_EQ(*pts.begin(), lo);
        ASSERT_EQ(*pts.rbegin(), hi);
        for (auto a : rep)
          for (auto b : rep) ASSERT_FALSE(is_ancestor(t, a, b));
        ASSERT_EQ(rep.size(), brute_min_cover(t, {lo, hi}));
      }
  }
}

TEST(SegmentTreeProperty, SizeBounds) {
  std::mt19937 gen(7);
  auto check = [](const SegmentTree& t, std::uint32_t lo, std::uint32_t hi) {
    const std::uint32_t k = ceil_log2(t.range_max());
    ASSERT_LE(t.point_rep(lo).size(), k + 1);
    ASSERT_LE(t.interval_rep({lo, hi}).size(), std::max<std::uint32_t>(1, 2 * k));
  };
  for (std::uint32_t rho = 1; rho <= 1024; ++rho) {
    auto t = SegmentTree::build(rho);
    check(t, 1, rho);
    check(t, rho, rho);
    if (rho > 2) check(t, 2, rho - 1);
    std::uniform_int_distribution<std::uint32_t> d(1, rho);
    for (int i = 0; i < 20; ++i) {
      auto a = d(gen), b = d(gen);
      check(t, std::min(a, b), std::max(a, b));
    }
  }
}
