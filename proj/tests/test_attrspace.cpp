#include <gtest/gtest.h>

#include "abe_cities/attrspace.hpp"

using namespace abe_cities;
using namespace abe_cities::attrspace;
using citysim::CityModel;
using citysim::Street;
using kpabe::Partition;
using kpabe::PolicyNode;

namespace {

CityModel one_street(std::uint32_t id = 10, std::uint32_t rho = 7) {
  return CityModel("one", {Street{id, rho, {{0, 0}, {70, 0}}}});
}

std::set<std::string> names(const AttributeSpace& s, const AttributeSet& attrs) {
  std::set<std::string> out;
  for (auto a : attrs) out.insert(s.universe().name(a));
  return out;
}

}  // namespace

TEST(BuildUniverse, CountsPerRepresentation) {
  TimeConfig t{30};
  auto basic = AttributeSpace::build(one_street(), Representation::basic(), t);
  EXPECT_EQ(basic.universe().count(Partition::road), 7u);
  auto seg = AttributeSpace::build(one_street(), Representation::segment_tree(), t);
  EXPECT_EQ(seg.universe().count(Partition::road), 13u);
  auto pool = AttributeSpace::build(one_street(), Representation::attribute_pool(5), t);
  EXPECT_EQ(pool.universe().count(Partition::road), 65u);
  EXPECT_EQ(seg.universe().count(Partition::time), 59u);  // 2 * 30 - 1
  EXPECT_TRUE(seg.universe().find("s10_n2_2"));
  EXPECT_TRUE(pool.universe().find("s10_n2_2@5"));
  EXPECT_TRUE(basic.universe().find("s10_l7"));
  EXPECT_TRUE(seg.universe().find("x_l30"));
}

TEST(BuildUniverse, RejectsBadConfigurations) {
  EXPECT_THROW(AttributeSpace::build(one_street(), Representation::attribute_pool(0), {30}), AttrSpaceError);
  EXPECT_THROW(AttributeSpace::build(one_street(), {RepresentationKind::basic, 3}, {30}), AttrSpaceError);
  EXPECT_THROW(AttributeSpace::build(CityModel{}, Representation::basic(), {30}), AttrSpaceError);
  EXPECT_THROW(AttributeSpace::build(one_street(), Representation::basic(), {0}), AttrSpaceError);
  EXPECT_THROW(Representation::parse("quadtree"), AttrSpaceError);
  EXPECT_EQ(Representation::parse("pool", 3), Representation::attribute_pool(3));
}

TEST(Labels, SizesPerRepresentation) {
  TimeConfig t{30};
  auto basic = AttributeSpace::build(one_street(), Representation::basic(), t);
  EXPECT_EQ(basic.label_for_device({10, 5}, 3).road.size(), 1u);
  auto seg = AttributeSpace::build(one_street(), Representation::segment_tree(), t);
  auto label = seg.label_for_device({10, 5}, 3);
  EXPECT_EQ(names(seg, label.road), (std::set<std::string>{"s10_n3_1", "s10_n2_2", "s10_n1_3", "s10_l5"}));
  EXPECT_EQ(label.time.size(), seg.time_tree().point_rep(3).size());
  EXPECT_EQ(label.all().size(), label.road.size() + label.time.size());
  auto pool = AttributeSpace::build(one_street(), Representation::attribute_pool(5), t);
  EXPECT_EQ(pool.label_for_device({10, 5}, 3).road.size(), 20u);
  EXPECT_THROW(seg.label_for_device({10, 8}, 3), AttrSpaceError);
  EXPECT_THROW(seg.label_for_device({10, 1}, 31), AttrSpaceError);
  EXPECT_THROW(seg.label_for_device({99, 1}, 1), AttrSpaceError);
}

TEST(Policies, FullStreetIsTheRootNode) {
  auto seg = AttributeSpace::build(one_street(), Representation::segment_tree(), {30});
  auto p = seg.policy_for_user({{{10, {1, 7}}}, {1, 30}});
  EXPECT_EQ(p.to_string(seg.universe()), "(s10_n3_1 AND x_n5_1)");
}

TEST(Policies, ConsecutiveSegmentsFormPointInIntervalSubtree) {
  auto seg = AttributeSpace::build(one_street(), Representation::segment_tree(), {30});
  auto p = seg.policy_for_user({{{10, {3, 7}}}, {1, 8}});
  EXPECT_EQ(p.to_string(seg.universe()), "((s10_n2_2 OR s10_n1_2) AND x_n3_1)");
  EXPECT_EQ(names(seg, seg.revocation_attribute_set(p)), (std::set<std::string>{"s10_n1_2", "s10_n2_2"}));
}

TEST(Policies, BasicIsAnOrOfSegments) {
  auto basic = AttributeSpace::build(one_street(), Representation::basic(), {30});
  auto p = basic.policy_for_user({{{10, {2, 4}}}, {5, 5}});
  EXPECT_EQ(p.to_string(basic.universe()), "((s10_l2 OR s10_l3 OR s10_l4) AND x_l5)");
  EXPECT_EQ(basic.revocation_attribute_set(p).size(), 3u);
  for (auto a : basic.revocation_attribute_set(p)) EXPECT_EQ(basic.universe().partition(a), Partition::road);
}

TEST(Policies, RejectsBadSpecs) {
  auto seg = AttributeSpace::build(one_street(), Representation::segment_tree(), {30});
  EXPECT_THROW(seg.policy_for_user({{}, {1, 3}}), AttrSpaceError);
  EXPECT_THROW(seg.policy_for_user({{{10, {1, 2}}}, {5, 4}}), AttrSpaceError);
  EXPECT_THROW(seg.policy_for_user({{{10, {1, 8}}}, {1, 4}}), AttrSpaceError);
  EXPECT_THROW(seg.policy_for_user({{{10, {1, 2}}}, {1, 31}}), AttrSpaceError);
  EXPECT_THROW(seg.policy_for_user({{{11, {1, 2}}}, {1, 3}}), AttrSpaceError);
}

TEST(Pool, LeastUsedReplicaBalancesIdenticalRoutes) {
  auto pool = AttributeSpace::build(one_street(), Representation::attribute_pool(2), {30});
  PolicySpec spec{{{10, {3, 7}}}, {1, 8}};
  std::vector<AccessPolicy> keys;
  for (int i = 0; i < 4; ++i) keys.push_back(pool.policy_for_user(spec));
  for (auto base : {"s10_n2_2", "s10_n1_2"})
    for (auto w : {"@1", "@2"}) EXPECT_EQ(pool.pool().count(pool.universe().at(std::string(base) + w)), 2);
  // First two keys take disjoint replicas.
  EXPECT_TRUE(affected_users(0, {{0, pool.revocation_attribute_set(keys[0])},
                                 {1, pool.revocation_attribute_set(keys[1])}})
                  .empty());
  pool.release_policy(keys[0]);
  EXPECT_EQ(pool.pool().count(pool.universe().at("s10_n2_2@1")), 1);
  EXPECT_THROW(pool.pool().release(pool.universe().at("s10_n1_1@1")), AttrSpaceError);
}

namespace {

// Largest counter gap between replicas of one node.
std::int64_t replica_gap(const AttributeSpace& space) {
  std::map<std::pair<std::uint32_t, segtree::NodeIndex>, std::pair<std::int64_t, std::int64_t>> range;
  for (auto id : space.universe().ids(Partition::road)) {
    const auto& o = space.origin(id);
    const auto c = space.pool().count(id);
    auto [it, fresh] = range.try_emplace({o.street, o.node}, c, c);
    it->second.first = std::min(it->second.first, c);
    it->second.second = std::max(it->second.second, c);
  }
  std::int64_t gap = 0;
  for (const auto& [node, mm] : range) gap = std::max(gap, mm.second - mm.first);
  return gap;
}

}  // namespace

TEST(Pool, IssuanceKeepsReplicasWithinOne) {
  auto city = citysim::generate_grid_city(2, 2, 80, 10);
  auto pool = AttributeSpace::build(city, Representation::attribute_pool(3), {30});
  auto rng = Rng::seeded(6);
  for (int step = 0; step < 40; ++step) {
    const std::uint32_t street = 1 + static_cast<std::uint32_t>(rng.below(12));
    const std::uint32_t lo = 1 + static_cast<std::uint32_t>(rng.below(8));
    const std::uint32_t hi = lo + static_cast<std::uint32_t>(rng.below(9 - lo));
    pool.policy_for_user({{{street, {lo, hi}}}, {1, 30}});
    ASSERT_LE(replica_gap(pool), 1);
  }
}

// Revocations can open gaps: revoking both holders of replica 1 among six
// identical keys leaves 0/2/2. Issuance never widens a gap, and counters
// always equal issued minus revoked keys per replica.
TEST(Pool, CountersTrackLiveKeysUnderIssueAndRevoke) {
  auto city = citysim::generate_grid_city(2, 2, 80, 10);
  auto pool = AttributeSpace::build(city, Representation::attribute_pool(3), {30});
  auto rng = Rng::seeded(7);
  std::vector<AccessPolicy> live;
  PolicySpec spec{{{1, {2, 7}}, {5, {1, 8}}}, {2, 20}};
  for (int step = 0; step < 80; ++step) {
    if (!live.empty() && rng.below(3) == 0) {
      const std::size_t k = rng.below(live.size());
      pool.release_policy(live[k]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      const auto before = replica_gap(pool);
      live.push_back(pool.policy_for_user(spec));
      ASSERT_LE(replica_gap(pool), std::max<std::int64_t>(before, 1));
    }
    std::map<AttributeId, std::int64_t> tally;
    for (const auto& p : live)
      for (auto a : pool.revocation_attribute_set(p)) ++tally[a];
    for (auto id : pool.universe().ids(Partition::road)) ASSERT_EQ(pool.pool().count(id), tally[id]);
  }

  auto fresh = AttributeSpace::build(city, Representation::attribute_pool(3), {30});
  std::vector<AccessPolicy> six;
  for (int i = 0; i < 6; ++i) six.push_back(fresh.policy_for_user(spec));
  fresh.release_policy(six[0]);
  fresh.release_policy(six[3]);
  EXPECT_EQ(replica_gap(fresh), 2);
}

TEST(Paths, MaximalRunsPerStreet) {
  std::vector<SegmentRef> path{{3, 4}, {3, 5}, {3, 6}, {1, 8}, {1, 7}, {3, 9}};
  auto iv = intervals_for_path(path);
  ASSERT_EQ(iv.size(), 3u);
  EXPECT_EQ(iv[0].street, 1u);
  EXPECT_EQ(iv[0].segments, (Interval{7, 8}));
  EXPECT_EQ(iv[1].segments, (Interval{4, 6}));
  EXPECT_EQ(iv[2].segments, (Interval{9, 9}));
}

TEST(Affected, DisjointAndIdenticalRoutes) {
  auto city = citysim::generate_grid_city(2, 2, 80, 10);
  auto basic = AttributeSpace::build(city, Representation::basic(), {30});
  auto a = basic.policy_for_user({{{1, {1, 8}}}, {1, 30}});
  auto b = basic.policy_for_user({{{12, {1, 8}}}, {1, 30}});
  auto c = basic.policy_for_user({{{1, {1, 8}}}, {1, 30}});
  std::map<std::uint32_t, AttributeSet> keys{{1, basic.revocation_attribute_set(a)},
                                             {2, basic.revocation_attribute_set(b)},
                                             {3, basic.revocation_attribute_set(c)}};
  EXPECT_EQ(affected_users(1, keys), std::vector<std::uint32_t>{3});
  EXPECT_TRUE(affected_users(2, keys).empty());
}

// Decryption succeeds exactly when the device's segment lies in an
// authorized interval and the day lies in the validity period.
TEST(SatisfactionSemantics, MatchesGeometricOracle) {
  CityModel city("pair", {Street{1, 5, {{0, 0}, {50, 0}}}, Street{2, 3, {{50, 0}, {50, 30}}}});
  for (auto rep : {Representation::basic(), Representation::segment_tree(), Representation::attribute_pool(2)}) {
    auto space = AttributeSpace::build(city, rep, {6});
    auto rng = Rng::seeded(8);
    auto [mk, pk] = kpabe::setup(space.universe(), rng);
    const std::vector<PolicySpec> specs{{{{1, {2, 4}}, {2, {3, 3}}}, {2, 5}}, {{{2, {1, 3}}}, {1, 1}}};
    for (const auto& spec : specs) {
      auto dk = kpabe::keygen(mk, space.policy_for_user(spec), rng);
      auto m = kpabe::random_payload(rng);
      for (const auto& st : city.streets())
        for (std::uint32_t k = 1; k <= st.segments; ++k)
          for (std::uint32_t day = 1; day <= 6; ++day) {
            bool expected = spec.validity.contains(day) &&
                            std::any_of(spec.intervals.begin(), spec.intervals.end(), [&](const StreetInterval& si) {
                              return si.street == st.id && si.segments.contains(k);
                            });
            auto label = space.label_for_device({st.id, k}, day);
            auto out = kpabe::decrypt(kpabe::encrypt(m, label.all(), pk, rng), dk);
            ASSERT_EQ(out.has_value(), expected) << rep.name() << " street " << st.id << " seg " << k << " day " << day;
            if (out) ASSERT_EQ(*out, m);
          }
    }
  }
}
