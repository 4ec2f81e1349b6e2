#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "abe_cities/experiments.hpp"
#include "abe_cities/kpabe.hpp"

using namespace abe_cities;
using namespace abe_cities::citysim;
using attrspace::Representation;

namespace {

const CityModel& small_city() {
  static const CityModel city = CityConfig{4, 4, 100, 20}.build();
  return city;
}

ExperimentConfig config(Representation rep, double length, std::uint32_t users, std::uint64_t seed = 3) {
  ExperimentConfig c;
  c.representation = rep;
  c.route_length = length;
  c.users = users;
  c.subscription_days = 30;
  c.lifetime_days = 120;
  c.seed = seed;
  return c;
}

const std::vector<Representation>& all_reps() {
  static const std::vector<Representation> reps{Representation::basic(), Representation::segment_tree(),
                                                Representation::attribute_pool(2),
                                                Representation::attribute_pool(4)};
  return reps;
}

// Recomputes affected users from attribute names alone.
std::vector<std::vector<std::uint32_t>> brute_force_affected(const IssuedPopulation& pop) {
  const auto& u = pop.space.universe();
  std::vector<std::set<std::string>> road(pop.policies.size());
  for (std::size_t i = 0; i < pop.policies.size(); ++i)
    for (auto leaf : pop.policies[i].leaves())
      if (u.partition(leaf) == kpabe::Partition::road) road[i].insert(u.name(leaf));
  std::vector<std::vector<std::uint32_t>> out(road.size());
  for (std::size_t a = 0; a < road.size(); ++a)
    for (std::size_t b = 0; b < road.size(); ++b) {
      if (a == b) continue;
      bool shared = false;
      for (const auto& name : road[a]) shared = shared || road[b].contains(name);
      if (shared) out[a].push_back(static_cast<std::uint32_t>(b));
    }
  return out;
}

bool is_subset(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(Population, SameDatasetForEveryRepresentation) {
  const auto a = generate_population(small_city(), config(Representation::basic(), 200, 20));
  const auto b = generate_population(small_city(), config(Representation::attribute_pool(5), 200, 20));
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].route.path, b[i].route.path);
    EXPECT_EQ(a[i].spec.validity, b[i].spec.validity);
    EXPECT_LE(a[i].spec.validity.hi, 120u);
    EXPECT_EQ(a[i].spec.validity.hi - a[i].spec.validity.lo + 1, 30u);
  }
  const auto other = generate_population(small_city(), config(Representation::basic(), 200, 20, 4));
  EXPECT_NE(a[0].route.path, other[0].route.path);
}

TEST(Population, RejectsBadConfigurations) {
  auto c = config(Representation::basic(), 200, 5);
  c.subscription_days = 121;
  EXPECT_THROW(generate_population(small_city(), c), ConfigError);
  EXPECT_THROW(generate_population(small_city(), config(Representation::basic(), 0, 5)), ConfigError);
  EXPECT_THROW(generate_population(small_city(), config(Representation::basic(), 200, 0)), ConfigError);
  EXPECT_THROW(generate_population(small_city(), config(Representation::basic(), 1e5, 5)), ConfigError);
  EXPECT_THROW(generate_population(small_city(), config(Representation::attribute_pool(0), 200, 5)), ConfigError);
  EXPECT_THROW((CityConfig{2, 2, 100, 30}.build()), ConfigError);
}

TEST(RevocationSweep, DisjointRoutesAffectNobody) {
  const auto city = generate_grid_city(2, 1, 100, 20);
  for (const auto& rep : all_reps()) {
    IssuedPopulation pop{attrspace::AttributeSpace::build(city, rep, {30}), {}, {}};
    pop.policies.push_back(pop.space.policy_for_user({{{1, {1, 5}}}, {1, 30}}));
    pop.policies.push_back(pop.space.policy_for_user({{{4, {1, 5}}}, {1, 30}}));
    const auto r = run_revocation_sweep(pop);
    EXPECT_EQ(r.affected_mean_pct, 0.0) << rep.name();
    EXPECT_EQ(r.affected_ci95_pct, 0.0);
  }
}

TEST(RevocationSweep, MatchesBruteForceOnSmallPopulations) {
  for (double length : {150.0, 300.0})
    for (const auto& rep : all_reps()) {
      const auto pop = issue_population(small_city(), config(rep, length, 50));
      const auto sweep = run_revocation_sweep(pop);
      const auto brute = brute_force_affected(pop);
      EXPECT_EQ(sweep.affected, brute) << rep.name() << rep.epsilon << " L=" << length;
      std::vector<double> pct;
      for (const auto& a : brute) pct.push_back(100.0 * double(a.size()) / 49.0);
      EXPECT_DOUBLE_EQ(sweep.affected_mean_pct, mean_of(pct));
      // Also against the attribute-space helper.
      std::map<std::uint32_t, kpabe::AttributeSet> sets;
      for (std::uint32_t u = 0; u < pop.policies.size(); ++u)
        sets[u] = pop.space.revocation_attribute_set(pop.policies[u]);
      for (std::uint32_t u = 0; u < pop.policies.size(); ++u)
        EXPECT_EQ(attrspace::affected_users(u, sets), sweep.affected[u]);
    }
}

TEST(RevocationSweep, FinerRepresentationsAffectSubsets) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto basic = run_revocation_sweep(issue_population(small_city(), config(Representation::basic(), 250, 60, seed)));
    const auto seg =
        run_revocation_sweep(issue_population(small_city(), config(Representation::segment_tree(), 250, 60, seed)));
    const auto pool =
        run_revocation_sweep(issue_population(small_city(), config(Representation::attribute_pool(3), 250, 60, seed)));
    for (std::size_t u = 0; u < basic.affected.size(); ++u) {
      EXPECT_TRUE(is_subset(seg.affected[u], basic.affected[u])) << u;
      EXPECT_TRUE(is_subset(pool.affected[u], seg.affected[u])) << u;
    }
    EXPECT_GE(basic.affected_mean_pct, seg.affected_mean_pct);
    EXPECT_GE(seg.affected_mean_pct, pool.affected_mean_pct);
  }
}

TEST(RevocationSweep, MoreReplicasAffectFewerUsers) {
  const auto city = CityConfig{}.build();
  double previous = 101;
  for (std::uint32_t eps = 1; eps <= 5; ++eps) {
    auto c = config(Representation::attribute_pool(eps), 1600, 100, 7);
    c.lifetime_days = 1826;
    c.subscription_days = 365;
    const double m = run_revocation_sweep(issue_population(city, c)).affected_mean_pct;
    EXPECT_LE(m, previous) << "epsilon " << eps;
    previous = m;
  }
}

TEST(KeySizes, AccountingMatchesSerializedKeys) {
  for (const auto& rep : all_reps()) {
    const auto pop = issue_population(small_city(), config(rep, 250, 4));
    const auto k = measure_key_sizes(pop);
    Rng rng = Rng::seeded(1);
    auto [mk, pk] = kpabe::setup(pop.space.universe(), rng);
    std::uint64_t road_bytes = 0, time_bytes = 0;
    for (const auto& policy : pop.policies) {
      const auto dk = kpabe::keygen(mk, policy, rng);
      ByteWriter overhead;
      overhead.header(RecordKind::decryption_key);
      kpabe::write_policy(overhead, pop.space.universe(), policy.root());
      overhead.u32(0);
      std::uint64_t comps = 0;
      for (const auto& [i, c] : dk.components) {
        ByteWriter one;
        kpabe::write_component(one, pop.space.universe(), i, c);
        comps += one.bytes().size();
        (pop.space.universe().partition(i) == kpabe::Partition::road ? road_bytes : time_bytes) += one.bytes().size();
      }
      EXPECT_EQ(kpabe::serialize(dk, pop.space.universe()).size(), overhead.bytes().size() + comps);
    }
    EXPECT_EQ(k.store_road_bytes, road_bytes);
    EXPECT_DOUBLE_EQ(k.road_bytes_mean, double(road_bytes) / 4);
    EXPECT_DOUBLE_EQ(k.time_bytes_mean, double(time_bytes) / 4);
  }
}

TEST(KeySizes, SegmentTreeKeysAreSmallerAndTimeShareIsShared) {
  const auto basic = issue_population(small_city(), config(Representation::basic(), 300, 40));
  const auto seg = issue_population(small_city(), config(Representation::segment_tree(), 300, 40));
  const auto pool = issue_population(small_city(), config(Representation::attribute_pool(5), 300, 40));
  const auto& ub = basic.space.universe();
  const auto& us = seg.space.universe();
  for (std::size_t i = 0; i < basic.policies.size(); ++i) {
    EXPECT_LE(seg.space.road_part(seg.policies[i].leaf_set()).size(),
              basic.space.road_part(basic.policies[i].leaf_set()).size());
    EXPECT_EQ(seg.policies[i].leaf_count(), pool.policies[i].leaf_count());
    std::set<std::string> tb, ts;
    for (auto a : basic.space.time_part(basic.policies[i].leaf_set())) tb.insert(ub.name(a));
    for (auto a : seg.space.time_part(seg.policies[i].leaf_set())) ts.insert(us.name(a));
    EXPECT_EQ(tb, ts);
  }
  const auto kb = measure_key_sizes(basic), ks = measure_key_sizes(seg), kp = measure_key_sizes(pool);
  EXPECT_DOUBLE_EQ(kb.time_attrs_mean, ks.time_attrs_mean);
  EXPECT_DOUBLE_EQ(ks.road_attrs_mean, kp.road_attrs_mean);
  EXPECT_LT(ks.road_attrs_mean, kb.road_attrs_mean);
}

TEST(Labels, PoolLabelsAreEpsilonPointRepresentations) {
  for (std::uint32_t eps : {1u, 3u, 5u}) {
    const auto space = attrspace::AttributeSpace::build(small_city(), Representation::attribute_pool(eps), {365});
    const auto s = measure_labels(space, small_city());
    EXPECT_EQ(s.labels, small_city().segment_count());
    EXPECT_EQ(s.mismatched, 0u);
    EXPECT_EQ(s.road_total, eps * s.point_rep_total);
    EXPECT_EQ(s.all_total, s.road_total + s.time_total);
  }
  const auto basic = attrspace::AttributeSpace::build(small_city(), Representation::basic(), {365});
  EXPECT_EQ(measure_labels(basic, small_city()).road_total, small_city().segment_count());
}

TEST(SealBenchmark, CountsAndSizes) {
  auto c = config(Representation::segment_tree(), 200, 1);
  const auto none = bench_seal(small_city(), c, 0, 1);
  EXPECT_EQ(none.ask_bytes_total, 0u);
  EXPECT_EQ(none.gamma_mean, 0.0);
  const auto some = bench_seal(small_city(), c, 4, 1);
  EXPECT_GT(some.ask_bytes_total, 0u);
  EXPECT_GT(some.seal_ms, 0.0);
  EXPECT_GT(some.gamma_mean, 0.0);
  // ASK size is affine in |gamma|; a device count twice as large doubles it
  // up to label variation, so only check that it grows.
  EXPECT_GT(bench_seal(small_city(), c, 8, 1).ask_bytes_total, some.ask_bytes_total);
}

TEST(Csv, RowsAreDeterministicWithoutTimingColumns) {
  auto render = [] {
    std::ostringstream out;
    write_metrics_header(out);
    for (const auto& rep : all_reps()) write_metrics_row(out, experiment_row(small_city(), config(rep, 250, 30)));
    return out.str();
  };
  const auto a = render(), b = render();
  EXPECT_EQ(strip_timing_columns(a), strip_timing_columns(b));
  std::istringstream in(a);
  const auto rows = read_metrics_csv(in);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].size(), metrics_columns().size());
  const auto stripped = strip_timing_columns(a);
  EXPECT_EQ(stripped.find("seal_ms"), std::string::npos);
  EXPECT_EQ(stripped.find("elapsed_ms"), std::string::npos);
}

TEST(Csv, SchemaChangesFailLoudly) {
  std::ostringstream out;
  write_metrics_header(out);
  std::string text = out.str();
  std::istringstream ok(text);
  EXPECT_NO_THROW(read_metrics_csv(ok));
  std::string renamed = text;
  renamed.replace(renamed.find("seed"), 4, "sid");
  std::istringstream bad(renamed);
  EXPECT_THROW(read_metrics_csv(bad), ConfigError);
  std::istringstream short_row(text + "1,2,3\n");
  EXPECT_THROW(read_metrics_csv(short_row), ConfigError);
}

TEST(Stats, ConfidenceInterval) {
  EXPECT_DOUBLE_EQ(mean_of({1, 2, 3, 4}), 2.5);
  EXPECT_NEAR(ci95_half_width({1, 2, 3, 4}), 1.96 * 1.2909944487358056 / 2.0, 1e-12);
  EXPECT_EQ(ci95_half_width({5}), 0.0);
  EXPECT_EQ(ci95_half_width({2, 2, 2}), 0.0);
}
