#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

#include "abe_cities/kpabe.hpp"
#include "support/random_policy.hpp"

using namespace abe_cities;
using namespace abe_cities::kpabe;
using abe_cities::testing::all_subsets;
using abe_cities::testing::random_policy;

namespace {

struct Fixture {
  Universe u;
  AttributeId A, B, C, D, E;
  MasterKey mk;
  PublicParams pk;
  Rng rng = Rng::seeded(42);

  Fixture() {
    A = u.add("A", Partition::road);
    B = u.add("B", Partition::road);
    C = u.add("C", Partition::road);
    D = u.add("D", Partition::road);
    E = u.add("E", Partition::time);
    std::tie(mk, pk) = setup(u, rng);
  }

  // A and (B or C or D)
  AccessPolicy example_policy() const {
    return AccessPolicy(PolicyNode::all_of(
        {PolicyNode::leaf(A),
         PolicyNode::any_of({PolicyNode::leaf(B), PolicyNode::leaf(C), PolicyNode::leaf(D)})}));
  }
};

}  // namespace

TEST(Universe, AssignsDenseIdsAndPartitions) {
  Universe u;
  auto a = u.add("a", Partition::road);
  auto x = u.add("x", Partition::time);
  EXPECT_EQ(a.value, 0u);
  EXPECT_EQ(x.value, 1u);
  EXPECT_EQ(u.partition(x), Partition::time);
  EXPECT_EQ(u.at("a"), a);
  EXPECT_FALSE(u.find("zz"));
  EXPECT_THROW(u.at("zz"), UnknownAttributeError);
  EXPECT_THROW(u.add("a", Partition::time), KpAbeError);
  EXPECT_EQ(u.count(Partition::road), 1u);
  EXPECT_EQ(u.ids(Partition::time), std::vector<AttributeId>{x});
}

TEST(Setup, OneComponentPerAttribute) {
  Universe u;
  for (auto n : {"a", "b", "c"}) u.add(n, Partition::road);
  auto rng = Rng::seeded(1);
  auto [mk, pk] = setup(u, rng, 80);
  EXPECT_EQ(mk.t.size(), 3u);
  EXPECT_EQ(pk.T.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(mk.t[i].version, 0u);
    EXPECT_EQ(pk.T[i].version, 0u);
    EXPECT_EQ(pk.T[i].value, G1::mul_generator(mk.t[i].value));
  }
  EXPECT_EQ(pk.Y, GT::generator().pow(mk.y));
}

TEST(Setup, RejectsEmptyUniverseAndUnsupportedLevels) {
  Universe empty;
  auto rng = Rng::seeded(1);
  EXPECT_THROW(setup(empty, rng), KpAbeError);
  Universe u;
  u.add("a", Partition::road);
  EXPECT_THROW(setup(u, rng, 128), KpAbeError);
  EXPECT_NO_THROW(setup(u, rng, 80));
}

TEST(Setup, IndependentRunsDiffer) {
  Universe u;
  u.add("a", Partition::road);
  auto r1 = Rng::seeded(1), r2 = Rng::seeded(2);
  EXPECT_FALSE(setup(u, r1).second.Y == setup(u, r2).second.Y);
  auto s = Rng::system();
  EXPECT_FALSE(setup(u, s).second.Y == setup(u, s).second.Y);
}

TEST(Encrypt, OneComponentPerLabelAttribute) {
  Fixture f;
  auto m = random_payload(f.rng);
  auto ct = encrypt(m, {f.A, f.C, f.E}, f.pk, f.rng);
  EXPECT_EQ(ct.components.size(), 3u);
  EXPECT_TRUE(ct.components.contains(f.C));
  auto full = encrypt(m, AttributeSet{f.A, f.B, f.C, f.D, f.E}, f.pk, f.rng);
  EXPECT_EQ(full.components.size(), f.u.size());
}

TEST(Encrypt, RejectsUnknownAndEmptyLabels) {
  Fixture f;
  auto m = random_payload(f.rng);
  EXPECT_THROW(encrypt(m, {AttributeId{99}}, f.pk, f.rng), UnknownAttributeError);
  EXPECT_THROW(encrypt(m, {}, f.pk, f.rng), KpAbeError);
}

TEST(Encrypt, TimeGrowsLinearlyWithLabelSize) {
  Universe u;
  for (int i = 0; i < 40; ++i) u.add("a" + std::to_string(i), Partition::road);
  auto rng = Rng::seeded(3);
  auto [mk, pk] = setup(u, rng);
  auto m = random_payload(rng);
  std::vector<double> xs, ys;
  for (int size : {10, 20, 40}) {
    AttributeSet gamma;
    for (int i = 0; i < size; ++i) gamma.insert(AttributeId{static_cast<std::uint32_t>(i)});
    std::vector<double> samples;
    for (int rep = 0; rep < 5; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      encrypt(m, gamma, pk, rng);
      samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    xs.push_back(size);
    ys.push_back(samples[2]);
  }
  EXPECT_GE(abe_cities::testing::r_squared(xs, ys), 0.9);
  EXPECT_GT(ys[2], ys[0]);
}

TEST(KeyGen, ComponentsMatchLeaves) {
  Fixture f;
  auto dk = keygen(f.mk, f.example_policy(), f.rng);
  EXPECT_EQ(dk.attributes(), (AttributeSet{f.A, f.B, f.C, f.D}));
  EXPECT_EQ(dk.components.size(), 4u);
  auto single = keygen(f.mk, AccessPolicy(PolicyNode::leaf(f.B)), f.rng);
  EXPECT_EQ(single.components.size(), 1u);
}

TEST(KeyGen, TwoKeysForOnePolicyDiffer) {
  Fixture f;
  auto k1 = keygen(f.mk, f.example_policy(), f.rng);
  auto k2 = keygen(f.mk, f.example_policy(), f.rng);
  // The AND gate re-randomizes every share.
  for (auto a : {f.A, f.B, f.C, f.D}) EXPECT_FALSE(k1.components.at(a).value == k2.components.at(a).value);
}

TEST(KeyGen, RejectsUnknownLeaves) {
  Fixture f;
  EXPECT_THROW(keygen(f.mk, AccessPolicy(PolicyNode::leaf(AttributeId{77})), f.rng), UnknownAttributeError);
}

TEST(Policy, RejectsMalformedTrees) {
  EXPECT_THROW(AccessPolicy(PolicyNode::all_of({})), MalformedPolicyError);
  EXPECT_THROW(AccessPolicy(PolicyNode::any_of({PolicyNode::leaf({1}), PolicyNode::leaf({1})})),
               MalformedPolicyError);
}

TEST(Policy, EvalMatchesExamples) {
  Fixture f;
  auto p = f.example_policy();
  EXPECT_TRUE(eval_policy(p, {f.A, f.C, f.E}));
  EXPECT_FALSE(eval_policy(p, {f.B, f.C}));
  EXPECT_FALSE(eval_policy(p, {}));
  EXPECT_EQ(p.to_string(f.u), "(A AND (B OR C OR D))");
}

TEST(Decrypt, ExampleFromTheIntroduction) {
  Fixture f;
  auto dk = keygen(f.mk, f.example_policy(), f.rng);
  auto m = random_payload(f.rng);
  auto ok = decrypt(encrypt(m, {f.A, f.C, f.E}, f.pk, f.rng), dk);
  ASSERT_TRUE(ok);
  EXPECT_EQ(*ok, m);
  EXPECT_FALSE(decrypt(encrypt(m, {f.B, f.C}, f.pk, f.rng), dk));
}

TEST(Decrypt, FullConjunction) {
  Fixture f;
  std::vector<PolicyNode> leaves;
  for (auto a : {f.A, f.B, f.C, f.D, f.E}) leaves.push_back(PolicyNode::leaf(a));
  auto dk = keygen(f.mk, AccessPolicy(PolicyNode::all_of(leaves)), f.rng);
  auto m = random_payload(f.rng);
  EXPECT_EQ(decrypt(encrypt(m, dk.attributes(), f.pk, f.rng), dk), m);
  EXPECT_FALSE(decrypt(encrypt(m, {f.A, f.B, f.C, f.D}, f.pk, f.rng), dk));
}

TEST(Decrypt, VersionMismatchIsDistinctFromFailure) {
  Fixture f;
  auto dk = keygen(f.mk, f.example_policy(), f.rng);
  auto m = random_payload(f.rng);
  auto ct = encrypt(m, {f.A, f.C}, f.pk, f.rng);
  ct.components.at(f.C).version = 1;
  EXPECT_THROW(decrypt(ct, dk), VersionMismatchError);
  // A matching alternative branch is used instead of failing.
  auto ct2 = encrypt(m, {f.A, f.B, f.C}, f.pk, f.rng);
  ct2.components.at(f.C).version = 1;
  EXPECT_EQ(decrypt(ct2, dk), m);
  // Unsatisfiable even ignoring versions: plain failure.
  auto ct3 = encrypt(m, {f.B, f.C}, f.pk, f.rng);
  ct3.components.at(f.C).version = 1;
  EXPECT_FALSE(decrypt(ct3, dk));
}

TEST(DecryptProperty, MatchesBooleanOracleExhaustively) {
  Universe u;
  for (int i = 0; i < 10; ++i) u.add("a" + std::to_string(i), Partition::road);
  auto rng = Rng::seeded(11);
  auto [mk, pk] = setup(u, rng);
  auto ids = u.ids();
  for (int trial = 0; trial < 12; ++trial) {
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<AttributeId> lambda(ids.begin(), ids.begin() + 1 + rng.below(7));
    auto policy = random_policy(lambda, rng);
    auto dk = keygen(mk, policy, rng);
    auto m = random_payload(rng);
    auto full = encrypt(m, AttributeSet(lambda.begin(), lambda.end()), pk, rng);
    for (const auto& gamma : all_subsets(lambda)) {
      Ciphertext ct = full;
      std::erase_if(ct.components, [&](const auto& kv) { return !gamma.contains(kv.first); });
      ct.attributes = gamma;
      auto out = decrypt(ct, dk);
      ASSERT_EQ(out.has_value(), eval_policy(policy, gamma)) << policy.to_string(u);
      if (out) ASSERT_EQ(*out, m);
    }
  }
}

TEST(DecryptProperty, SplicedKeysDoNotDecrypt) {
  Universe u;
  for (int i = 0; i < 6; ++i) u.add("a" + std::to_string(i), Partition::road);
  auto rng = Rng::seeded(12);
  auto [mk, pk] = setup(u, rng);
  auto ids = u.ids();
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 8; ++trial) {
    auto k1 = keygen(mk, random_policy(ids, rng), rng);
    auto k2 = keygen(mk, random_policy(ids, rng), rng);
    // A label neither key opens alone.
    AttributeSet gamma;
    for (auto a : ids)
      if (rng.below(2)) gamma.insert(a);
    if (gamma.empty() || eval_policy(k1.policy, gamma) || eval_policy(k2.policy, gamma)) continue;
    ++checked;
    auto m = random_payload(rng);
    auto ct = encrypt(m, gamma, pk, rng);
    std::vector<PolicyNode> present;
    for (auto a : gamma) present.push_back(PolicyNode::leaf(a));
    const std::vector<AccessPolicy> shapes{k1.policy, k2.policy, AccessPolicy(PolicyNode::any_of(present)),
                                           AccessPolicy(PolicyNode::all_of(present))};
    for (std::uint32_t mask = 0; mask < (1u << ids.size()); ++mask) {
      std::map<AttributeId, VersionedElement> mix;
      for (std::size_t i = 0; i < ids.size(); ++i)
        mix[ids[i]] = ((mask >> i) & 1 ? k2 : k1).components.at(ids[i]);
      for (const auto& shape : shapes) {
        DecryptionKey forged{shape, {}};
        for (auto a : shape.leaves()) forged.components[a] = mix.at(a);
        auto out = decrypt(ct, forged);
        ASSERT_FALSE(out && *out == m);
      }
    }
  }
  EXPECT_GE(checked, 4);
}

TEST(Determinism, SameSeedSameBytes) {
  auto run = [] {
    Universe u;
    auto a = u.add("a", Partition::road);
    auto b = u.add("b", Partition::time);
    auto rng = Rng::seeded(99);
    auto [mk, pk] = setup(u, rng);
    auto dk = keygen(mk, AccessPolicy(PolicyNode::all_of({PolicyNode::leaf(a), PolicyNode::leaf(b)})), rng);
    auto ct = encrypt(random_payload(rng), {a, b}, pk, rng);
    return std::vector<Bytes>{serialize(mk, u), serialize(pk, u), serialize(dk, u), serialize(ct, u)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Serialization, RoundTripsAllObjects) {
  Fixture f;
  auto dk = keygen(f.mk, f.example_policy(), f.rng);
  auto ct = encrypt(random_payload(f.rng), {f.A, f.C, f.E}, f.pk, f.rng);

  auto mk2 = deserialize_master_key(serialize(f.mk, f.u), f.u);
  EXPECT_EQ(mk2.y, f.mk.y);
  ASSERT_EQ(mk2.t.size(), f.mk.t.size());
  for (std::size_t i = 0; i < mk2.t.size(); ++i) EXPECT_EQ(mk2.t[i].value, f.mk.t[i].value);

  auto pk2 = deserialize_public_params(serialize(f.pk, f.u), f.u);
  EXPECT_EQ(pk2.Y, f.pk.Y);
  EXPECT_EQ(serialize(pk2, f.u), serialize(f.pk, f.u));

  auto dk2 = deserialize_decryption_key(serialize(dk, f.u), f.u);
  EXPECT_EQ(dk2.policy, dk.policy);
  EXPECT_EQ(serialize(dk2, f.u), serialize(dk, f.u));

  auto ct2 = deserialize_ciphertext(serialize(ct, f.u), f.u);
  EXPECT_EQ(ct2.attributes, ct.attributes);
  EXPECT_EQ(decrypt(ct2, dk2), decrypt(ct, dk));
}

TEST(Serialization, RejectsCorruptInput) {
  Fixture f;
  auto bytes = serialize(keygen(f.mk, f.example_policy(), f.rng), f.u);
  auto truncated = Bytes(bytes.begin(), bytes.end() - 1);
  EXPECT_THROW(deserialize_decryption_key(truncated, f.u), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_decryption_key(trailing, f.u), FormatError);
  EXPECT_THROW(deserialize_ciphertext(bytes, f.u), FormatError);  // wrong record kind
  Universe other;
  other.add("Z", Partition::road);
  EXPECT_THROW(deserialize_decryption_key(bytes, other), UnknownAttributeError);
}

TEST(Serialization, ComponentRecordSizeIsExact) {
  Fixture f;
  ByteWriter w;
  write_component(w, f.u, f.A, f.pk.T[f.A.value]);
  EXPECT_EQ(std::move(w).take().size(), component_record_size("A"));
}
