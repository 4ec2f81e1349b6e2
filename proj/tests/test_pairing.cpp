#include <gtest/gtest.h>

#include "abe_cities/pairing.hpp"

using namespace abe_cities;
using namespace abe_cities::pairing;

TEST(Pairing, CurveParametersAreConsistent) {
  const auto& c = curve();
  EXPECT_TRUE(c.h * c.r == c.q + 1);
  EXPECT_EQ(mpz_sizeinbase(c.q.get_mpz_t(), 2), 512u);
  EXPECT_EQ(mpz_sizeinbase(c.r.get_mpz_t(), 2), 160u);
  EXPECT_NE(mpz_probab_prime_p(c.q.get_mpz_t(), 30), 0);
  EXPECT_NE(mpz_probab_prime_p(c.r.get_mpz_t(), 30), 0);
  EXPECT_TRUE(mpz_class(c.q % 4) == 3);
}

TEST(Pairing, GeneratorHasOrderR) {
  const G1& g = G1::generator();
  EXPECT_TRUE(g.on_curve());
  EXPECT_FALSE(g.is_identity());
  EXPECT_TRUE((g * Zr::from_mpz(curve().r - 1) + g).is_identity());
}

TEST(Pairing, FixedBaseMatchesGenericMultiplication) {
  auto rng = Rng::seeded(1);
  for (int i = 0; i < 5; ++i) {
    Zr k = Zr::random(rng);
    EXPECT_EQ(G1::mul_generator(k), G1::generator() * k);
  }
  EXPECT_TRUE(G1::mul_generator(Zr(0)).is_identity());
}

TEST(Pairing, Bilinear) {
  auto rng = Rng::seeded(2);
  const G1& g = G1::generator();
  for (int i = 0; i < 3; ++i) {
    Zr a = Zr::random_nonzero(rng), b = Zr::random_nonzero(rng);
    EXPECT_EQ(pair(g * a, g * b), GT::generator().pow(a * b));
    EXPECT_EQ(pair(g * a, g), pair(g, g * a));
  }
  EXPECT_FALSE(GT::generator().is_one());
  EXPECT_TRUE(GT::generator().pow(Zr::from_mpz(curve().r - 1)) * GT::generator() == GT::one());
}

TEST(Pairing, MillerProductsEqualPairingProducts) {
  auto rng = Rng::seeded(3);
  const G1& g = G1::generator();
  G1 p1 = g * Zr::random(rng), q1 = g * Zr::random(rng);
  G1 p2 = g * Zr::random(rng), q2 = g * Zr::random(rng);
  Zr e = Zr::random(rng);
  auto combined = (miller_loop(p1, q1) * miller_loop(p2, q2).pow(e)).finalize();
  EXPECT_EQ(combined, pair(p1, q1) * pair(p2, q2).pow(e));
}

TEST(Pairing, FieldArithmetic) {
  auto rng = Rng::seeded(4);
  Zr a = Zr::random_nonzero(rng);
  EXPECT_EQ(a * a.inverse(), Zr(1));
  EXPECT_EQ(a + (-a), Zr(0));
  EXPECT_EQ(a - a, Zr(0));
  EXPECT_THROW(Zr(0).inverse(), std::domain_error);
}

TEST(Pairing, SerializationRoundTrip) {
  auto rng = Rng::seeded(5);
  Zr k = Zr::random(rng);
  EXPECT_EQ(Zr::from_bytes(k.to_bytes()), k);
  G1 p = G1::mul_generator(k);
  EXPECT_EQ(G1::from_bytes(p.to_bytes()), p);
  EXPECT_EQ(G1::from_bytes(G1::identity().to_bytes()), G1::identity());
  GT t = GT::generator().pow(k);
  EXPECT_EQ(GT::from_bytes(t.to_bytes()), t);
}

TEST(Pairing, DecodingRejectsInvalidElements) {
  auto p = G1::generator().to_bytes();
  p[kG1Bytes - 1] ^= 1;
  EXPECT_ANY_THROW(G1::from_bytes(p));
  auto t = GT::generator().to_bytes();
  t[0] ^= 1;
  EXPECT_ANY_THROW(GT::from_bytes(t));
  std::array<std::uint8_t, kZrBytes> big;
  big.fill(0xff);
  EXPECT_ANY_THROW(Zr::from_bytes(big));
  EXPECT_ANY_THROW(G1::from_bytes(std::span<const std::uint8_t>(p.data(), 10)));
}

TEST(Pairing, SeededRandomnessIsReproducible) {
  auto a = Rng::seeded(9), b = Rng::seeded(9), c = Rng::seeded(10);
  EXPECT_EQ(Zr::random(a), Zr::random(b));
  EXPECT_FALSE(Zr::random(a) == Zr::random(c));
}
