#pragma once

#include <gmpxx.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "abe_cities/bytes.hpp"
#include "abe_cities/rng.hpp"

// Symmetric bilinear pairing on the supersingular curve y^2 = x^3 + x over
// F_q with q = 3 (mod 4), embedding degree 2.
//
//   q : 512-bit prime, q + 1 = h * r
//   r : 160-bit prime 2^159 + 2^107 + 1 (group order of G1 and GT)
//
// This is the classical 80-bit-security "type A" parameter set. The pairing is
// the reduced Tate pairing composed with the distortion map (x, y) -> (-x, iy),
// so e(P, Q) is defined for P, Q both in G1 and e(g, g) != 1.
//
// Serialized layouts (big-endian field elements, fixed width):
//   Zr : 20 bytes
//   G1 : x (64 bytes) | y (64 bytes); the identity is 128 zero bytes
//   GT : a (64 bytes) | b (64 bytes) for a + b*i
namespace abe_cities::pairing {

inline constexpr std::size_t kFieldBytes = 64;
inline constexpr std::size_t kZrBytes = 20;
inline constexpr std::size_t kG1Bytes = 2 * kFieldBytes;
inline constexpr std::size_t kGtBytes = 2 * kFieldBytes;

struct CurveParams {
  mpz_class q;
  mpz_class r;
  mpz_class h;
};

const CurveParams& curve();

// Integer modulo r.
class Zr {
 public:
  Zr() = default;
  explicit Zr(std::uint64_t v);
  static Zr from_mpz(const mpz_class& v);
  // Uniform in [0, r).
  static Zr random(Rng& rng);
  // Uniform in [1, r).
  static Zr random_nonzero(Rng& rng);

  const mpz_class& value() const { return v_; }
  bool is_zero() const { return v_ == 0; }
  Zr inverse() const;  // throws std::domain_error on zero

  friend Zr operator+(const Zr& a, const Zr& b);
  friend Zr operator-(const Zr& a, const Zr& b);
  friend Zr operator*(const Zr& a, const Zr& b);
  Zr operator-() const;
  friend bool operator==(const Zr& a, const Zr& b) { return a.v_ == b.v_; }

  std::array<std::uint8_t, kZrBytes> to_bytes() const;
  static Zr from_bytes(std::span<const std::uint8_t> bytes);

 private:
  mpz_class v_ = 0;
};

// Point of the order-r subgroup of E(F_q), affine coordinates.
class G1 {
 public:
  G1() = default;  // identity
  static const G1& generator();
  static G1 identity() { return G1{}; }

  bool is_identity() const { return infinity_; }
  const mpz_class& x() const { return x_; }
  const mpz_class& y() const { return y_; }

  friend G1 operator+(const G1& a, const G1& b);
  G1 operator-() const;
  friend G1 operator*(const G1& p, const Zr& k);
  friend G1 operator*(const Zr& k, const G1& p) { return p * k; }
  friend bool operator==(const G1& a, const G1& b);

  // generator() * k using a precomputed table.
  static G1 mul_generator(const Zr& k);

  std::array<std::uint8_t, kG1Bytes> to_bytes() const;
  // Validates the encoding, the curve equation and subgroup membership.
  static G1 from_bytes(std::span<const std::uint8_t> bytes);

  bool on_curve() const;

 private:
  friend class PointOps;
  mpz_class x_ = 0;
  mpz_class y_ = 0;
  bool infinity_ = true;
};

// Element of F_q^2 = F_q[i]/(i^2 + 1), used both for raw Miller-loop outputs
// and for GT.
struct Fq2 {
  mpz_class a = 1;
  mpz_class b = 0;

  friend bool operator==(const Fq2&, const Fq2&) = default;
};

// Element of the order-r subgroup of F_q^2*.
class GT {
 public:
  GT() = default;  // one
  static GT one() { return GT{}; }
  // e(g, g) for g = G1::generator().
  static const GT& generator();

  friend GT operator*(const GT& a, const GT& b);
  friend GT operator/(const GT& a, const GT& b);
  GT inverse() const;
  GT pow(const Zr& k) const;
  friend bool operator==(const GT& a, const GT& b) { return a.v_ == b.v_; }

  bool is_one() const { return v_.a == 1 && v_.b == 0; }
  const Fq2& value() const { return v_; }

  std::array<std::uint8_t, kGtBytes> to_bytes() const;
  // Validates the encoding and subgroup membership.
  static GT from_bytes(std::span<const std::uint8_t> bytes);

 private:
  friend class MillerValue;
  explicit GT(Fq2 v) : v_(std::move(v)) {}
  Fq2 v_;
};

// Unreduced pairing value. Products of Miller values followed by a single
// final exponentiation evaluate products of pairings.
class MillerValue {
 public:
  MillerValue() = default;  // one
  friend MillerValue operator*(const MillerValue& a, const MillerValue& b);
  MillerValue pow(const Zr& k) const;
  GT finalize() const;

 private:
  friend MillerValue miller_loop(const G1& p, const G1& q);
  explicit MillerValue(Fq2 v) : v_(std::move(v)) {}
  Fq2 v_;
};

MillerValue miller_loop(const G1& p, const G1& q);

// e(p, q).
GT pair(const G1& p, const G1& q);

}  // namespace abe_cities::pairing
