#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace abe_cities {

// Randomness source shared by the cryptographic layers and the simulator.
//
// A seeded instance expands its seed with ChaCha20 and is fully reproducible;
// a system instance draws from the OS entropy pool. Both satisfy
// UniformRandomBitGenerator so they can be handed to <algorithm> helpers.
class Rng {
 public:
  using result_type = std::uint64_t;

  static Rng seeded(std::uint64_t seed);
  static Rng from_key(std::span<const std::uint8_t, 32> key);
  static Rng system();

  void fill(std::span<std::uint8_t> out);

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  // Uniform integer in [0, bound). bound must be non-zero.
  std::uint64_t below(std::uint64_t bound);
  // Uniform double in [0, 1).
  double unit();

  // Independent child stream; the parent advances by one draw.
  Rng fork();

  bool deterministic() const { return deterministic_; }

 private:
  Rng() = default;
  void refill();

  bool deterministic_ = true;
  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint8_t, 256> buffer_{};
  std::size_t pos_ = 256;
};

}  // namespace abe_cities
