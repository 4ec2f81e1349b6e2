#include "abe_cities/rng.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "abe_cities/sodium_init.hpp"

namespace abe_cities {

Rng Rng::seeded(std::uint64_t seed) {
  ensure_sodium();
  Rng rng;
  std::uint8_t input[8];
  for (int i = 0; i < 8; ++i) input[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  static constexpr char kPersonal[crypto_generichash_blake2b_PERSONALBYTES] = "abe-cities:rng";
  crypto_generichash_blake2b_salt_personal(rng.key_.data(), rng.key_.size(), input, sizeof input,
                                           nullptr, 0, nullptr,
                                           reinterpret_cast<const unsigned char*>(kPersonal));
  return rng;
}

Rng Rng::from_key(std::span<const std::uint8_t, 32> key) {
  ensure_sodium();
  Rng rng;
  std::memcpy(rng.key_.data(), key.data(), 32);
  return rng;
}

Rng Rng::system() {
  ensure_sodium();
  Rng rng;
  rng.deterministic_ = false;
  return rng;
}

void Rng::refill() {
  if (!deterministic_) {
    randombytes_buf(buffer_.data(), buffer_.size());
  } else {
    std::uint8_t nonce[crypto_stream_chacha20_ietf_NONCEBYTES] = {};
    for (int i = 0; i < 8; ++i) nonce[i] = static_cast<std::uint8_t>(block_ >> (8 * i));
    crypto_stream_chacha20_ietf(buffer_.data(), buffer_.size(), nonce, key_.data());
    ++block_;
  }
  pos_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    std::size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

Rng::result_type Rng::operator()() {
  std::uint8_t bytes[8];
  fill(bytes);
  result_type v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<result_type>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = max() - (max() % bound);
  for (;;) {
    std::uint64_t v = (*this)();
    if (v < limit) return v % bound;
  }
}

double Rng::unit() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

Rng Rng::fork() {
  std::array<std::uint8_t, 32> child{};
  fill(child);
  Rng rng = deterministic_ ? from_key(child) : system();
  return rng;
}

}  // namespace abe_cities
