#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "abe_cities/bytes.hpp"
#include "abe_cities/pairing.hpp"
#include "abe_cities/rng.hpp"

// Conventional primitives used around the ABE layer, all from libsodium.
// Randomness always comes from an explicit Rng so seeded runs reproduce.
namespace abe_cities::symcrypto {

using Key = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

Key random_key(Rng& rng);

// Ed25519.
struct SigningKeyPair {
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 64> secret_key{};

  static SigningKeyPair generate(Rng& rng);
};
Signature sign(const SigningKeyPair& kp, std::span<const std::uint8_t> message);
bool verify(std::span<const std::uint8_t, 32> public_key, std::span<const std::uint8_t> message,
            const Signature& sig);

// X25519 + XSalsa20-Poly1305 sealed box with an Rng-drawn ephemeral key.
struct BoxKeyPair {
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 32> secret_key{};

  static BoxKeyPair generate(Rng& rng);
};
Bytes seal_to(std::span<const std::uint8_t, 32> recipient, std::span<const std::uint8_t> plaintext, Rng& rng);
std::optional<Bytes> open_sealed(const BoxKeyPair& kp, std::span<const std::uint8_t> sealed);

// XChaCha20-Poly1305; output is nonce || ciphertext || tag.
Bytes aead_encrypt(const Key& key, std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> ad,
                   Rng& rng);
std::optional<Bytes> aead_decrypt(const Key& key, std::span<const std::uint8_t> sealed,
                                  std::span<const std::uint8_t> ad);

// One step of the data-key hash chain.
Key chain_step(const Key& k);
Key chain_advance(Key k, std::uint32_t steps);

// Symmetric key derived from ABE key material; domain-separated from
// chain_step.
Key derive_key(const pairing::GT& material);

}  // namespace abe_cities::symcrypto
