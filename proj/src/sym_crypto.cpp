#include "abe_cities/sym_crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "abe_cities/sodium_init.hpp"

namespace abe_cities::symcrypto {

namespace {

constexpr unsigned char kChainPersonal[crypto_generichash_blake2b_PERSONALBYTES] = "abec:dek-chain";
constexpr unsigned char kKdfPersonal[crypto_generichash_blake2b_PERSONALBYTES] = "abec:ask-kdf";

Key personal_hash(std::span<const std::uint8_t> in, const unsigned char* personal) {
  Key out;
  crypto_generichash_blake2b_salt_personal(out.data(), out.size(), in.data(), in.size(), nullptr, 0, nullptr,
                                           personal);
  return out;
}

}  // namespace

Key random_key(Rng& rng) {
  Key k;
  rng.fill(k);
  return k;
}

SigningKeyPair SigningKeyPair::generate(Rng& rng) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_sign_SEEDBYTES> seed;
  rng.fill(seed);
  SigningKeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
  sodium_memzero(seed.data(), seed.size());
  return kp;
}

Signature sign(const SigningKeyPair& kp, std::span<const std::uint8_t> message) {
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), kp.secret_key.data());
  return sig;
}

bool verify(std::span<const std::uint8_t, 32> public_key, std::span<const std::uint8_t> message,
            const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), public_key.data()) == 0;
}

BoxKeyPair BoxKeyPair::generate(Rng& rng) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_box_SEEDBYTES> seed;
  rng.fill(seed);
  BoxKeyPair kp;
  crypto_box_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
  sodium_memzero(seed.data(), seed.size());
  return kp;
}

Bytes seal_to(std::span<const std::uint8_t, 32> recipient, std::span<const std::uint8_t> plaintext, Rng& rng) {
  const BoxKeyPair eph = BoxKeyPair::generate(rng);
  std::array<std::uint8_t, crypto_box_NONCEBYTES> nonce;
  rng.fill(nonce);
  Bytes out(eph.public_key.size() + nonce.size() + plaintext.size() + crypto_box_MACBYTES);
  std::memcpy(out.data(), eph.public_key.data(), eph.public_key.size());
  std::memcpy(out.data() + eph.public_key.size(), nonce.data(), nonce.size());
  if (crypto_box_easy(out.data() + eph.public_key.size() + nonce.size(), plaintext.data(), plaintext.size(),
                  nonce.data(), recipient.data(), eph.secret_key.data()) != 0)
    throw std::runtime_error("crypto_box_easy failed");
  return out;
}

std::optional<Bytes> open_sealed(const BoxKeyPair& kp, std::span<const std::uint8_t> sealed) {
  ensure_sodium();
  constexpr std::size_t head = crypto_box_PUBLICKEYBYTES + crypto_box_NONCEBYTES;
  if (sealed.size() < head + crypto_box_MACBYTES) return std::nullopt;
  Bytes out(sealed.size() - head - crypto_box_MACBYTES);
  if (crypto_box_open_easy(out.data(), sealed.data() + head, sealed.size() - head,
                           sealed.data() + crypto_box_PUBLICKEYBYTES, sealed.data(), kp.secret_key.data()) != 0)
    return std::nullopt;
  return out;
}

Bytes aead_encrypt(const Key& key, std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> ad,
                   Rng& rng) {
  ensure_sodium();
  constexpr std::size_t nb = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  Bytes out(nb + plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  rng.fill(std::span(out.data(), nb));
  unsigned long long len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.data() + nb, &len, plaintext.data(), plaintext.size(), ad.data(),
                                             ad.size(), nullptr, out.data(), key.data());
  out.resize(nb + len);
  return out;
}

std::optional<Bytes> aead_decrypt(const Key& key, std::span<const std::uint8_t> sealed,
                                  std::span<const std::uint8_t> ad) {
  ensure_sodium();
  constexpr std::size_t nb = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  if (sealed.size() < nb + crypto_aead_xchacha20poly1305_ietf_ABYTES) return std::nullopt;
  Bytes out(sealed.size() - nb - crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long len = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &len, nullptr, sealed.data() + nb, sealed.size() - nb,
                                                 ad.data(), ad.size(), sealed.data(), key.data()) != 0)
    return std::nullopt;
  out.resize(len);
  return out;
}

Key chain_step(const Key& k) {
  ensure_sodium();
  return personal_hash(k, kChainPersonal);
}

Key chain_advance(Key k, std::uint32_t steps) {
  for (std::uint32_t i = 0; i < steps; ++i) k = chain_step(k);
  return k;
}

Key derive_key(const pairing::GT& material) {
  ensure_sodium();
  const auto bytes = material.to_bytes();
  return personal_hash(bytes, kKdfPersonal);
}

}  // namespace abe_cities::symcrypto
