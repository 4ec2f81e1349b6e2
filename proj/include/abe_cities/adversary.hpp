#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "abe_cities/protocol.hpp"

// Attack harnesses that work only from what a given adversary can see.
namespace abe_cities::adversary {

struct EavesdropReport {
  std::size_t sealed_keys = 0;      // distinct ASK ciphertexts observed
  std::size_t key_components = 0;   // road components observed in transit
  std::size_t encrypted_items = 0;  // ESDs observed
  std::size_t candidate_keys = 0;   // data-key guesses tried
  std::size_t opened = 0;           // ESDs an attack decrypted
};

// Passive network attacker holding the full fabric transcript. Collects every
// ASK, road key component, re-encryption key and ESD it can parse, forges
// keys from observed components (single leaves, per-user AND/OR
// combinations, components moved forward with observed re-encryption keys)
// and tries every resulting data key on every ESD of the matching device day.
EavesdropReport eavesdrop(const std::vector<protocol::Envelope>& transcript, const kpabe::Universe& universe,
                          std::uint32_t max_counter = 16);

struct ObservedItem {
  std::uint32_t device = 0;
  std::uint32_t day = 0;
  std::uint32_t generation = 0;
  std::uint32_t counter = 0;
  Bytes esd;
};

// Device capture: using only the leaked state, try the leaked key and up to
// `max_steps` forward hashes of it on every item. Returns the counters of the
// items that open.
std::set<std::uint32_t> items_opened_by_capture(const protocol::Device::State& leaked, std::uint32_t device,
                                                const std::vector<ObservedItem>& items, std::uint32_t max_steps);

}  // namespace abe_cities::adversary
