#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "abe_cities/bytes.hpp"
#include "abe_cities/kpabe.hpp"
#include "abe_cities/rng.hpp"

// Proxy re-encryption over the KP-ABE components.
//
// Updating attribute i replaces t_i by t_i' and publishes rk_i = t_i' / t_i.
// A proxy moves a ciphertext component forward with e_i' = e_i^rk_i and a key
// component with dk_i' = dk_i^(1/rk_i); neither step reveals t_i or the
// plaintext. Lagging components are brought up to date by folding the
// attribute's re-encryption key history one entry at a time.
namespace abe_cities::pre {

using kpabe::AttributeId;

class PreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// The component is newer than the history or the history has a gap.
class MissingHistoryError : public PreError {
 public:
  using PreError::PreError;
};

struct ReencryptionKey {
  AttributeId attribute;
  std::uint32_t from_version = 0;
  std::uint32_t to_version = 1;
  pairing::Zr factor;  // t_new / t_old
};

// Append-only chain 0 -> 1 -> ... -> current for one attribute.
class ReencryptionKeyHistory {
 public:
  ReencryptionKeyHistory() = default;
  explicit ReencryptionKeyHistory(AttributeId attribute) : attribute_(attribute) {}

  AttributeId attribute() const { return attribute_; }
  std::uint32_t current_version() const { return static_cast<std::uint32_t>(entries_.size()); }
  std::span<const ReencryptionKey> entries() const { return entries_; }

  // Throws PreError unless rk continues the chain for this attribute.
  void append(ReencryptionKey rk);

 private:
  AttributeId attribute_{};
  std::vector<ReencryptionKey> entries_;
};

// Current version of every attribute. Time attributes stay at version 0.
class AttributeVersionTable {
 public:
  AttributeVersionTable() = default;
  explicit AttributeVersionTable(const kpabe::Universe& universe);

  std::uint32_t version(AttributeId id) const;
  // Throws PreError for time attributes.
  void bump(AttributeId id);
  std::size_t size() const { return versions_.size(); }

 private:
  std::vector<std::uint32_t> versions_;
  std::vector<kpabe::Partition> partitions_;
};

struct AttributeUpdate {
  kpabe::VersionedExponent t;
  kpabe::VersionedElement T;
  ReencryptionKey rk;
};

// Moves attribute i to its next version in both mk and params. Throws
// PreError for time attributes.
AttributeUpdate update_attribute(AttributeId i, const kpabe::Universe& universe,
                                 kpabe::MasterKey& mk, kpabe::PublicParams& params, Rng& rng);

kpabe::VersionedElement update_ciphertext_component(AttributeId i, const kpabe::VersionedElement& e,
                                                    const ReencryptionKeyHistory& rkh);

kpabe::VersionedElement update_key_component(AttributeId i, const kpabe::VersionedElement& dk,
                                             const ReencryptionKeyHistory& rkh);

using HistoryMap = std::map<AttributeId, ReencryptionKeyHistory>;

// Brings every component that has a history up to date; returns how many
// components changed.
std::size_t update_ciphertext(kpabe::Ciphertext& ct, const HistoryMap& histories);
std::size_t update_key(std::map<AttributeId, kpabe::VersionedElement>& components,
                       const HistoryMap& histories);

Bytes serialize(const ReencryptionKeyHistory& rkh, const kpabe::Universe& universe);
ReencryptionKeyHistory deserialize_history(std::span<const std::uint8_t> bytes,
                                           const kpabe::Universe& universe);
void write_history(ByteWriter& w, const ReencryptionKeyHistory& rkh,
                   const kpabe::Universe& universe);
ReencryptionKeyHistory read_history(ByteReader& r, const kpabe::Universe& universe);

}  // namespace abe_cities::pre
