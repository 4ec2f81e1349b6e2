#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "abe_cities/bytes.hpp"
#include "abe_cities/kpabe.hpp"
#include "abe_cities/pre.hpp"

namespace abe_cities::protocol {

using kpabe::AttributeId;
using kpabe::VersionedElement;

// A write would put forbidden material into the cloud store.
class CssInvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct DataItem {
  std::uint32_t generation = 0;
  std::uint32_t counter = 0;
  Bytes esd;
};

struct SealedGeneration {
  kpabe::Ciphertext ask;
  Bytes boot_material;
};

using DeviceDay = std::pair<std::uint32_t, std::uint32_t>;  // (device, day)

// What the cloud storage service holds. It never sees the master key, device
// long-term keys, plaintext data or any time-attribute key component; every
// write of user key material is checked against the last of these.
class CssStore {
 public:
  CssStore() = default;
  explicit CssStore(const kpabe::Universe* universe) : universe_(universe) {}

  const kpabe::Universe& universe() const { return *universe_; }

  // Histories exist for road attributes only. Throws CssInvariantError for a
  // time attribute.
  void create_history(AttributeId i);
  void append_reencryption_key(const pre::ReencryptionKey& rk);
  const pre::HistoryMap& histories() const { return histories_; }

  // Throws CssInvariantError if any component belongs to a time attribute.
  void put_user_components(std::uint32_t user, std::map<AttributeId, VersionedElement> components);
  void update_user_component(std::uint32_t user, AttributeId i, const VersionedElement& c);
  void erase_user(std::uint32_t user);
  const std::map<AttributeId, VersionedElement>* user_components(std::uint32_t user) const;
  const std::map<std::uint32_t, std::map<AttributeId, VersionedElement>>& all_user_components() const {
    return users_;
  }

  // Returns the new generation number.
  std::uint32_t add_sealed(std::uint32_t device, std::uint32_t day, SealedGeneration g);
  std::vector<SealedGeneration>* sealed(std::uint32_t device, std::uint32_t day);
  const std::map<DeviceDay, std::vector<SealedGeneration>>& all_sealed() const { return sealed_; }

  // Returns the item index within (device, day).
  std::uint32_t append_data(std::uint32_t device, std::uint32_t day, DataItem item);
  const DataItem* data(std::uint32_t device, std::uint32_t day, std::uint32_t index) const;
  DataItem* mutable_data(std::uint32_t device, std::uint32_t day, std::uint32_t index);
  const std::map<DeviceDay, std::vector<DataItem>>& all_data() const { return data_; }

  // Full structural scan; throws CssInvariantError.
  void check_invariants() const;
  std::size_t checked_writes() const { return checked_writes_; }

  // One file per object class under `dir`.
  void save(const std::filesystem::path& dir) const;
  static CssStore load(const std::filesystem::path& dir, const kpabe::Universe* universe);

  bool operator==(const CssStore& other) const;

 private:
  void require_road(AttributeId i, const char* what) const;

  const kpabe::Universe* universe_ = nullptr;
  pre::HistoryMap histories_;
  std::map<std::uint32_t, std::map<AttributeId, VersionedElement>> users_;
  std::map<DeviceDay, std::vector<SealedGeneration>> sealed_;
  std::map<DeviceDay, std::vector<DataItem>> data_;
  mutable std::size_t checked_writes_ = 0;
};

}  // namespace abe_cities::protocol
