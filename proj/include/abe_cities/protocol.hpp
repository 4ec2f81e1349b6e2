#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abe_cities/attrspace.hpp"
#include "abe_cities/city.hpp"
#include "abe_cities/css_store.hpp"
#include "abe_cities/kpabe.hpp"
#include "abe_cities/pre.hpp"
#include "abe_cities/rng.hpp"
#include "abe_cities/sym_crypto.hpp"

// The four actors (trusted third party, cloud storage service, sensing
// devices, users) and the procedures connecting them. Actors only exchange
// byte strings through a Fabric, which records every message.
namespace abe_cities::protocol {

using attrspace::AttributeSpace;
using attrspace::PolicySpec;
using symcrypto::Key;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SignatureError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class StaleMessageError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class BootRejected : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// (payload, date, signature) as carried by every TTP message. The signature
// covers the message kind, the date and the payload.
struct SignedMessage {
  std::string kind;
  std::uint32_t date = 0;
  Bytes payload;
  symcrypto::Signature signature{};

  static SignedMessage make(std::string kind, std::uint32_t date, Bytes payload,
                            const symcrypto::SigningKeyPair& signer);
  Bytes encode() const;
  static SignedMessage decode(std::span<const std::uint8_t> bytes);
  // Throws SignatureError or StaleMessageError; returns the payload.
  const Bytes& open(const std::string& expected_kind, std::span<const std::uint8_t, 32> signer,
                    std::uint32_t today) const;
};

struct Envelope {
  std::string from;
  std::string to;
  std::string kind;
  Bytes body;
};

// In-process message transport with a recording tap and an optional
// interceptor that may rewrite messages in flight.
class Fabric {
 public:
  using Interceptor = std::function<void(Envelope&)>;

  Bytes transmit(Envelope e);
  const std::vector<Envelope>& transcript() const { return transcript_; }
  void set_interceptor(Interceptor f) { interceptor_ = std::move(f); }

 private:
  std::vector<Envelope> transcript_;
  Interceptor interceptor_;
};

struct DeviceInfo {
  std::uint32_t id = 0;
  citysim::SegmentRef at;
};

class Ttp {
 public:
  Ttp(AttributeSpace space, std::vector<DeviceInfo> devices, Rng rng);

  const AttributeSpace& space() const { return space_; }
  const kpabe::Universe& universe() const { return space_.universe(); }
  const kpabe::PublicParams& public_params() const { return pk_; }
  std::span<const std::uint8_t, 32> signing_key() const { return signer_.public_key; }
  const pre::AttributeVersionTable& versions() const { return versions_; }
  std::uint32_t day() const { return day_; }
  void set_day(std::uint32_t d) {
    day_ = d;
    seals_today_.clear();
  }

  // Long-term device keys, preloaded at manufacture.
  const Key& long_term_key(std::uint32_t device) const { return k_lt_.at(device); }

  void register_user(std::uint32_t user, std::span<const std::uint8_t, 32> box_public_key);
  const std::optional<kpabe::AccessPolicy>& issued_policy(std::uint32_t user) const;

  struct KeyIssue {
    Bytes to_user;  // sealed SignedMessage("dk", user || DK)
    Bytes to_css;   // SignedMessage("dk-road", user || road components)
  };
  KeyIssue issue_key(std::uint32_t user, const PolicySpec& spec);

  // SignedMessage("seal", device || day || ASK || boot material) per device.
  std::vector<Bytes> seal();
  // SignedMessage("revoke", user || re-encryption keys).
  Bytes revoke(std::uint32_t user);

 private:
  AttributeSpace space_;
  std::vector<DeviceInfo> devices_;
  Rng rng_;
  kpabe::MasterKey mk_;
  kpabe::PublicParams pk_;
  symcrypto::SigningKeyPair signer_;
  pre::AttributeVersionTable versions_;
  std::map<std::uint32_t, Key> k_lt_;
  struct UserRecord {
    std::array<std::uint8_t, 32> box_public_key{};
    std::optional<kpabe::AccessPolicy> policy;
  };
  std::map<std::uint32_t, UserRecord> users_;
  std::map<std::uint32_t, std::uint32_t> seals_today_;  // device -> generations sealed today
  std::uint32_t day_ = 1;
};

class Css {
 public:
  Css(const kpabe::Universe* universe, std::span<const std::uint8_t, 32> ttp_key);

  const CssStore& store() const { return store_; }
  CssStore& mutable_store() { return store_; }
  void set_day(std::uint32_t d) { day_ = d; }

  void accept_user_components(std::span<const std::uint8_t> message);
  // Returns the generation stored.
  std::uint32_t accept_sealed(std::span<const std::uint8_t> message);
  void accept_revocation(std::span<const std::uint8_t> message);

  // generation || boot material of the newest generation for (device, day).
  Bytes boot_material_for(std::uint32_t device, std::uint32_t day) const;
  // Returns the item index.
  std::uint32_t store_data(std::uint32_t device, std::span<const std::uint8_t> upload);

  // Lazily refreshes the user's stored components and the item's ASK, then
  // returns (components, ASK, item) for the user.
  Bytes serve(std::span<const std::uint8_t> request);

  std::size_t lazy_key_updates() const { return lazy_key_updates_; }
  std::size_t lazy_ciphertext_updates() const { return lazy_ct_updates_; }

 private:
  const kpabe::Universe* universe_;
  std::array<std::uint8_t, 32> ttp_key_{};
  CssStore store_;
  std::uint32_t day_ = 1;
  std::size_t lazy_key_updates_ = 0;
  std::size_t lazy_ct_updates_ = 0;
};

// Associated data binding an encrypted item to its position.
Bytes data_ad(std::uint32_t device, std::uint32_t day, std::uint32_t generation, std::uint32_t counter);
Bytes boot_ad(std::uint32_t device, std::uint32_t day, std::uint32_t generation);

class Device {
 public:
  Device(DeviceInfo info, Key long_term_key, Rng rng);

  std::uint32_t id() const { return info_.id; }
  const DeviceInfo& info() const { return info_; }
  void set_day(std::uint32_t d) { day_ = d; }

  // Throws BootRejected when the MAC fails or the date is not today.
  void accept_boot(std::span<const std::uint8_t> material);
  bool booted() const { return dek_.has_value(); }

  // day || generation || counter || ESD; advances the hash chain.
  Bytes produce(std::span<const std::uint8_t> plaintext);

  struct State {
    std::uint32_t day = 0;
    std::uint32_t generation = 0;
    std::uint32_t counter = 0;
    Key dek{};
  };
  // Everything an attacker learns by capturing the device now.
  State leak_state() const;

 private:
  DeviceInfo info_;
  Key k_lt_;
  Rng rng_;
  std::uint32_t day_ = 1;
  std::uint32_t generation_ = 0;
  std::optional<Key> dek_;
  std::uint32_t counter_ = 0;
};

enum class ConsumeStatus { ok, denied, version_mismatch, integrity_failure, no_key };
const char* to_string(ConsumeStatus s);

struct ConsumeResult {
  ConsumeStatus status = ConsumeStatus::denied;
  Bytes plaintext;

  // Decryption of the sealed key failed: policy unsatisfied or stale key.
  bool bottom() const { return status == ConsumeStatus::denied || status == ConsumeStatus::version_mismatch; }
};

class User {
 public:
  User(std::uint32_t id, const kpabe::Universe* universe, Rng& rng);

  std::uint32_t id() const { return id_; }
  std::span<const std::uint8_t, 32> box_public_key() const { return box_.public_key; }
  void set_day(std::uint32_t d) { day_ = d; }

  // Throws SignatureError / StaleMessageError / ProtocolError.
  void accept_key(std::span<const std::uint8_t> sealed, std::span<const std::uint8_t, 32> ttp_key);
  const std::optional<kpabe::DecryptionKey>& key() const { return key_; }

  Bytes request(std::uint32_t device, std::uint32_t day, std::uint32_t item) const;
  ConsumeResult consume(std::span<const std::uint8_t> response);

 private:
  std::uint32_t id_;
  const kpabe::Universe* universe_;
  symcrypto::BoxKeyPair box_;
  std::optional<kpabe::DecryptionKey> key_;
  std::uint32_t day_ = 1;
};

struct SystemConfig {
  citysim::CityModel city;  // device placements come from city.devices()
  attrspace::Representation representation = attrspace::Representation::segment_tree();
  attrspace::TimeConfig time{30};
  std::uint64_t seed = 1;
};

struct ProduceReceipt {
  std::uint32_t day = 0;
  std::uint32_t index = 0;
  std::uint32_t counter = 0;
};

// Wires the actors together and runs the system procedures. Every call is
// appended to a JSON-lines trace that replay() can re-execute.
class System {
 public:
  explicit System(SystemConfig config);

  std::uint32_t day() const { return day_; }
  void advance_day();

  std::uint32_t add_user();
  void distribute_key(std::uint32_t user, const PolicySpec& spec);
  void seal_day();
  ProduceReceipt produce_data(std::uint32_t device, std::span<const std::uint8_t> plaintext);
  ConsumeResult consume_data(std::uint32_t user, std::uint32_t device, std::uint32_t day, std::uint32_t item);
  void revoke_key(std::uint32_t user);

  Ttp& ttp() { return *ttp_; }
  const Ttp& ttp() const { return *ttp_; }
  Css& css() { return *css_; }
  const Css& css() const { return *css_; }
  Device& device(std::uint32_t id) { return *devices_.at(id); }
  User& user(std::uint32_t id) { return *users_.at(id); }
  Fabric& fabric() { return fabric_; }
  const SystemConfig& config() const { return config_; }
  std::vector<std::uint32_t> device_ids() const;

  const std::vector<std::string>& trace() const { return trace_; }
  void write_trace(std::ostream& out) const;

  struct ReplayReport {
    std::size_t events = 0;
    std::size_t mismatches = 0;
    std::vector<std::string> details;
  };
  // Re-runs a recorded trace on a fresh system built from `config` and
  // compares every recorded outcome.
  static ReplayReport replay(const SystemConfig& config, std::istream& trace);

 private:
  void record(std::string line) { trace_.push_back(std::move(line)); }

  SystemConfig config_;
  Rng rng_;
  Fabric fabric_;
  std::unique_ptr<Ttp> ttp_;
  std::unique_ptr<Css> css_;
  std::map<std::uint32_t, std::unique_ptr<Device>> devices_;
  std::map<std::uint32_t, std::unique_ptr<User>> users_;
  std::uint32_t next_user_ = 1;
  std::uint32_t day_ = 1;
  std::vector<std::string> trace_;
};

}  // namespace abe_cities::protocol
