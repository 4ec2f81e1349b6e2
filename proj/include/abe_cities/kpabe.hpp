#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abe_cities/bytes.hpp"
#include "abe_cities/pairing.hpp"
#include "abe_cities/rng.hpp"

// Key-policy attribute-based encryption (small-universe construction of
// Goyal, Pandey, Sahai and Waters) restricted to monotone AND/OR policies.
//
//   Setup    t_i, y <- Z_r          T_i = g^t_i,  Y = e(g,g)^y
//   Encrypt  s <- Z_r               blinded = M * Y^s,  e_i = T_i^s
//   KeyGen   AND gates share their secret with a random polynomial of degree
//            n-1 (n-of-n), OR gates copy it (1-of-n); a leaf over attribute i
//            holding share q gets dk_i = g^(q / t_i)
//   Decrypt  e(dk_i, e_i) = e(g,g)^(s q); Lagrange interpolation up the tree
//            yields e(g,g)^(s y)
//
// Every per-attribute quantity carries a version number which the proxy
// re-encryption layer bumps when an attribute is updated.
namespace abe_cities::kpabe {

using pairing::G1;
using pairing::GT;
using pairing::Zr;

struct AttributeId {
  std::uint32_t value = 0;
  auto operator<=>(const AttributeId&) const = default;
};

// Road attributes may be updated by revocation; time attributes never are.
enum class Partition : std::uint8_t { road = 0, time = 1 };

class KpAbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UnknownAttributeError : public KpAbeError {
 public:
  using KpAbeError::KpAbeError;
};
class MalformedPolicyError : public KpAbeError {
 public:
  using KpAbeError::KpAbeError;
};
// A key and ciphertext component needed for decryption were produced under
// different versions of the same attribute.
class VersionMismatchError : public KpAbeError {
 public:
  using KpAbeError::KpAbeError;
};

// The attribute universe. Ids are dense, assigned in insertion order.
class Universe {
 public:
  AttributeId add(std::string name, Partition partition);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  bool contains(AttributeId id) const { return id.value < names_.size(); }
  const std::string& name(AttributeId id) const;
  Partition partition(AttributeId id) const;
  std::optional<AttributeId> find(const std::string& name) const;
  AttributeId at(const std::string& name) const;  // throws UnknownAttributeError
  std::vector<AttributeId> ids() const;
  std::vector<AttributeId> ids(Partition partition) const;
  std::size_t count(Partition partition) const;

 private:
  std::vector<std::string> names_;
  std::vector<Partition> partitions_;
  std::unordered_map<std::string, AttributeId> index_;
};

using AttributeSet = std::set<AttributeId>;

struct VersionedExponent {
  Zr value;
  std::uint32_t version = 0;
};

struct VersionedElement {
  G1 value;
  std::uint32_t version = 0;
};

struct MasterKey {
  Zr y;
  std::vector<VersionedExponent> t;  // indexed by AttributeId::value
};

struct PublicParams {
  GT Y;
  std::vector<VersionedElement> T;  // indexed by AttributeId::value
};

// Node of a monotone access tree.
class PolicyNode {
 public:
  enum class Kind : std::uint8_t { leaf = 0, all_of = 1, any_of = 2 };

  static PolicyNode leaf(AttributeId attribute);
  static PolicyNode all_of(std::vector<PolicyNode> children);
  static PolicyNode any_of(std::vector<PolicyNode> children);

  Kind kind() const { return kind_; }
  bool is_leaf() const { return kind_ == Kind::leaf; }
  AttributeId attribute() const { return attribute_; }
  const std::vector<PolicyNode>& children() const { return children_; }

  bool operator==(const PolicyNode&) const = default;

 private:
  Kind kind_ = Kind::leaf;
  AttributeId attribute_{};
  std::vector<PolicyNode> children_;
};

// Monotone AND/OR formula. Leaves must name distinct attributes and every
// gate needs at least one child.
class AccessPolicy {
 public:
  AccessPolicy() = default;
  // Throws MalformedPolicyError.
  explicit AccessPolicy(PolicyNode root);

  const PolicyNode& root() const { return root_; }
  // Leaf attributes in depth-first order.
  const std::vector<AttributeId>& leaves() const { return leaves_; }
  AttributeSet leaf_set() const { return AttributeSet(leaves_.begin(), leaves_.end()); }
  std::size_t leaf_count() const { return leaves_.size(); }

  std::string to_string(const Universe& universe) const;

  bool operator==(const AccessPolicy& o) const { return root_ == o.root_; }

 private:
  PolicyNode root_;
  std::vector<AttributeId> leaves_;
};

struct Ciphertext {
  AttributeSet attributes;  // gamma
  GT blinded;
  std::map<AttributeId, VersionedElement> components;
};

struct DecryptionKey {
  AccessPolicy policy;
  std::map<AttributeId, VersionedElement> components;

  AttributeSet attributes() const { return policy.leaf_set(); }  // lambda
};

inline constexpr int kSupportedSecurityBits = 80;

// Throws KpAbeError for an empty universe or a security level above what the
// curve provides.
std::pair<MasterKey, PublicParams> setup(const Universe& universe, Rng& rng,
                                         int security_bits = kSupportedSecurityBits);

// Uniform element of GT, used as key material.
GT random_payload(Rng& rng);

// Throws UnknownAttributeError when gamma mentions an attribute outside
// params, KpAbeError when gamma is empty.
Ciphertext encrypt(const GT& payload, const AttributeSet& gamma, const PublicParams& params,
                   Rng& rng);

// Throws UnknownAttributeError for leaves outside the master key.
DecryptionKey keygen(const MasterKey& mk, const AccessPolicy& policy, Rng& rng);

// Returns the payload when gamma satisfies the key's policy using components
// whose versions agree, std::nullopt when gamma does not satisfy the policy.
// Throws VersionMismatchError when gamma would satisfy the policy but only
// through components of differing versions.
std::optional<GT> decrypt(const Ciphertext& ct, const DecryptionKey& key);

// Plain monotone Boolean evaluation of the formula over attribute presence.
bool eval_policy(const AccessPolicy& policy, const AttributeSet& gamma);
bool eval_policy(const PolicyNode& node, const std::function<bool(AttributeId)>& present);

// Fixed binary layouts. Attributes are written by name; decoding resolves
// names against the universe.
Bytes serialize(const MasterKey& mk, const Universe& universe);
Bytes serialize(const PublicParams& pk, const Universe& universe);
Bytes serialize(const Ciphertext& ct, const Universe& universe);
Bytes serialize(const DecryptionKey& dk, const Universe& universe);
MasterKey deserialize_master_key(std::span<const std::uint8_t> bytes, const Universe& universe);
PublicParams deserialize_public_params(std::span<const std::uint8_t> bytes,
                                       const Universe& universe);
Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes, const Universe& universe);
DecryptionKey deserialize_decryption_key(std::span<const std::uint8_t> bytes,
                                         const Universe& universe);

// Versioned component records shared by the key, ciphertext and store formats.
void write_component(ByteWriter& w, const Universe& universe, AttributeId id,
                     const VersionedElement& c);
std::pair<AttributeId, VersionedElement> read_component(ByteReader& r, const Universe& universe);
void write_policy(ByteWriter& w, const Universe& universe, const PolicyNode& node);
PolicyNode read_policy(ByteReader& r, const Universe& universe);

// Byte size of one serialized component record for `name`.
std::size_t component_record_size(const std::string& name);

}  // namespace abe_cities::kpabe

template <>
struct std::hash<abe_cities::kpabe::AttributeId> {
  std::size_t operator()(const abe_cities::kpabe::AttributeId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
