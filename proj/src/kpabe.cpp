#include "abe_cities/kpabe.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace abe_cities::kpabe {

// ---------------------------------------------------------------------------
// Universe

AttributeId Universe::add(std::string name, Partition partition) {
  if (index_.contains(name)) throw KpAbeError("duplicate attribute name '" + name + "'");
  const AttributeId id{static_cast<std::uint32_t>(names_.size())};
  index_.emplace(name, id);
  names_.push_back(std::move(name));
  partitions_.push_back(partition);
  return id;
}

const std::string& Universe::name(AttributeId id) const {
  if (!contains(id)) throw UnknownAttributeError("attribute id " + std::to_string(id.value));
  return names_[id.value];
}

Partition Universe::partition(AttributeId id) const {
  if (!contains(id)) throw UnknownAttributeError("attribute id " + std::to_string(id.value));
  return partitions_[id.value];
}

std::optional<AttributeId> Universe::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AttributeId Universe::at(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw UnknownAttributeError("unknown attribute '" + name + "'");
}

std::vector<AttributeId> Universe::ids() const {
  std::vector<AttributeId> out(names_.size());
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = AttributeId{i};
  return out;
}

std::vector<AttributeId> Universe::ids(Partition partition) const {
  std::vector<AttributeId> out;
  for (std::uint32_t i = 0; i < names_.size(); ++i)
    if (partitions_[i] == partition) out.push_back(AttributeId{i});
  return out;
}

std::size_t Universe::count(Partition partition) const {
  return static_cast<std::size_t>(std::count(partitions_.begin(), partitions_.end(), partition));
}

// ---------------------------------------------------------------------------
// Policies

PolicyNode PolicyNode::leaf(AttributeId attribute) {
  PolicyNode n;
  n.kind_ = Kind::leaf;
  n.attribute_ = attribute;
  return n;
}

PolicyNode PolicyNode::all_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind_ = Kind::all_of;
  n.children_ = std::move(children);
  return n;
}

PolicyNode PolicyNode::any_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind_ = Kind::any_of;
  n.children_ = std::move(children);
  return n;
}

namespace {

void collect_leaves(const PolicyNode& node, std::vector<AttributeId>& out) {
  if (node.is_leaf()) {
    out.push_back(node.attribute());
    return;
  }
  if (node.children().empty()) throw MalformedPolicyError("gate without children");
  for (const auto& c : node.children()) collect_leaves(c, out);
}

void render(const PolicyNode& node, const Universe& universe, std::ostringstream& os) {
  if (node.is_leaf()) {
    os << (universe.contains(node.attribute()) ? universe.name(node.attribute())
                                               : "#" + std::to_string(node.attribute().value));
    return;
  }
  if (node.children().size() == 1) {
    render(node.children().front(), universe, os);
    return;
  }
  const char* op = node.kind() == PolicyNode::Kind::all_of ? " AND " : " OR ";
  os << '(';
  for (std::size_t i = 0; i < node.children().size(); ++i) {
    if (i) os << op;
    render(node.children()[i], universe, os);
  }
  os << ')';
}

}  // namespace

AccessPolicy::AccessPolicy(PolicyNode root) : root_(std::move(root)) {
  collect_leaves(root_, leaves_);
  std::vector<AttributeId> sorted = leaves_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw MalformedPolicyError("attribute appears on more than one leaf");
}

std::string AccessPolicy::to_string(const Universe& universe) const {
  std::ostringstream os;
  render(root_, universe, os);
  return os.str();
}

bool eval_policy(const PolicyNode& node, const std::function<bool(AttributeId)>& present) {
  switch (node.kind()) {
    case PolicyNode::Kind::leaf:
      return present(node.attribute());
    case PolicyNode::Kind::all_of:
      return std::all_of(node.children().begin(), node.children().end(),
                         [&](const PolicyNode& c) { return eval_policy(c, present); });
    case PolicyNode::Kind::any_of:
      return std::any_of(node.children().begin(), node.children().end(),
                         [&](const PolicyNode& c) { return eval_policy(c, present); });
  }
  return false;
}

bool eval_policy(const AccessPolicy& policy, const AttributeSet& gamma) {
  if (policy.leaves().empty()) return false;
  return eval_policy(policy.root(), [&](AttributeId a) { return gamma.contains(a); });
}

// ---------------------------------------------------------------------------
// Scheme

std::pair<MasterKey, PublicParams> setup(const Universe& universe, Rng& rng, int security_bits) {
  if (universe.empty()) throw KpAbeError("setup needs a non-empty attribute universe");
  if (security_bits > kSupportedSecurityBits)
    throw KpAbeError("requested " + std::to_string(security_bits) +
                     "-bit security; the pairing group provides " +
                     std::to_string(kSupportedSecurityBits));
  MasterKey mk;
  PublicParams pk;
  mk.y = Zr::random_nonzero(rng);
  pk.Y = GT::generator().pow(mk.y);
  mk.t.reserve(universe.size());
  pk.T.reserve(universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) {
    Zr t = Zr::random_nonzero(rng);
    pk.T.push_back({G1::mul_generator(t), 0});
    mk.t.push_back({std::move(t), 0});
  }
  return {std::move(mk), std::move(pk)};
}

GT random_payload(Rng& rng) { return GT::generator().pow(Zr::random_nonzero(rng)); }

Ciphertext encrypt(const GT& payload, const AttributeSet& gamma, const PublicParams& params,
                   Rng& rng) {
  if (gamma.empty()) throw KpAbeError("encryption attribute set is empty");
  for (AttributeId a : gamma)
    if (a.value >= params.T.size())
      throw UnknownAttributeError("attribute id " + std::to_string(a.value) + " not in params");
  const Zr s = Zr::random_nonzero(rng);
  Ciphertext ct;
  ct.attributes = gamma;
  ct.blinded = payload * params.Y.pow(s);
  for (AttributeId a : gamma) {
    const VersionedElement& T = params.T[a.value];
    ct.components.emplace(a, VersionedElement{T.value * s, T.version});
  }
  return ct;
}

namespace {

void share(const PolicyNode& node, const Zr& secret, const MasterKey& mk, Rng& rng,
           DecryptionKey& key) {
  switch (node.kind()) {
    case PolicyNode::Kind::leaf: {
      const AttributeId a = node.attribute();
      if (a.value >= mk.t.size())
        throw UnknownAttributeError("attribute id " + std::to_string(a.value) + " not in master key");
      const VersionedExponent& t = mk.t[a.value];
      key.components.emplace(a, VersionedElement{G1::mul_generator(secret * t.value.inverse()),
                                                 t.version});
      return;
    }
    case PolicyNode::Kind::any_of:
      for (const auto& c : node.children()) share(c, secret, mk, rng, key);
      return;
    case PolicyNode::Kind::all_of: {
      // q(0) = secret, degree n - 1; child k receives q(k).
      const std::size_t n = node.children().size();
      std::vector<Zr> coeffs{secret};
      for (std::size_t d = 1; d < n; ++d) coeffs.push_back(Zr::random(rng));
      for (std::size_t k = 1; k <= n; ++k) {
        const Zr x(k);
        Zr value;
        for (std::size_t d = coeffs.size(); d-- > 0;) value = value * x + coeffs[d];
        share(node.children()[k - 1], value, mk, rng, key);
      }
      return;
    }
  }
}

// Lagrange coefficient of point k over {1..n}, evaluated at 0.
Zr lagrange_at_zero(std::size_t k, std::size_t n) {
  Zr num(1), den(1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (j == k) continue;
    num = num * -Zr(j);
    den = den * (Zr(k) - Zr(j));
  }
  return num * den.inverse();
}

constexpr std::size_t kUnsat = std::numeric_limits<std::size_t>::max();

// Number of pairings needed to satisfy `node` using only usable leaves, or
// kUnsat.
std::size_t cost(const PolicyNode& node, const std::function<bool(AttributeId)>& usable) {
  switch (node.kind()) {
    case PolicyNode::Kind::leaf:
      return usable(node.attribute()) ? 1 : kUnsat;
    case PolicyNode::Kind::all_of: {
      std::size_t total = 0;
      for (const auto& c : node.children()) {
        const std::size_t k = cost(c, usable);
        if (k == kUnsat) return kUnsat;
        total += k;
      }
      return total;
    }
    case PolicyNode::Kind::any_of: {
      std::size_t best = kUnsat;
      for (const auto& c : node.children()) best = std::min(best, cost(c, usable));
      return best;
    }
  }
  return kUnsat;
}

pairing::MillerValue evaluate(const PolicyNode& node, const Ciphertext& ct,
                              const DecryptionKey& key,
                              const std::function<bool(AttributeId)>& usable) {
  switch (node.kind()) {
    case PolicyNode::Kind::leaf: {
      const AttributeId a = node.attribute();
      return pairing::miller_loop(key.components.at(a).value, ct.components.at(a).value);
    }
    case PolicyNode::Kind::any_of: {
      // A single interpolation point has Lagrange coefficient 1.
      const PolicyNode* best = nullptr;
      std::size_t best_cost = kUnsat;
      for (const auto& c : node.children()) {
        const std::size_t k = cost(c, usable);
        if (k < best_cost) {
          best_cost = k;
          best = &c;
        }
      }
      return evaluate(*best, ct, key, usable);
    }
    case PolicyNode::Kind::all_of: {
      const std::size_t n = node.children().size();
      pairing::MillerValue acc;
      for (std::size_t k = 1; k <= n; ++k) {
        pairing::MillerValue v = evaluate(node.children()[k - 1], ct, key, usable);
        acc = acc * (n == 1 ? v : v.pow(lagrange_at_zero(k, n)));
      }
      return acc;
    }
  }
  return {};
}

}  // namespace

DecryptionKey keygen(const MasterKey& mk, const AccessPolicy& policy, Rng& rng) {
  if (policy.leaves().empty()) throw MalformedPolicyError("policy has no leaves");
  DecryptionKey key;
  key.policy = policy;
  share(policy.root(), mk.y, mk, rng, key);
  return key;
}

std::optional<GT> decrypt(const Ciphertext& ct, const DecryptionKey& key) {
  if (key.policy.leaves().empty()) return std::nullopt;
  auto present = [&](AttributeId a) {
    return ct.components.contains(a) && key.components.contains(a);
  };
  auto usable = [&](AttributeId a) {
    if (!present(a)) return false;
    return ct.components.at(a).version == key.components.at(a).version;
  };
  if (cost(key.policy.root(), usable) == kUnsat) {
    if (eval_policy(key.policy.root(), present))
      throw VersionMismatchError("policy satisfied only through components of differing versions");
    return std::nullopt;
  }
  const GT blinding = evaluate(key.policy.root(), ct, key, usable).finalize();
  return ct.blinded / blinding;
}

// ---------------------------------------------------------------------------
// Serialization

std::size_t component_record_size(const std::string& name) {
  return 4 + name.size() + 4 + pairing::kG1Bytes;
}

void write_component(ByteWriter& w, const Universe& universe, AttributeId id,
                     const VersionedElement& c) {
  w.str(universe.name(id));
  w.u32(c.version);
  w.raw(c.value.to_bytes());
}

std::pair<AttributeId, VersionedElement> read_component(ByteReader& r, const Universe& universe) {
  const AttributeId id = universe.at(r.str());
  VersionedElement c;
  c.version = r.u32();
  c.value = G1::from_bytes(r.raw(pairing::kG1Bytes));
  return {id, std::move(c)};
}

void write_policy(ByteWriter& w, const Universe& universe, const PolicyNode& node) {
  w.u8(static_cast<std::uint8_t>(node.kind()));
  if (node.is_leaf()) {
    w.str(universe.name(node.attribute()));
    return;
  }
  w.u32(static_cast<std::uint32_t>(node.children().size()));
  for (const auto& c : node.children()) write_policy(w, universe, c);
}

PolicyNode read_policy(ByteReader& r, const Universe& universe) {
  const auto kind = r.u8();
  if (kind == static_cast<std::uint8_t>(PolicyNode::Kind::leaf))
    return PolicyNode::leaf(universe.at(r.str()));
  if (kind != static_cast<std::uint8_t>(PolicyNode::Kind::all_of) &&
      kind != static_cast<std::uint8_t>(PolicyNode::Kind::any_of))
    throw FormatError("unknown policy node kind");
  const std::uint32_t n = r.u32();
  std::vector<PolicyNode> children;
  for (std::uint32_t i = 0; i < n; ++i) children.push_back(read_policy(r, universe));
  return kind == static_cast<std::uint8_t>(PolicyNode::Kind::all_of)
             ? PolicyNode::all_of(std::move(children))
             : PolicyNode::any_of(std::move(children));
}

Bytes serialize(const MasterKey& mk, const Universe& universe) {
  ByteWriter w;
  w.header(RecordKind::master_key);
  w.raw(mk.y.to_bytes());
  w.u32(static_cast<std::uint32_t>(mk.t.size()));
  for (std::uint32_t i = 0; i < mk.t.size(); ++i) {
    w.str(universe.name(AttributeId{i}));
    w.u32(mk.t[i].version);
    w.raw(mk.t[i].value.to_bytes());
  }
  return std::move(w).take();
}

Bytes serialize(const PublicParams& pk, const Universe& universe) {
  ByteWriter w;
  w.header(RecordKind::public_params);
  w.raw(pk.Y.to_bytes());
  w.u32(static_cast<std::uint32_t>(pk.T.size()));
  for (std::uint32_t i = 0; i < pk.T.size(); ++i) write_component(w, universe, AttributeId{i}, pk.T[i]);
  return std::move(w).take();
}

Bytes serialize(const Ciphertext& ct, const Universe& universe) {
  ByteWriter w;
  w.header(RecordKind::ciphertext);
  w.raw(ct.blinded.to_bytes());
  w.u32(static_cast<std::uint32_t>(ct.components.size()));
  for (const auto& [id, c] : ct.components) write_component(w, universe, id, c);
  return std::move(w).take();
}

Bytes serialize(const DecryptionKey& dk, const Universe& universe) {
  ByteWriter w;
  w.header(RecordKind::decryption_key);
  write_policy(w, universe, dk.policy.root());
  w.u32(static_cast<std::uint32_t>(dk.components.size()));
  for (const auto& [id, c] : dk.components) write_component(w, universe, id, c);
  return std::move(w).take();
}

namespace {

// Records list attributes in id order; a permuted or partial table is rejected.
void expect_dense(AttributeId id, std::uint32_t position) {
  if (id.value != position) throw FormatError("attribute table out of universe order");
}

}  // namespace

MasterKey deserialize_master_key(std::span<const std::uint8_t> bytes, const Universe& universe) {
  ByteReader r(bytes);
  r.expect_header(RecordKind::master_key);
  MasterKey mk;
  mk.y = Zr::from_bytes(r.raw(pairing::kZrBytes));
  const std::uint32_t n = r.u32();
  if (n != universe.size()) throw FormatError("master key does not match the universe size");
  for (std::uint32_t i = 0; i < n; ++i) {
    expect_dense(universe.at(r.str()), i);
    VersionedExponent t;
    t.version = r.u32();
    t.value = Zr::from_bytes(r.raw(pairing::kZrBytes));
    mk.t.push_back(std::move(t));
  }
  r.expect_done();
  return mk;
}

PublicParams deserialize_public_params(std::span<const std::uint8_t> bytes,
                                       const Universe& universe) {
  ByteReader r(bytes);
  r.expect_header(RecordKind::public_params);
  PublicParams pk;
  pk.Y = GT::from_bytes(r.raw(pairing::kGtBytes));
  const std::uint32_t n = r.u32();
  if (n != universe.size()) throw FormatError("public params do not match the universe size");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto [id, c] = read_component(r, universe);
    expect_dense(id, i);
    pk.T.push_back(std::move(c));
  }
  r.expect_done();
  return pk;
}

Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes, const Universe& universe) {
  ByteReader r(bytes);
  r.expect_header(RecordKind::ciphertext);
  Ciphertext ct;
  ct.blinded = GT::from_bytes(r.raw(pairing::kGtBytes));
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto [id, c] = read_component(r, universe);
    if (!ct.components.emplace(id, std::move(c)).second)
      throw FormatError("duplicate ciphertext component");
    ct.attributes.insert(id);
  }
  r.expect_done();
  return ct;
}

DecryptionKey deserialize_decryption_key(std::span<const std::uint8_t> bytes,
                                         const Universe& universe) {
  ByteReader r(bytes);
  r.expect_header(RecordKind::decryption_key);
  DecryptionKey dk;
  dk.policy = AccessPolicy(read_policy(r, universe));
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto [id, c] = read_component(r, universe);
    if (!dk.components.emplace(id, std::move(c)).second)
      throw FormatError("duplicate key component");
  }
  if (dk.components.size() != dk.policy.leaf_count())
    throw FormatError("key components do not match the policy leaves");
  for (AttributeId a : dk.policy.leaves())
    if (!dk.components.contains(a)) throw FormatError("key component missing for a policy leaf");
  r.expect_done();
  return dk;
}

}  // namespace abe_cities::kpabe
