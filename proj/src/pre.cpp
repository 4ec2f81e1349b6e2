#include "abe_cities/pre.hpp"

#include <string>

namespace abe_cities::pre {

using kpabe::Partition;
using kpabe::VersionedElement;

void ReencryptionKeyHistory::append(ReencryptionKey rk) {
  if (rk.attribute != attribute_) throw PreError("re-encryption key for a different attribute");
  if (rk.from_version != current_version() || rk.to_version != rk.from_version + 1)
    throw PreError("re-encryption key " + std::to_string(rk.from_version) + "->" +
                   std::to_string(rk.to_version) + " does not extend history at version " +
                   std::to_string(current_version()));
  entries_.push_back(std::move(rk));
}

AttributeVersionTable::AttributeVersionTable(const kpabe::Universe& universe)
    : versions_(universe.size(), 0) {
  partitions_.reserve(universe.size());
  for (auto id : universe.ids()) partitions_.push_back(universe.partition(id));
}

std::uint32_t AttributeVersionTable::version(AttributeId id) const { return versions_.at(id.value); }

void AttributeVersionTable::bump(AttributeId id) {
  if (partitions_.at(id.value) == Partition::time)
    throw PreError("time attributes are never updated");
  ++versions_[id.value];
}

AttributeUpdate update_attribute(AttributeId i, const kpabe::Universe& universe,
                                 kpabe::MasterKey& mk, kpabe::PublicParams& params, Rng& rng) {
  if (universe.partition(i) == Partition::time)
    throw PreError("time attribute '" + universe.name(i) + "' cannot be updated");
  kpabe::VersionedExponent& t = mk.t.at(i.value);
  VersionedElement& T = params.T.at(i.value);
  if (t.version != T.version) throw PreError("master key and public params disagree on version");

  const pairing::Zr fresh = pairing::Zr::random_nonzero(rng);
  AttributeUpdate update;
  update.rk = ReencryptionKey{i, t.version, t.version + 1, fresh * t.value.inverse()};
  t = kpabe::VersionedExponent{fresh, t.version + 1};
  T = VersionedElement{pairing::G1::mul_generator(fresh), T.version + 1};
  update.t = t;
  update.T = T;
  return update;
}

namespace {

template <typename Step>
VersionedElement fold(AttributeId i, const VersionedElement& c, const ReencryptionKeyHistory& rkh,
                      Step step) {
  if (rkh.attribute() != i) throw PreError("history belongs to a different attribute");
  if (c.version > rkh.current_version())
    throw MissingHistoryError("component at version " + std::to_string(c.version) +
                              " is ahead of history at " + std::to_string(rkh.current_version()));
  VersionedElement out = c;
  for (const ReencryptionKey& rk : rkh.entries().subspan(c.version)) {
    if (rk.from_version != out.version) throw MissingHistoryError("gap in re-encryption history");
    out.value = step(out.value, rk.factor);
    out.version = rk.to_version;
  }
  return out;
}

}  // namespace

VersionedElement update_ciphertext_component(AttributeId i, const VersionedElement& e,
                                             const ReencryptionKeyHistory& rkh) {
  return fold(i, e, rkh, [](const pairing::G1& v, const pairing::Zr& rk) { return v * rk; });
}

VersionedElement update_key_component(AttributeId i, const VersionedElement& dk,
                                      const ReencryptionKeyHistory& rkh) {
  return fold(i, dk, rkh,
              [](const pairing::G1& v, const pairing::Zr& rk) { return v * rk.inverse(); });
}

std::size_t update_ciphertext(kpabe::Ciphertext& ct, const HistoryMap& histories) {
  std::size_t changed = 0;
  for (auto& [id, e] : ct.components) {
    auto it = histories.find(id);
    if (it == histories.end() || e.version == it->second.current_version()) continue;
    e = update_ciphertext_component(id, e, it->second);
    ++changed;
  }
  return changed;
}

std::size_t update_key(std::map<AttributeId, VersionedElement>& components,
                       const HistoryMap& histories) {
  std::size_t changed = 0;
  for (auto& [id, dk] : components) {
    auto it = histories.find(id);
    if (it == histories.end() || dk.version == it->second.current_version()) continue;
    dk = update_key_component(id, dk, it->second);
    ++changed;
  }
  return changed;
}

void write_history(ByteWriter& w, const ReencryptionKeyHistory& rkh,
                   const kpabe::Universe& universe) {
  w.str(universe.name(rkh.attribute()));
  w.u32(rkh.current_version());
  for (const auto& rk : rkh.entries()) {
    w.u32(rk.from_version);
    w.u32(rk.to_version);
    w.raw(rk.factor.to_bytes());
  }
}

ReencryptionKeyHistory read_history(ByteReader& r, const kpabe::Universe& universe) {
  ReencryptionKeyHistory rkh(universe.at(r.str()));
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    ReencryptionKey rk;
    rk.attribute = rkh.attribute();
    rk.from_version = r.u32();
    rk.to_version = r.u32();
    rk.factor = pairing::Zr::from_bytes(r.raw(pairing::kZrBytes));
    try {
      rkh.append(std::move(rk));
    } catch (const PreError& e) {
      throw FormatError(e.what());
    }
  }
  return rkh;
}

Bytes serialize(const ReencryptionKeyHistory& rkh, const kpabe::Universe& universe) {
  ByteWriter w;
  w.header(RecordKind::reencryption_history);
  write_history(w, rkh, universe);
  return std::move(w).take();
}

ReencryptionKeyHistory deserialize_history(std::span<const std::uint8_t> bytes,
                                           const kpabe::Universe& universe) {
  ByteReader r(bytes);
  r.expect_header(RecordKind::reencryption_history);
  ReencryptionKeyHistory rkh = read_history(r, universe);
  r.expect_done();
  return rkh;
}

}  // namespace abe_cities::pre
