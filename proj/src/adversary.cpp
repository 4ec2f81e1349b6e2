#include "abe_cities/adversary.hpp"

#include <map>
#include <tuple>

namespace abe_cities::adversary {

using kpabe::AttributeId;
using kpabe::PolicyNode;
using kpabe::VersionedElement;

namespace {

using SealKey = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;  // device, day, generation

struct Observations {
  std::vector<std::pair<SealKey, kpabe::Ciphertext>> asks;
  // Component sets as they travelled together (one user's key or response).
  std::vector<std::map<AttributeId, VersionedElement>> component_sets;
  pre::HistoryMap histories;
  std::map<SealKey, std::vector<ObservedItem>> items;
};

std::uint32_t sender_device(const std::string& from) {
  return static_cast<std::uint32_t>(std::stoul(from.substr(from.find(':') + 1)));
}

void observe(const protocol::Envelope& e, const kpabe::Universe& u, Observations& obs) {
  if (e.kind == "dk-road") {
    const auto msg = protocol::SignedMessage::decode(e.body);
    ByteReader r(msg.payload);
    r.u32();
    std::map<AttributeId, VersionedElement> comps;
    for (std::uint32_t n = r.u32(); n > 0; --n) comps.insert(kpabe::read_component(r, u));
    obs.component_sets.push_back(std::move(comps));
  } else if (e.kind == "seal") {
    const auto msg = protocol::SignedMessage::decode(e.body);
    ByteReader r(msg.payload);
    const std::uint32_t device = r.u32(), day = r.u32(), gen = r.u32();
    obs.asks.emplace_back(SealKey{device, day, gen}, kpabe::deserialize_ciphertext(r.blob(), u));
  } else if (e.kind == "revoke") {
    const auto msg = protocol::SignedMessage::decode(e.body);
    ByteReader r(msg.payload);
    r.u32();
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      pre::ReencryptionKey rk;
      rk.attribute = u.at(r.str());
      rk.from_version = r.u32();
      rk.to_version = r.u32();
      rk.factor = pairing::Zr::from_bytes(r.raw(pairing::kZrBytes));
      auto [it, fresh] = obs.histories.try_emplace(rk.attribute, rk.attribute);
      it->second.append(rk);
    }
  } else if (e.kind == "data") {
    ByteReader r(e.body);
    ObservedItem item;
    item.device = sender_device(e.from);
    item.day = r.u32();
    item.generation = r.u32();
    item.counter = r.u32();
    item.esd = r.blob();
    obs.items[{item.device, item.day, item.generation}].push_back(std::move(item));
  } else if (e.kind == "response") {
    ByteReader r(e.body);
    std::map<AttributeId, VersionedElement> comps;
    for (std::uint32_t n = r.u32(); n > 0; --n) comps.insert(kpabe::read_component(r, u));
    if (!comps.empty()) obs.component_sets.push_back(std::move(comps));
    auto ask = kpabe::deserialize_ciphertext(r.blob(), u);
    const std::uint32_t device = r.u32(), day = r.u32(), gen = r.u32();
    obs.asks.emplace_back(SealKey{device, day, gen}, std::move(ask));
  }
  // "dk" is sealed to the user, "boot" is under the device key, "request"
  // carries no secrets.
}

kpabe::DecryptionKey forged(PolicyNode root, std::map<AttributeId, VersionedElement> comps) {
  kpabe::DecryptionKey dk;
  dk.policy = kpabe::AccessPolicy(std::move(root));
  dk.components = std::move(comps);
  return dk;
}

void try_key(const kpabe::DecryptionKey& dk, const kpabe::Ciphertext& ask, std::vector<pairing::GT>& out) {
  try {
    if (auto m = kpabe::decrypt(ask, dk)) out.push_back(*m);
  } catch (const kpabe::KpAbeError&) {
  }
}

}  // namespace

EavesdropReport eavesdrop(const std::vector<protocol::Envelope>& transcript, const kpabe::Universe& universe,
                          std::uint32_t max_counter) {
  Observations obs;
  for (const auto& e : transcript) observe(e, universe, obs);

  // Every component also in its re-encrypted form.
  std::vector<std::map<AttributeId, VersionedElement>> sets = obs.component_sets;
  for (const auto& s : obs.component_sets) {
    auto moved = s;
    if (pre::update_key(moved, obs.histories) > 0) sets.push_back(std::move(moved));
  }

  EavesdropReport report;
  report.sealed_keys = obs.asks.size();
  for (const auto& s : sets) report.key_components += s.size();
  for (const auto& [k, v] : obs.items) report.encrypted_items += v.size();

  for (const auto& [where, ask] : obs.asks) {
    std::vector<pairing::GT> guesses{pairing::GT::one(), ask.blinded};
    for (const auto& comps : sets) {
      std::vector<PolicyNode> leaves;
      std::map<AttributeId, VersionedElement> usable;
      for (const auto& [i, c] : comps) {
        if (!ask.attributes.contains(i)) continue;
        try_key(forged(PolicyNode::leaf(i), {{i, c}}), ask, guesses);
        leaves.push_back(PolicyNode::leaf(i));
        usable.emplace(i, c);
      }
      if (leaves.size() > 1) {
        try_key(forged(PolicyNode::all_of(leaves), usable), ask, guesses);
        try_key(forged(PolicyNode::any_of(leaves), usable), ask, guesses);
      }
    }
    auto it = obs.items.find(where);
    if (it == obs.items.end()) continue;
    for (const auto& material : guesses) {
      const symcrypto::Key root = symcrypto::derive_key(material);
      ++report.candidate_keys;
      for (const auto& item : it->second) {
        const auto ad = protocol::data_ad(item.device, item.day, item.generation, item.counter);
        symcrypto::Key step = root;
        for (std::uint32_t c = 0; c <= max_counter; ++c, step = symcrypto::chain_step(step))
          if (symcrypto::aead_decrypt(step, item.esd, ad)) ++report.opened;
      }
    }
  }
  return report;
}

std::set<std::uint32_t> items_opened_by_capture(const protocol::Device::State& leaked, std::uint32_t device,
                                                const std::vector<ObservedItem>& items, std::uint32_t max_steps) {
  std::set<std::uint32_t> opened;
  for (const auto& item : items) {
    const auto ad = protocol::data_ad(device, item.day, item.generation, item.counter);
    symcrypto::Key k = leaked.dek;
    for (std::uint32_t s = 0; s <= max_steps; ++s, k = symcrypto::chain_step(k)) {
      if (symcrypto::aead_decrypt(k, item.esd, ad)) {
        opened.insert(item.counter);
        break;
      }
    }
  }
  return opened;
}

}  // namespace abe_cities::adversary
