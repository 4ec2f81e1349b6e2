#include "abe_cities/protocol.hpp"

#include <sodium.h>

#include <istream>
#include <ostream>

#include "json.hpp"

namespace abe_cities::protocol {

using kpabe::AttributeId;
using kpabe::Partition;
using kpabe::VersionedElement;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Signed messages and transport

namespace {

Bytes signed_region(const std::string& kind, std::uint32_t date, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.str("abe-cities/msg/" + kind);
  w.u32(date);
  w.blob(payload);
  return std::move(w).take();
}

}  // namespace

SignedMessage SignedMessage::make(std::string kind, std::uint32_t date, Bytes payload,
                                  const symcrypto::SigningKeyPair& signer) {
  SignedMessage m{std::move(kind), date, std::move(payload), {}};
  m.signature = symcrypto::sign(signer, signed_region(m.kind, m.date, m.payload));
  return m;
}

Bytes SignedMessage::encode() const {
  ByteWriter w;
  w.str(kind);
  w.u32(date);
  w.blob(payload);
  w.raw(signature);
  return std::move(w).take();
}

SignedMessage SignedMessage::decode(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    SignedMessage m;
    m.kind = r.str();
    m.date = r.u32();
    m.payload = r.blob();
    const auto sig = r.raw(m.signature.size());
    std::copy(sig.begin(), sig.end(), m.signature.begin());
    r.expect_done();
    return m;
  } catch (const FormatError& e) {
    throw SignatureError(std::string("malformed signed message: ") + e.what());
  }
}

const Bytes& SignedMessage::open(const std::string& expected_kind, std::span<const std::uint8_t, 32> signer,
                                 std::uint32_t today) const {
  if (!symcrypto::verify(signer, signed_region(kind, date, payload), signature))
    throw SignatureError("signature verification failed on '" + kind + "' message");
  if (kind != expected_kind) throw ProtocolError("expected '" + expected_kind + "' message, got '" + kind + "'");
  if (date != today)
    throw StaleMessageError("'" + kind + "' message dated day " + std::to_string(date) + ", today is day " +
                            std::to_string(today));
  return payload;
}

Bytes Fabric::transmit(Envelope e) {
  if (interceptor_) interceptor_(e);
  transcript_.push_back(e);
  return std::move(e.body);
}

Bytes data_ad(std::uint32_t device, std::uint32_t day, std::uint32_t generation, std::uint32_t counter) {
  ByteWriter w;
  w.str("esd");
  w.u32(device);
  w.u32(day);
  w.u32(generation);
  w.u32(counter);
  return std::move(w).take();
}

Bytes boot_ad(std::uint32_t device, std::uint32_t day, std::uint32_t generation) {
  ByteWriter w;
  w.str("boot");
  w.u32(device);
  w.u32(day);
  w.u32(generation);
  return std::move(w).take();
}

// ---------------------------------------------------------------------------
// Trusted third party

Ttp::Ttp(AttributeSpace space, std::vector<DeviceInfo> devices, Rng rng)
    : space_(std::move(space)), devices_(std::move(devices)), rng_(std::move(rng)) {
  std::tie(mk_, pk_) = kpabe::setup(space_.universe(), rng_);
  signer_ = symcrypto::SigningKeyPair::generate(rng_);
  versions_ = pre::AttributeVersionTable(space_.universe());
  for (const auto& d : devices_) k_lt_.emplace(d.id, symcrypto::random_key(rng_));
}

void Ttp::register_user(std::uint32_t user, std::span<const std::uint8_t, 32> box_public_key) {
  auto& rec = users_[user];
  std::copy(box_public_key.begin(), box_public_key.end(), rec.box_public_key.begin());
}

const std::optional<kpabe::AccessPolicy>& Ttp::issued_policy(std::uint32_t user) const {
  return users_.at(user).policy;
}

Ttp::KeyIssue Ttp::issue_key(std::uint32_t user, const PolicySpec& spec) {
  auto it = users_.find(user);
  if (it == users_.end()) throw ProtocolError("user " + std::to_string(user) + " is not registered");
  if (it->second.policy) throw ProtocolError("user " + std::to_string(user) + " already holds a key");

  auto policy = space_.policy_for_user(spec);
  auto dk = kpabe::keygen(mk_, policy, rng_);
  it->second.policy = policy;

  ByteWriter full;
  full.u32(user);
  full.blob(kpabe::serialize(dk, universe()));
  const auto to_user = SignedMessage::make("dk", day_, std::move(full).take(), signer_).encode();

  ByteWriter road;
  road.u32(user);
  std::uint32_t n = 0;
  for (const auto& [i, c] : dk.components) n += universe().partition(i) == Partition::road;
  road.u32(n);
  for (const auto& [i, c] : dk.components)
    if (universe().partition(i) == Partition::road) kpabe::write_component(road, universe(), i, c);

  return {symcrypto::seal_to(it->second.box_public_key, to_user, rng_),
          SignedMessage::make("dk-road", day_, std::move(road).take(), signer_).encode()};
}

std::vector<Bytes> Ttp::seal() {
  std::vector<Bytes> out;
  out.reserve(devices_.size());
  for (const auto& d : devices_) {
    const auto material = kpabe::random_payload(rng_);
    const Key dek0 = symcrypto::derive_key(material);
    const auto label = space_.label_for_device(d.at, day_);
    const auto ask = kpabe::encrypt(material, label.all(), pk_, rng_);

    // Generation numbers are assigned by the store; the TTP counts its own
    // seals per day to bind the boot material to the same number.
    const std::uint32_t generation = seals_today_[d.id]++;
    ByteWriter boot_plain;
    boot_plain.raw(dek0);
    boot_plain.u32(day_);
    boot_plain.u32(generation);
    ByteWriter boot;
    boot.u32(day_);
    boot.u32(generation);
    boot.raw(symcrypto::aead_encrypt(k_lt_.at(d.id), std::move(boot_plain).take(), boot_ad(d.id, day_, generation),
                                     rng_));

    ByteWriter w;
    w.u32(d.id);
    w.u32(day_);
    w.u32(generation);
    w.blob(kpabe::serialize(ask, universe()));
    w.blob(std::move(boot).take());
    out.push_back(SignedMessage::make("seal", day_, std::move(w).take(), signer_).encode());
  }
  return out;
}

Bytes Ttp::revoke(std::uint32_t user) {
  auto it = users_.find(user);
  if (it == users_.end() || !it->second.policy) throw ProtocolError("user " + std::to_string(user) + " holds no key");
  const auto mu = space_.revocation_attribute_set(*it->second.policy);
  ByteWriter w;
  w.u32(user);
  w.u32(static_cast<std::uint32_t>(mu.size()));
  for (AttributeId i : mu) {
    const auto update = pre::update_attribute(i, universe(), mk_, pk_, rng_);
    versions_.bump(i);
    w.str(universe().name(i));
    w.u32(update.rk.from_version);
    w.u32(update.rk.to_version);
    w.raw(update.rk.factor.to_bytes());
  }
  space_.release_policy(*it->second.policy);
  it->second.policy.reset();
  return SignedMessage::make("revoke", day_, std::move(w).take(), signer_).encode();
}

// ---------------------------------------------------------------------------
// Cloud storage service

Css::Css(const kpabe::Universe* universe, std::span<const std::uint8_t, 32> ttp_key)
    : universe_(universe), store_(universe) {
  std::copy(ttp_key.begin(), ttp_key.end(), ttp_key_.begin());
  for (AttributeId i : universe->ids(Partition::road)) store_.create_history(i);
}

void Css::accept_user_components(std::span<const std::uint8_t> message) {
  const auto msg = SignedMessage::decode(message);
  ByteReader r(msg.open("dk-road", ttp_key_, day_));
  const std::uint32_t user = r.u32();
  std::map<AttributeId, VersionedElement> comps;
  for (std::uint32_t n = r.u32(); n > 0; --n) comps.insert(kpabe::read_component(r, *universe_));
  r.expect_done();
  store_.put_user_components(user, std::move(comps));
}

std::uint32_t Css::accept_sealed(std::span<const std::uint8_t> message) {
  const auto msg = SignedMessage::decode(message);
  ByteReader r(msg.open("seal", ttp_key_, day_));
  const std::uint32_t device = r.u32();
  const std::uint32_t day = r.u32();
  const std::uint32_t generation = r.u32();
  SealedGeneration g;
  g.ask = kpabe::deserialize_ciphertext(r.blob(), *universe_);
  g.boot_material = r.blob();
  r.expect_done();
  const std::uint32_t stored = store_.add_sealed(device, day, std::move(g));
  if (stored != generation) throw ProtocolError("sealed generation out of order");
  return stored;
}

void Css::accept_revocation(std::span<const std::uint8_t> message) {
  const auto msg = SignedMessage::decode(message);
  ByteReader r(msg.open("revoke", ttp_key_, day_));
  const std::uint32_t user = r.u32();
  std::vector<pre::ReencryptionKey> keys;
  for (std::uint32_t n = r.u32(); n > 0; --n) {
    pre::ReencryptionKey rk;
    rk.attribute = universe_->at(r.str());
    rk.from_version = r.u32();
    rk.to_version = r.u32();
    rk.factor = pairing::Zr::from_bytes(r.raw(pairing::kZrBytes));
    keys.push_back(rk);
  }
  r.expect_done();
  for (const auto& rk : keys) store_.append_reencryption_key(rk);
  store_.erase_user(user);
}

Bytes Css::boot_material_for(std::uint32_t device, std::uint32_t day) const {
  auto it = store_.all_sealed().find({device, day});
  if (it == store_.all_sealed().end() || it->second.empty())
    throw ProtocolError("no boot material for device " + std::to_string(device));
  return it->second.back().boot_material;
}

std::uint32_t Css::store_data(std::uint32_t device, std::span<const std::uint8_t> upload) {
  ByteReader r(upload);
  const std::uint32_t day = r.u32();
  DataItem item;
  item.generation = r.u32();
  item.counter = r.u32();
  item.esd = r.blob();
  r.expect_done();
  return store_.append_data(device, day, std::move(item));
}

Bytes Css::serve(std::span<const std::uint8_t> request) {
  ByteReader r(request);
  const std::uint32_t user = r.u32(), device = r.u32(), day = r.u32(), index = r.u32();
  r.expect_done();
  const DataItem* item = store_.data(device, day, index);
  if (!item) throw ProtocolError("no data item " + std::to_string(index) + " for device " + std::to_string(device));
  auto* gens = store_.sealed(device, day);
  if (!gens || item->generation >= gens->size()) throw ProtocolError("no sealed key for the requested item");

  ByteWriter w;
  if (const auto* comps = store_.user_components(user)) {
    w.u32(static_cast<std::uint32_t>(comps->size()));
    for (const auto& [i, c] : std::map<AttributeId, VersionedElement>(*comps)) {
      VersionedElement fresh = c;
      const auto& h = store_.histories().at(i);
      if (c.version != h.current_version()) {
        fresh = pre::update_key_component(i, c, h);
        store_.update_user_component(user, i, fresh);
        ++lazy_key_updates_;
      }
      kpabe::write_component(w, *universe_, i, fresh);
    }
  } else {
    w.u32(0);
  }
  auto& ask = (*gens)[item->generation].ask;
  lazy_ct_updates_ += pre::update_ciphertext(ask, store_.histories());
  w.blob(kpabe::serialize(ask, *universe_));
  w.u32(device);
  w.u32(day);
  w.u32(item->generation);
  w.u32(item->counter);
  w.blob(item->esd);
  return std::move(w).take();
}

// ---------------------------------------------------------------------------
// Sensing device

Device::Device(DeviceInfo info, Key long_term_key, Rng rng)
    : info_(info), k_lt_(long_term_key), rng_(std::move(rng)) {}

void Device::accept_boot(std::span<const std::uint8_t> material) {
  std::uint32_t day = 0, generation = 0;
  Bytes sealed;
  try {
    ByteReader r(material);
    day = r.u32();
    generation = r.u32();
    const auto rest = r.raw(r.remaining());
    sealed.assign(rest.begin(), rest.end());
  } catch (const FormatError&) {
    throw BootRejected("malformed boot material");
  }
  const auto plain = symcrypto::aead_decrypt(k_lt_, sealed, boot_ad(info_.id, day, generation));
  if (!plain) throw BootRejected("boot material MAC verification failed");
  ByteReader r(*plain);
  Key dek;
  const auto raw = r.raw(dek.size());
  std::copy(raw.begin(), raw.end(), dek.begin());
  const std::uint32_t inner_day = r.u32();
  const std::uint32_t inner_generation = r.u32();
  if (inner_day != day || inner_generation != generation) throw BootRejected("boot material header mismatch");
  if (inner_day != day_)
    throw BootRejected("boot material dated day " + std::to_string(inner_day) + ", today is day " +
                       std::to_string(day_));
  dek_ = dek;
  generation_ = generation;
  counter_ = 0;
}

Bytes Device::produce(std::span<const std::uint8_t> plaintext) {
  if (!dek_) throw ProtocolError("device " + std::to_string(info_.id) + " has no data key for today");
  const Bytes esd = symcrypto::aead_encrypt(*dek_, plaintext, data_ad(info_.id, day_, generation_, counter_), rng_);
  ByteWriter w;
  w.u32(day_);
  w.u32(generation_);
  w.u32(counter_);
  w.blob(esd);
  // The old key is overwritten; only the chain's future remains.
  const Key next = symcrypto::chain_step(*dek_);
  sodium_memzero(dek_->data(), dek_->size());
  dek_ = next;
  ++counter_;
  return std::move(w).take();
}

Device::State Device::leak_state() const {
  if (!dek_) throw ProtocolError("device holds no data key");
  return {day_, generation_, counter_, *dek_};
}

// ---------------------------------------------------------------------------
// User

const char* to_string(ConsumeStatus s) {
  switch (s) {
    case ConsumeStatus::ok: return "ok";
    case ConsumeStatus::denied: return "denied";
    case ConsumeStatus::version_mismatch: return "version_mismatch";
    case ConsumeStatus::integrity_failure: return "integrity_failure";
    case ConsumeStatus::no_key: return "no_key";
  }
  return "?";
}

User::User(std::uint32_t id, const kpabe::Universe* universe, Rng& rng)
    : id_(id), universe_(universe), box_(symcrypto::BoxKeyPair::generate(rng)) {}

void User::accept_key(std::span<const std::uint8_t> sealed, std::span<const std::uint8_t, 32> ttp_key) {
  const auto opened = symcrypto::open_sealed(box_, sealed);
  if (!opened) throw SignatureError("key message failed authentication");
  const auto msg = SignedMessage::decode(*opened);
  ByteReader r(msg.open("dk", ttp_key, day_));
  if (r.u32() != id_) throw ProtocolError("key message addressed to another user");
  auto dk = kpabe::deserialize_decryption_key(r.blob(), *universe_);
  r.expect_done();
  key_ = std::move(dk);
}

Bytes User::request(std::uint32_t device, std::uint32_t day, std::uint32_t item) const {
  ByteWriter w;
  w.u32(id_);
  w.u32(device);
  w.u32(day);
  w.u32(item);
  return std::move(w).take();
}

ConsumeResult User::consume(std::span<const std::uint8_t> response) {
  ByteReader r(response);
  std::vector<std::pair<AttributeId, VersionedElement>> refreshed;
  for (std::uint32_t n = r.u32(); n > 0; --n) refreshed.push_back(kpabe::read_component(r, *universe_));
  const auto ask = kpabe::deserialize_ciphertext(r.blob(), *universe_);
  const std::uint32_t device = r.u32(), day = r.u32(), generation = r.u32(), counter = r.u32();
  const Bytes esd = r.blob();
  r.expect_done();

  if (!key_) return {ConsumeStatus::no_key, {}};
  for (const auto& [i, c] : refreshed) {
    auto it = key_->components.find(i);
    if (it != key_->components.end()) it->second = c;
  }
  std::optional<pairing::GT> material;
  try {
    material = kpabe::decrypt(ask, *key_);
  } catch (const kpabe::VersionMismatchError&) {
    return {ConsumeStatus::version_mismatch, {}};
  }
  if (!material) return {ConsumeStatus::denied, {}};
  const Key dek = symcrypto::chain_advance(symcrypto::derive_key(*material), counter);
  auto plain = symcrypto::aead_decrypt(dek, esd, data_ad(device, day, generation, counter));
  if (!plain) return {ConsumeStatus::integrity_failure, {}};
  return {ConsumeStatus::ok, std::move(*plain)};
}

// ---------------------------------------------------------------------------
// System

namespace {

std::vector<DeviceInfo> device_infos(const citysim::CityModel& city) {
  std::vector<DeviceInfo> out;
  for (const auto& d : city.devices()) out.push_back({d.id, d.at});
  return out;
}

std::string device_name(std::uint32_t id) { return "device:" + std::to_string(id); }
std::string user_name(std::uint32_t id) { return "user:" + std::to_string(id); }

json spec_to_json(const PolicySpec& spec) {
  json iv = json::array();
  for (const auto& si : spec.intervals) iv.push_back({si.street, si.segments.lo, si.segments.hi});
  return {{"intervals", iv}, {"validity", {spec.validity.lo, spec.validity.hi}}};
}

PolicySpec spec_from_json(const json& j) {
  PolicySpec spec;
  for (const auto& iv : j.at("intervals"))
    spec.intervals.push_back({iv.at(0).get<std::uint32_t>(), {iv.at(1).get<std::uint32_t>(), iv.at(2).get<std::uint32_t>()}});
  spec.validity = {j.at("validity").at(0).get<std::uint32_t>(), j.at("validity").at(1).get<std::uint32_t>()};
  return spec;
}

}  // namespace

System::System(SystemConfig config) : config_(std::move(config)), rng_(Rng::seeded(config_.seed)) {
  auto space = AttributeSpace::build(config_.city, config_.representation, config_.time);
  ttp_ = std::make_unique<Ttp>(std::move(space), device_infos(config_.city), rng_.fork());
  css_ = std::make_unique<Css>(&ttp_->universe(), ttp_->signing_key());
  for (const auto& info : device_infos(config_.city))
    devices_.emplace(info.id, std::make_unique<Device>(info, ttp_->long_term_key(info.id), rng_.fork()));
  record(json{{"op", "setup"}, {"seed", config_.seed}, {"rep", config_.representation.name()},
              {"epsilon", config_.representation.epsilon}, {"lifetime", config_.time.max_lifetime_days}}
             .dump());
}

std::vector<std::uint32_t> System::device_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& [id, d] : devices_) out.push_back(id);
  return out;
}

void System::advance_day() {
  ++day_;
  ttp_->set_day(day_);
  css_->set_day(day_);
  for (auto& [id, d] : devices_) d->set_day(day_);
  for (auto& [id, u] : users_) u->set_day(day_);
  record(json{{"op", "advance_day"}, {"day", day_}}.dump());
}

std::uint32_t System::add_user() {
  const std::uint32_t id = next_user_++;
  Rng user_rng = rng_.fork();
  auto user = std::make_unique<User>(id, &ttp_->universe(), user_rng);
  user->set_day(day_);
  ttp_->register_user(id, user->box_public_key());
  users_.emplace(id, std::move(user));
  record(json{{"op", "add_user"}, {"user", id}}.dump());
  return id;
}

void System::distribute_key(std::uint32_t user, const PolicySpec& spec) {
  record(json{{"op", "distribute"}, {"user", user}, {"spec", spec_to_json(spec)}}.dump());
  auto issue = ttp_->issue_key(user, spec);
  const Bytes to_user = fabric_.transmit({"ttp", user_name(user), "dk", std::move(issue.to_user)});
  users_.at(user)->accept_key(to_user, ttp_->signing_key());
  const Bytes to_css = fabric_.transmit({"ttp", "css", "dk-road", std::move(issue.to_css)});
  css_->accept_user_components(to_css);
}

void System::seal_day() {
  record(json{{"op", "seal"}, {"day", day_}}.dump());
  for (Bytes& msg : ttp_->seal()) {
    const Bytes body = fabric_.transmit({"ttp", "css", "seal", std::move(msg)});
    css_->accept_sealed(body);
  }
  for (auto& [id, device] : devices_) {
    const Bytes boot = fabric_.transmit({"css", device_name(id), "boot", css_->boot_material_for(id, day_)});
    device->accept_boot(boot);
  }
}

ProduceReceipt System::produce_data(std::uint32_t device, std::span<const std::uint8_t> plaintext) {
  auto& d = *devices_.at(device);
  const std::uint32_t counter = d.booted() ? d.leak_state().counter : 0;
  const Bytes upload = fabric_.transmit({device_name(device), "css", "data", d.produce(plaintext)});
  const std::uint32_t index = css_->store_data(device, upload);
  record(json{{"op", "produce"}, {"device", device}, {"data", to_hex(plaintext)}, {"index", index}, {"counter", counter}}
             .dump());
  return {day_, index, counter};
}

ConsumeResult System::consume_data(std::uint32_t user, std::uint32_t device, std::uint32_t day, std::uint32_t item) {
  auto& u = *users_.at(user);
  const Bytes req = fabric_.transmit({user_name(user), "css", "request", u.request(device, day, item)});
  const Bytes resp = fabric_.transmit({"css", user_name(user), "response", css_->serve(req)});
  auto result = u.consume(resp);
  record(json{{"op", "consume"},
              {"user", user},
              {"device", device},
              {"day", day},
              {"item", item},
              {"status", to_string(result.status)},
              {"data", to_hex(result.plaintext)}}
             .dump());
  return result;
}

void System::revoke_key(std::uint32_t user) {
  record(json{{"op", "revoke"}, {"user", user}}.dump());
  const Bytes msg = fabric_.transmit({"ttp", "css", "revoke", ttp_->revoke(user)});
  css_->accept_revocation(msg);
  // A fresh seal under the new attribute versions.
  seal_day();
}

void System::write_trace(std::ostream& out) const {
  for (const auto& line : trace_) out << line << '\n';
}

System::ReplayReport System::replay(const SystemConfig& config, std::istream& in) {
  ReplayReport report;
  std::optional<System> sys;
  std::string line;
  auto mismatch = [&](const std::string& what) {
    ++report.mismatches;
    report.details.push_back("event " + std::to_string(report.events) + ": " + what);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json ev = json::parse(line);
    const std::string op = ev.at("op");
    ++report.events;
    if (op == "setup") {
      SystemConfig c = config;
      c.seed = ev.at("seed").get<std::uint64_t>();
      if (ev.at("rep") != c.representation.name() || ev.at("epsilon") != c.representation.epsilon ||
          ev.at("lifetime") != c.time.max_lifetime_days)
        mismatch("setup parameters differ from the replay configuration");
      sys.emplace(std::move(c));
      continue;
    }
    if (!sys) throw ProtocolError("trace does not start with setup");
    if (op == "advance_day") {
      sys->advance_day();
      if (ev.at("day") != sys->day()) mismatch("day counter diverged");
    } else if (op == "add_user") {
      if (sys->add_user() != ev.at("user").get<std::uint32_t>()) mismatch("user id diverged");
    } else if (op == "distribute") {
      sys->distribute_key(ev.at("user"), spec_from_json(ev.at("spec")));
    } else if (op == "seal") {
      sys->seal_day();
    } else if (op == "produce") {
      const auto r = sys->produce_data(ev.at("device"), from_hex(ev.at("data").get<std::string>()));
      if (r.index != ev.at("index") || r.counter != ev.at("counter")) mismatch("produce receipt diverged");
    } else if (op == "consume") {
      const auto r = sys->consume_data(ev.at("user"), ev.at("device"), ev.at("day"), ev.at("item"));
      if (ev.at("status") != to_string(r.status) || ev.at("data") != to_hex(r.plaintext))
        mismatch(std::string("consume outcome diverged: recorded ") + ev.at("status").get<std::string>() +
                 ", replayed " + to_string(r.status));
    } else if (op == "revoke") {
      sys->revoke_key(ev.at("user"));
    } else {
      throw ProtocolError("unknown trace operation '" + op + "'");
    }
  }
  return report;
}

}  // namespace abe_cities::protocol
