#include "abe_cities/css_store.hpp"

#include <fstream>
#include <iterator>

namespace abe_cities::protocol {

using kpabe::Partition;

void CssStore::require_road(AttributeId i, const char* what) const {
  ++checked_writes_;
  if (!universe_->contains(i)) throw CssInvariantError(std::string(what) + ": unknown attribute");
  if (universe_->partition(i) == Partition::time)
    throw CssInvariantError(std::string(what) + ": time attribute '" + universe_->name(i) + "' must not reach the CSS");
}

void CssStore::create_history(AttributeId i) {
  require_road(i, "history");
  histories_.try_emplace(i, pre::ReencryptionKeyHistory(i));
}

void CssStore::append_reencryption_key(const pre::ReencryptionKey& rk) {
  require_road(rk.attribute, "re-encryption key");
  auto it = histories_.find(rk.attribute);
  if (it == histories_.end()) throw pre::PreError("no history for attribute " + universe_->name(rk.attribute));
  it->second.append(rk);
}

void CssStore::put_user_components(std::uint32_t user, std::map<AttributeId, VersionedElement> components) {
  for (const auto& [i, c] : components) require_road(i, "user key component");
  users_[user] = std::move(components);
}

void CssStore::update_user_component(std::uint32_t user, AttributeId i, const VersionedElement& c) {
  require_road(i, "user key component");
  users_.at(user).at(i) = c;
}

void CssStore::erase_user(std::uint32_t user) { users_.erase(user); }

const std::map<AttributeId, VersionedElement>* CssStore::user_components(std::uint32_t user) const {
  auto it = users_.find(user);
  return it == users_.end() ? nullptr : &it->second;
}

std::uint32_t CssStore::add_sealed(std::uint32_t device, std::uint32_t day, SealedGeneration g) {
  auto& list = sealed_[{device, day}];
  list.push_back(std::move(g));
  return static_cast<std::uint32_t>(list.size() - 1);
}

std::vector<SealedGeneration>* CssStore::sealed(std::uint32_t device, std::uint32_t day) {
  auto it = sealed_.find({device, day});
  return it == sealed_.end() ? nullptr : &it->second;
}

std::uint32_t CssStore::append_data(std::uint32_t device, std::uint32_t day, DataItem item) {
  auto& list = data_[{device, day}];
  list.push_back(std::move(item));
  return static_cast<std::uint32_t>(list.size() - 1);
}

const DataItem* CssStore::data(std::uint32_t device, std::uint32_t day, std::uint32_t index) const {
  auto it = data_.find({device, day});
  if (it == data_.end() || index >= it->second.size()) return nullptr;
  return &it->second[index];
}

DataItem* CssStore::mutable_data(std::uint32_t device, std::uint32_t day, std::uint32_t index) {
  return const_cast<DataItem*>(std::as_const(*this).data(device, day, index));
}

void CssStore::check_invariants() const {
  for (const auto& [i, h] : histories_) {
    if (universe_->partition(i) == Partition::time) throw CssInvariantError("history for a time attribute");
    if (h.attribute() != i) throw CssInvariantError("history filed under the wrong attribute");
  }
  for (const auto& [u, comps] : users_)
    for (const auto& [i, c] : comps)
      if (universe_->partition(i) == Partition::time)
        throw CssInvariantError("time key component stored for user " + std::to_string(u));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

enum class StoreFile : std::uint8_t { histories = 1, user_components = 2, sealed = 3, data = 4 };

const char* file_name(StoreFile f) {
  switch (f) {
    case StoreFile::histories: return "histories.bin";
    case StoreFile::user_components: return "user_components.bin";
    case StoreFile::sealed: return "sealed_keys.bin";
    case StoreFile::data: return "data.bin";
  }
  return "";
}

void write_file(const std::filesystem::path& dir, StoreFile f, ByteWriter&& w) {
  std::ofstream out(dir / file_name(f), std::ios::binary | std::ios::trunc);
  const Bytes bytes = std::move(w).take();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(std::string("cannot write ") + file_name(f));
}

Bytes read_file(const std::filesystem::path& dir, StoreFile f) {
  std::ifstream in(dir / file_name(f), std::ios::binary);
  if (!in) throw FormatError(std::string("missing store file ") + file_name(f));
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

ByteWriter start(StoreFile f) {
  ByteWriter w;
  w.header(RecordKind::css_store);
  w.u8(static_cast<std::uint8_t>(f));
  return w;
}

void expect_start(ByteReader& r, StoreFile f) {
  r.expect_header(RecordKind::css_store);
  if (r.u8() != static_cast<std::uint8_t>(f)) throw FormatError("store file holds a different object class");
}

}  // namespace

void CssStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto& u = *universe_;
  {
    auto w = start(StoreFile::histories);
    w.u32(static_cast<std::uint32_t>(histories_.size()));
    for (const auto& [i, h] : histories_) pre::write_history(w, h, u);
    write_file(dir, StoreFile::histories, std::move(w));
  }
  {
    auto w = start(StoreFile::user_components);
    w.u32(static_cast<std::uint32_t>(users_.size()));
    for (const auto& [user, comps] : users_) {
      w.u32(user);
      w.u32(static_cast<std::uint32_t>(comps.size()));
      for (const auto& [i, c] : comps) kpabe::write_component(w, u, i, c);
    }
    write_file(dir, StoreFile::user_components, std::move(w));
  }
  {
    auto w = start(StoreFile::sealed);
    w.u32(static_cast<std::uint32_t>(sealed_.size()));
    for (const auto& [key, gens] : sealed_) {
      w.u32(key.first);
      w.u32(key.second);
      w.u32(static_cast<std::uint32_t>(gens.size()));
      for (const auto& g : gens) {
        w.blob(kpabe::serialize(g.ask, u));
        w.blob(g.boot_material);
      }
    }
    write_file(dir, StoreFile::sealed, std::move(w));
  }
  {
    auto w = start(StoreFile::data);
    w.u32(static_cast<std::uint32_t>(data_.size()));
    for (const auto& [key, items] : data_) {
      w.u32(key.first);
      w.u32(key.second);
      w.u32(static_cast<std::uint32_t>(items.size()));
      for (const auto& item : items) {
        w.u32(item.generation);
        w.u32(item.counter);
        w.blob(item.esd);
      }
    }
    write_file(dir, StoreFile::data, std::move(w));
  }
}

CssStore CssStore::load(const std::filesystem::path& dir, const kpabe::Universe* universe) {
  CssStore s(universe);
  const auto& u = *universe;
  {
    const Bytes b = read_file(dir, StoreFile::histories);
    ByteReader r(b);
    expect_start(r, StoreFile::histories);
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      auto h = pre::read_history(r, u);
      s.require_road(h.attribute(), "history");
      s.histories_.emplace(h.attribute(), std::move(h));
    }
    r.expect_done();
  }
  {
    const Bytes b = read_file(dir, StoreFile::user_components);
    ByteReader r(b);
    expect_start(r, StoreFile::user_components);
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      const std::uint32_t user = r.u32();
      std::map<AttributeId, VersionedElement> comps;
      for (std::uint32_t k = r.u32(); k > 0; --k) comps.insert(kpabe::read_component(r, u));
      s.put_user_components(user, std::move(comps));
    }
    r.expect_done();
  }
  {
    const Bytes b = read_file(dir, StoreFile::sealed);
    ByteReader r(b);
    expect_start(r, StoreFile::sealed);
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      const std::uint32_t device = r.u32(), day = r.u32();
      for (std::uint32_t k = r.u32(); k > 0; --k) {
        SealedGeneration g;
        const Bytes ask = r.blob();
        g.ask = kpabe::deserialize_ciphertext(ask, u);
        g.boot_material = r.blob();
        s.add_sealed(device, day, std::move(g));
      }
    }
    r.expect_done();
  }
  {
    const Bytes b = read_file(dir, StoreFile::data);
    ByteReader r(b);
    expect_start(r, StoreFile::data);
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      const std::uint32_t device = r.u32(), day = r.u32();
      for (std::uint32_t k = r.u32(); k > 0; --k) {
        DataItem item;
        item.generation = r.u32();
        item.counter = r.u32();
        item.esd = r.blob();
        s.append_data(device, day, std::move(item));
      }
    }
    r.expect_done();
  }
  return s;
}

bool CssStore::operator==(const CssStore& other) const {
  // Compare through the canonical encoding.
  auto encode = [](const CssStore& s) {
    ByteWriter w;
    const auto& u = *s.universe_;
    for (const auto& [i, h] : s.histories_) pre::write_history(w, h, u);
    for (const auto& [user, comps] : s.users_) {
      w.u32(user);
      for (const auto& [i, c] : comps) kpabe::write_component(w, u, i, c);
    }
    for (const auto& [key, gens] : s.sealed_)
      for (const auto& g : gens) {
        w.u32(key.first);
        w.u32(key.second);
        w.blob(kpabe::serialize(g.ask, u));
        w.blob(g.boot_material);
      }
    for (const auto& [key, items] : s.data_)
      for (const auto& item : items) {
        w.u32(key.first);
        w.u32(key.second);
        w.u32(item.generation);
        w.u32(item.counter);
        w.blob(item.esd);
      }
    return std::move(w).take();
  };
  return encode(*this) == encode(other);
}

}  // namespace abe_cities::protocol
