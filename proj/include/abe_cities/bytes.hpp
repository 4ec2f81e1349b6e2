#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace abe_cities {

using Bytes = std::vector<std::uint8_t>;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Object kinds tagged in the header of every persisted record.
enum class RecordKind : std::uint8_t {
  master_key = 1,
  public_params = 2,
  ciphertext = 3,
  decryption_key = 4,
  reencryption_history = 5,
  css_store = 6,
  key_components = 7,
};

inline constexpr std::uint32_t kRecordMagic = 0x41424543;  // "ABEC"
inline constexpr std::uint16_t kFormatVersion = 1;

// Little-endian writer for the fixed binary layout:
//   header  = magic:u32 | format_version:u16 | kind:u8
//   strings = len:u32 | bytes
//   blobs   = len:u32 | bytes
class ByteWriter {
 public:
  void header(RecordKind kind) {
    u32(kRecordMagic);
    u16(kFormatVersion);
    u8(static_cast<std::uint8_t>(kind));
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void raw(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void blob(std::span<const std::uint8_t> data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

  const Bytes& bytes() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_header(RecordKind kind) {
    if (u32() != kRecordMagic) throw FormatError("bad record magic");
    if (auto v = u16(); v != kFormatVersion)
      throw FormatError("unsupported format version " + std::to_string(v));
    if (u8() != static_cast<std::uint8_t>(kind)) throw FormatError("unexpected record kind");
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  Bytes blob() {
    auto s = raw(u32());
    return Bytes(s.begin(), s.end());
  }
  std::string str() {
    auto s = raw(u32());
    return std::string(s.begin(), s.end());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const {
    if (!done()) throw FormatError("trailing bytes after record");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated record");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

}  // namespace abe_cities
