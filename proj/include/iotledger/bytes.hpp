#pragma once

// Canonical byte-level serialization helpers. All multi-byte integers and
// doubles are big-endian on the wire; parsers are strict (over/underrun and
// trailing garbage are errors, surfaced as ParseError).

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace iotledger {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

using Digest = std::array<std::uint8_t, 32>;
using DeviceId = std::array<std::uint8_t, 16>;
using NodeId = std::array<std::uint8_t, 16>;

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  // IEEE-754 binary64, big-endian byte order.
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void raw(ByteView v) { buf_.insert(buf_.end(), v.begin(), v.end()); }

  template <std::size_t N>
  void arr(const std::array<std::uint8_t, N>& a) {
    buf_.insert(buf_.end(), a.begin(), a.end());
  }

  const Bytes& view() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView data) : p_(data.data()), end_(data.data() + data.size()) {}

  std::uint8_t u8() {
    need(1);
    return *p_++;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | *p_++;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | *p_++;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  Bytes raw(std::size_t n) {
    need(n);
    Bytes out(p_, p_ + n);
    p_ += n;
    return out;
  }

  ByteView view(std::size_t n) {
    need(n);
    ByteView out(p_, n);
    p_ += n;
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> arr() {
    need(N);
    std::array<std::uint8_t, N> out;
    std::memcpy(out.data(), p_, N);
    p_ += N;
    return out;
  }

  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

  void expect_done() const {
    if (p_ != end_) throw ParseError("trailing bytes after parse");
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ParseError("unexpected end of input");
  }

  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

inline std::string to_hex(ByteView v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 2);
  for (std::uint8_t b : v) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

inline Bytes from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw ParseError("odd-length hex string");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ParseError("invalid hex digit");
  };
  Bytes out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((nib(s[2 * i]) << 4) | nib(s[2 * i + 1]));
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> array_from_hex(const std::string& s) {
  Bytes raw = from_hex(s);
  if (raw.size() != N) throw ParseError("hex string has wrong length");
  std::array<std::uint8_t, N> out;
  std::memcpy(out.data(), raw.data(), N);
  return out;
}

}  // namespace iotledger
