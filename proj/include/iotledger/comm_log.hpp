#pragma once

// Communication files and their on-chain log records.
//
// A CommFile is the full payload two devices exchanged; only its ciphertext
// ever leaves a device. A CommLog is what the chain stores instead: the
// ciphertext's content address, the symmetrically encrypted file digest, the
// peer's signature over that digest and the timestamp, and the id of the
// index leaf that points at it. Log records are fixed-width so batches
// concatenate into a canonical byte string for hashing and signing.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "iotledger/bytes.hpp"
#include "iotledger/crypto.hpp"

namespace iotledger {

using AttrValue = std::variant<double, std::string>;

struct CommFile {
  DeviceId sender_id{};
  DeviceId receiver_id{};
  std::uint64_t ts = 0;
  std::vector<AttrValue> attrs;
  Bytes body;

  Bytes serialize() const {
    ByteWriter w;
    w.arr(sender_id);
    w.arr(receiver_id);
    w.u64(ts);
    w.u32(static_cast<std::uint32_t>(attrs.size()));
    for (const AttrValue& a : attrs) {
      if (const double* d = std::get_if<double>(&a)) {
        w.u8(0);
        w.f64(*d);
      } else {
        const std::string& s = std::get<std::string>(a);
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(s.size()));
        w.raw(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      }
    }
    w.u64(body.size());
    w.raw(body);
    return w.take();
  }

  static CommFile parse(ByteView data) {
    ByteReader r(data);
    CommFile f;
    f.sender_id = r.arr<16>();
    f.receiver_id = r.arr<16>();
    f.ts = r.u64();
    std::uint32_t n = r.u32();
    f.attrs.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint8_t tag = r.u8();
      if (tag == 0) {
        f.attrs.emplace_back(r.f64());
      } else if (tag == 1) {
        std::uint32_t len = r.u32();
        Bytes raw = r.raw(len);
        f.attrs.emplace_back(std::string(raw.begin(), raw.end()));
      } else {
        throw ParseError("CommFile: bad attribute tag");
      }
    }
    std::uint64_t body_len = r.u64();
    f.body = r.raw(body_len);
    r.expect_done();
    return f;
  }
};

struct CommLog {
  Digest cipher_ref{};       // content address of the outsourced ciphertext
  Bytes enc_file_hash;       // E(h(F)): sym ciphertext of the 32-byte digest
  crypto::Signature peer_sig;  // peer's signature over enc_file_hash || ts
  std::uint64_t ts = 0;
  NodeId leaf_id{};          // index leaf whose payload points back here

  // 32 + (16 + 32 + 32) + 80 + 8 + 16
  static constexpr std::size_t kWireSize = 32 + 80 + crypto::Signature::kWireSize + 8 + 16;

  void serialize(ByteWriter& w) const {
    w.arr(cipher_ref);
    w.raw(enc_file_hash);
    peer_sig.serialize(w);
    w.u64(ts);
    w.arr(leaf_id);
  }

  Bytes bytes() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  static CommLog parse(ByteReader& r) {
    CommLog log;
    log.cipher_ref = r.arr<32>();
    log.enc_file_hash = r.raw(32 + crypto::kSymOverhead);
    log.peer_sig = crypto::Signature::parse(r);
    log.ts = r.u64();
    log.leaf_id = r.arr<16>();
    return log;
  }

  // The byte string the peer signs.
  Bytes peer_sig_message() const {
    ByteWriter w;
    w.raw(enc_file_hash);
    w.u64(ts);
    return w.take();
  }
};

inline Bytes serialize_logs(const std::vector<CommLog>& logs) {
  ByteWriter w;
  for (const CommLog& log : logs) log.serialize(w);
  return w.take();
}

}  // namespace iotledger
