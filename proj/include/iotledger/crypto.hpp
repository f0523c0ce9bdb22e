#pragma once

// Hashing, signatures, and the symmetric cipher for file bodies.
//
// Pinned schemes: SHA-256 for all digests, Ed25519 (libsodium) for
// signatures. File bodies use a keyed hash-stream cipher with a MAC tag;
// decryption under the wrong key fails closed rather than returning garbage.

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>

#include <sodium.h>

#include "iotledger/bytes.hpp"

namespace iotledger::crypto {

inline void init() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  });
}

inline Digest hash(ByteView msg) {
  init();
  Digest out;
  crypto_hash_sha256(out.data(), msg.data(), msg.size());
  return out;
}

inline Digest hash(const Bytes& msg) { return hash(ByteView(msg)); }

using PublicKey = std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES>;   // 32
using SecretKey = std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES>;   // 64
using SignSeed = std::array<std::uint8_t, crypto_sign_SEEDBYTES>;         // 32

struct KeyPair {
  PublicKey pub{};
  SecretKey sec{};
  DeviceId owner_id{};
};

inline KeyPair keypair_from_seed(const DeviceId& owner_id, const SignSeed& seed) {
  init();
  KeyPair kp;
  kp.owner_id = owner_id;
  crypto_sign_seed_keypair(kp.pub.data(), kp.sec.data(), seed.data());
  return kp;
}

struct Signature {
  std::array<std::uint8_t, crypto_sign_BYTES> sig{};  // 64
  DeviceId signer_id{};

  static constexpr std::size_t kWireSize = crypto_sign_BYTES + 16;

  void serialize(ByteWriter& w) const {
    w.arr(sig);
    w.arr(signer_id);
  }

  static Signature parse(ByteReader& r) {
    Signature s;
    s.sig = r.arr<crypto_sign_BYTES>();
    s.signer_id = r.arr<16>();
    return s;
  }

  Bytes bytes() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  bool operator==(const Signature&) const = default;
};

inline Signature sign(const KeyPair& kp, ByteView msg) {
  init();
  Signature s;
  s.signer_id = kp.owner_id;
  crypto_sign_detached(s.sig.data(), nullptr, msg.data(), msg.size(), kp.sec.data());
  return s;
}

inline bool verify(const PublicKey& pub, ByteView msg, const Signature& s) {
  init();
  return crypto_sign_verify_detached(s.sig.data(), msg.data(), msg.size(), pub.data()) == 0;
}

// --- symmetric cipher (file bodies) ---
//
// Wire layout: nonce(16) || ciphertext(len(pt)) || tag(32).
// Keystream block i = SHA256("ks" || key || nonce || i); tag =
// SHA256("mac" || key || nonce || ciphertext).

using SymKey = std::array<std::uint8_t, 32>;
using SymNonce = std::array<std::uint8_t, 16>;

constexpr std::size_t kSymOverhead = 16 + 32;

namespace detail {

inline Digest keystream_block(const SymKey& key, const SymNonce& nonce, std::uint64_t i) {
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t*>("ks"), 2));
  w.arr(key);
  w.arr(nonce);
  w.u64(i);
  return hash(w.view());
}

inline Digest mac_tag(const SymKey& key, const SymNonce& nonce, ByteView ct) {
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t*>("mac"), 3));
  w.arr(key);
  w.arr(nonce);
  w.raw(ct);
  return hash(w.view());
}

}  // namespace detail

inline Bytes sym_encrypt(const SymKey& key, const SymNonce& nonce, ByteView plaintext) {
  Bytes out;
  out.reserve(plaintext.size() + kSymOverhead);
  out.insert(out.end(), nonce.begin(), nonce.end());
  for (std::size_t i = 0; i < plaintext.size(); ++i) {
    Digest block = detail::keystream_block(key, nonce, i / 32);
    out.push_back(plaintext[i] ^ block[i % 32]);
  }
  Digest tag = detail::mac_tag(key, nonce, ByteView(out.data() + 16, plaintext.size()));
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

inline std::optional<Bytes> sym_decrypt(const SymKey& key, ByteView ciphertext) {
  if (ciphertext.size() < kSymOverhead) return std::nullopt;
  SymNonce nonce;
  std::memcpy(nonce.data(), ciphertext.data(), 16);
  std::size_t ct_len = ciphertext.size() - kSymOverhead;
  ByteView ct(ciphertext.data() + 16, ct_len);
  Digest expected = detail::mac_tag(key, nonce, ct);
  if (sodium_memcmp(expected.data(), ciphertext.data() + 16 + ct_len, 32) != 0)
    return std::nullopt;
  Bytes out(ct_len);
  for (std::size_t i = 0; i < ct_len; ++i) {
    Digest block = detail::keystream_block(key, nonce, i / 32);
    out[i] = ct[i] ^ block[i % 32];
  }
  return out;
}

}  // namespace iotledger::crypto
