#pragma once

// The simulated public cloud: a content-addressed ciphertext store with the
// signature exchange of the upload protocol, plus fault injection hooks.
// Faults model the threat model's weak-but-deniable server: an object can be
// dropped, a stored byte can be corrupted, and the next receipt request can
// be denied. Corruption mutates the stored bytes, so it survives persistence
// and is detected client-side by authenticated decryption.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotledger/bytes.hpp"
#include "iotledger/crypto.hpp"
#include "iotledger/ledger.hpp"

namespace iotledger::sim {

class CloudStore {
 public:
  CloudStore() = default;
  explicit CloudStore(crypto::KeyPair keys) : keys_(std::move(keys)) {}

  const DeviceId& id() const { return keys_.owner_id; }
  const crypto::PublicKey& public_key() const { return keys_.pub; }

  // Content-addressed, idempotent.
  Digest put(ByteView data) {
    Digest d = crypto::hash(data);
    objects_.emplace(d, Bytes(data.begin(), data.end()));
    return d;
  }

  std::optional<Bytes> get(const Digest& digest) const {
    auto it = objects_.find(digest);
    if (it == objects_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const Digest& digest) const { return objects_.count(digest) != 0; }
  std::size_t size() const { return objects_.size(); }

  void erase(const Digest& digest) { objects_.erase(digest); }

  // Signs the upload receipt Sig_c, or refuses when a deny fault is armed.
  std::optional<crypto::Signature> sign_upload_receipt(std::span<const Digest> cipher_refs,
                                                       const DeviceId& device,
                                                       std::uint64_t ts) {
    if (deny_next_receipt_) {
      deny_next_receipt_ = false;
      return std::nullopt;
    }
    return crypto::sign(keys_, ledger::upload_receipt_message(cipher_refs, device, ts));
  }

  // Stores the device's mirror receipt Sig_d, keyed by the batch digest.
  void store_device_receipt(const Digest& batch_key, crypto::Signature sig_d) {
    device_receipts_[batch_key] = std::move(sig_d);
  }

  std::optional<crypto::Signature> device_receipt(const Digest& batch_key) const {
    auto it = device_receipts_.find(batch_key);
    if (it == device_receipts_.end()) return std::nullopt;
    return it->second;
  }

  // --- fault injection ---

  void inject_drop(const Digest& digest) { objects_.erase(digest); }

  void inject_corrupt(const Digest& digest, std::size_t byte_index) {
    auto it = objects_.find(digest);
    if (it == objects_.end()) throw std::invalid_argument("inject_corrupt: no such object");
    if (byte_index >= it->second.size())
      throw std::invalid_argument("inject_corrupt: byte index out of range");
    it->second[byte_index] ^= 0xff;
  }

  void arm_deny_receipt() { deny_next_receipt_ = true; }

  // --- persistence ---

  Bytes serialize() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(objects_.size()));
    for (const auto& [digest, data] : objects_) {
      w.arr(digest);
      w.u64(data.size());
      w.raw(data);
    }
    w.u32(static_cast<std::uint32_t>(device_receipts_.size()));
    for (const auto& [key, sig] : device_receipts_) {
      w.arr(key);
      sig.serialize(w);
    }
    return w.take();
  }

  static CloudStore parse(ByteView data, crypto::KeyPair keys = {}) {
    ByteReader r(data);
    CloudStore c(std::move(keys));
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      Digest d = r.arr<32>();
      std::uint64_t len = r.u64();
      c.objects_[d] = r.raw(len);
    }
    std::uint32_t m = r.u32();
    for (std::uint32_t i = 0; i < m; ++i) {
      Digest key = r.arr<32>();
      c.device_receipts_[key] = crypto::Signature::parse(r);
    }
    r.expect_done();
    return c;
  }

  void save(const std::string& path) const {
    Bytes data = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
  }

  static CloudStore load(const std::string& path, crypto::KeyPair keys = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(data, std::move(keys));
  }

 private:
  crypto::KeyPair keys_;
  std::map<Digest, Bytes> objects_;
  std::map<Digest, crypto::Signature> device_receipts_;
  bool deny_next_receipt_ = false;
};

}  // namespace iotledger::sim
