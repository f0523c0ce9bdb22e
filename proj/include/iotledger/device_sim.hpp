#pragma once

// Discrete-event simulation of the IoT network. Devices exchange files over
// a configured topology, buffer them until the storage cap trips, then flush:
// encrypt and outsource the files, swap upload receipts with the cloud, build
// the signed log batch and the encrypted, Merkle-authenticated index, and
// broadcast. An unoccupied device mines the broadcast into a block, which
// joins the chain once a strict majority of devices validates it.
//
// The whole loop is single-threaded and draws all randomness from one seeded
// generator in a fixed order, so a (config, seed) pair reproduces the chain
// byte for byte.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iotledger/aspe.hpp"
#include "iotledger/bytes.hpp"
#include "iotledger/cloud.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/crypto.hpp"
#include "iotledger/imt.hpp"
#include "iotledger/kdtree.hpp"
#include "iotledger/ledger.hpp"
#include "iotledger/rng.hpp"

namespace iotledger::sim {

struct DeviceKeys {
  crypto::KeyPair sign;
  crypto::SymKey sym{};
  aspe::AspeKey aspe_key;
};

struct Device {
  DeviceId id{};
  DeviceKeys keys;
  std::uint64_t storage_cap = 0;
  std::size_t chain_suffix = 0;  // blocks retained locally; 0 = whole chain
  std::vector<CommFile> buffer;
  std::uint64_t buffer_bytes = 0;
  bool busy = false;
};

struct DeviceSpec {
  std::uint64_t storage_cap = 1 << 20;
  std::size_t chain_suffix = 0;
};

struct FaultSchedule {
  std::set<std::size_t> deny_receipt_flushes;                        // by flush ordinal
  std::vector<std::pair<std::size_t, std::size_t>> drops;            // (flush, file)
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> corrupts;  // (flush, file, byte)
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::uint64_t base_ts = 1700000000;
  std::size_t steps = 10;
  double rate = 1.0;
  std::size_t file_size = 48;
  std::uint8_t difficulty = 4;
  std::vector<kdtree::AttributeSchema> attributes;
  std::vector<DeviceSpec> devices;
  std::vector<std::pair<std::size_t, std::size_t>> topology;
  FaultSchedule faults;

  std::size_t dimension() const { return attributes.size(); }

  void validate() const {
    if (devices.empty()) throw std::invalid_argument("config: device count must be >= 1");
    if (attributes.empty()) throw std::invalid_argument("config: at least one attribute");
    if (rate < 0.0) throw std::invalid_argument("config: rate must be >= 0");
    if (difficulty > ledger::kMaxDifficulty)
      throw std::invalid_argument("config: difficulty above cap of 32");
    for (const auto& [a, b] : topology) {
      if (a >= devices.size() || b >= devices.size())
        throw std::invalid_argument("config: topology index out of range");
      if (a == b) throw std::invalid_argument("config: self edges are not allowed");
    }
    for (const DeviceSpec& d : devices)
      if (d.storage_cap == 0) throw std::invalid_argument("config: storage_cap must be > 0");
    for (const kdtree::AttributeSchema& a : attributes)
      if (!a.categorical() && a.min > a.max)
        throw std::invalid_argument("config: attribute '" + a.name + "' has min > max");
  }
};

struct SimEvent {
  std::string event;
  std::uint64_t ts = 0;
  std::string actor;
  std::string digest;
};

// One file as it landed on the chain; the oracle input for end-to-end tests.
struct FlushedFile {
  std::size_t block_index = 0;
  std::size_t log_index = 0;
  DeviceId owner{};
  DeviceId peer{};
  std::uint64_t ts = 0;
  Digest cipher_ref{};
  CommFile file;
};

// The flush broadcast: logs || Sig_c || Sig_d(h(L||Sig_c)) || index, plus the
// device's root signature destined for the block header.
struct Broadcast {
  ledger::BlockBody body;
  crypto::Signature imt_root_sig;

  Bytes bytes() const {
    ByteWriter w;
    Bytes b = body.serialize();
    w.u64(b.size());
    w.raw(b);
    imt_root_sig.serialize(w);
    return w.take();
  }
};

// Uniformly seeded non-empty subset of the unoccupied devices; empty result
// means every device is busy and the block defers a round.
inline std::vector<std::size_t> elect_miners(const std::vector<bool>& busy, Rng& rng) {
  std::vector<std::size_t> unoccupied;
  for (std::size_t i = 0; i < busy.size(); ++i)
    if (!busy[i]) unoccupied.push_back(i);
  if (unoccupied.empty()) return {};
  std::vector<std::size_t> miners;
  while (miners.empty()) {
    for (std::size_t i : unoccupied)
      if (rng.coin()) miners.push_back(i);
  }
  return miners;
}

class Network {
 public:
  explicit Network(ScenarioConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    now_ = cfg_.base_ts;

    Digest cloud_seed = derive("cloud-seed", 0);
    DeviceId cloud_id = derive_id("cloud-id", 0);
    crypto::SignSeed cseed;
    std::copy_n(cloud_seed.begin(), cseed.size(), cseed.begin());
    cloud_ = CloudStore(crypto::keypair_from_seed(cloud_id, cseed));

    params_.cloud_id = cloud_id;
    params_.cloud_key = cloud_.public_key();
    params_.expected_difficulty = cfg_.difficulty;

    for (std::size_t i = 0; i < cfg_.devices.size(); ++i) {
      Device d;
      d.id = derive_id("device-id", i);
      crypto::SignSeed seed;
      Digest raw = derive("device-sign", i);
      std::copy_n(raw.begin(), seed.size(), seed.begin());
      d.keys.sign = crypto::keypair_from_seed(d.id, seed);
      d.keys.sym = derive("device-sym", i);
      Digest aspe_raw = derive("device-aspe", i);
      std::uint64_t aspe_seed = 0;
      for (int b = 0; b < 8; ++b) aspe_seed = (aspe_seed << 8) | aspe_raw[b];
      d.keys.aspe_key = aspe::keygen(cfg_.dimension(), aspe_seed);
      d.storage_cap = cfg_.devices[i].storage_cap;
      d.chain_suffix = cfg_.devices[i].chain_suffix;
      params_.device_keys[d.id] = d.keys.sign.pub;
      devices_.push_back(std::move(d));
    }

    chain_ = ledger::Chain::create();
  }

  // One time step: drain any deferred broadcast, then generate this step's
  // communication events. A device whose buffer crosses its cap flushes and
  // publishes inside the step.
  void step() {
    drain_pending();
    for (const auto& [a, b] : cfg_.topology) {
      std::size_t count = static_cast<std::size_t>(cfg_.rate);
      double frac = cfg_.rate - static_cast<double>(count);
      if (frac > 0.0 && rng_.unit() < frac) ++count;
      for (std::size_t k = 0; k < count; ++k) {
        bool a_sends = rng_.coin();
        CommFile f = make_file(a_sends ? a : b, a_sends ? b : a);
        deliver(a, f);
        deliver(b, f);
      }
    }
    now_ += 1;
  }

  void run() {
    for (std::size_t s = 0; s < cfg_.steps; ++s) step();
    drain_pending();
  }

  // The flush protocol. Returns the broadcast, or nullopt when the cloud
  // denies the upload receipt (objects rolled back, buffer kept).
  std::optional<Broadcast> flush(std::size_t device_index) {
    std::vector<CommFile> files;
    return flush_impl(device_index, files);
  }

  // flush + mine + majority approval. False when the flush aborted.
  bool flush_and_publish(std::size_t device_index) {
    std::vector<CommFile> files;
    std::optional<Broadcast> bc = flush_impl(device_index, files);
    if (!bc) return false;
    pending_.push_back({*bc, std::move(files), device_index});
    devices_[device_index].busy = true;
    drain_pending();
    devices_[device_index].busy = false;
    drain_pending();
    return true;
  }

  // Harness hook: stage files directly without triggering cap-based flushes.
  void seed_files(std::size_t device_index, std::vector<CommFile> files) {
    Device& d = devices_[device_index];
    for (CommFile& f : files) {
      d.buffer_bytes += f.serialize().size();
      d.buffer.push_back(std::move(f));
    }
  }

  const ScenarioConfig& config() const { return cfg_; }
  const ledger::Chain& chain() const { return chain_; }
  CloudStore& cloud() { return cloud_; }
  const CloudStore& cloud() const { return cloud_; }
  const std::vector<Device>& devices() const { return devices_; }
  const ledger::ValidationParams& params() const { return params_; }
  const std::vector<SimEvent>& events() const { return events_; }
  const std::vector<FlushedFile>& history() const { return history_; }
  std::uint64_t now() const { return now_; }

 private:
  struct Pending {
    Broadcast broadcast;
    std::vector<CommFile> files;
    std::size_t flusher;
  };

  Digest derive(const char* label, std::size_t index) const {
    ByteWriter w;
    w.u64(cfg_.seed);
    w.raw(ByteView(reinterpret_cast<const std::uint8_t*>(label), std::strlen(label)));
    w.u32(static_cast<std::uint32_t>(index));
    return crypto::hash(w.view());
  }

  DeviceId derive_id(const char* label, std::size_t index) const {
    Digest d = derive(label, index);
    DeviceId id;
    std::copy_n(d.begin(), id.size(), id.begin());
    return id;
  }

  CommFile make_file(std::size_t sender, std::size_t receiver) {
    CommFile f;
    f.sender_id = devices_[sender].id;
    f.receiver_id = devices_[receiver].id;
    f.ts = now_;
    f.attrs.reserve(cfg_.attributes.size());
    for (const kdtree::AttributeSchema& a : cfg_.attributes) {
      if (a.categorical())
        f.attrs.emplace_back(a.categories[rng_.below(a.categories.size())]);
      else
        f.attrs.emplace_back(rng_.uniform(a.min, a.max));
    }
    f.body.resize(cfg_.file_size);
    for (std::size_t i = 0; i < f.body.size(); ++i) f.body[i] = rng_.byte();
    return f;
  }

  void deliver(std::size_t device_index, const CommFile& f) {
    Device& d = devices_[device_index];
    d.buffer_bytes += f.serialize().size();
    d.buffer.push_back(f);
    event("comm", hex_id(d.id), to_hex(crypto::hash(f.serialize())));
    if (d.buffer_bytes >= d.storage_cap) flush_and_publish(device_index);
  }

  crypto::SymNonce next_nonce() {
    crypto::SymNonce n{};
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = rng_.byte();
    return n;
  }

  std::optional<Broadcast> flush_impl(std::size_t device_index, std::vector<CommFile>& files_out) {
    Device& d = devices_[device_index];
    if (d.buffer.empty()) throw std::invalid_argument("flush: buffer is empty");
    const std::size_t flush_ordinal = flush_counter_++;
    const std::uint64_t upload_ts = now_;
    const std::size_t m = d.buffer.size();

    // Outsource ciphertexts; remember digests in batch order.
    std::vector<Digest> refs;
    std::vector<Bytes> file_bytes;
    refs.reserve(m);
    file_bytes.reserve(m);
    for (const CommFile& f : d.buffer) {
      Bytes plain = f.serialize();
      Bytes ct = crypto::sym_encrypt(d.keys.sym, next_nonce(), plain);
      refs.push_back(cloud_.put(ct));
      file_bytes.push_back(std::move(plain));
      event("upload", hex_id(d.id), to_hex(refs.back()));
    }

    // Receipt exchange; denial rolls the staged objects back.
    if (cfg_.faults.deny_receipt_flushes.count(flush_ordinal)) cloud_.arm_deny_receipt();
    std::optional<crypto::Signature> sig_c =
        cloud_.sign_upload_receipt(refs, d.id, upload_ts);
    if (!sig_c ||
        !crypto::verify(cloud_.public_key(),
                        ledger::upload_receipt_message(refs, d.id, upload_ts), *sig_c)) {
      for (const Digest& ref : refs) cloud_.erase(ref);
      event("flush_abort", hex_id(d.id), "");
      return std::nullopt;
    }
    crypto::Signature sig_d_upload =
        crypto::sign(d.keys.sign, ledger::upload_receipt_message(refs, cloud_.id(), upload_ts));
    ByteWriter batch_key;
    for (const Digest& ref : refs) batch_key.arr(ref);
    cloud_.store_device_receipt(crypto::hash(batch_key.view()), sig_d_upload);

    // Index build: digitize, kd-tree with replayable ids, encrypt.
    std::vector<kdtree::PointRecord> records;
    records.reserve(m);
    for (std::size_t t = 0; t < m; ++t)
      records.push_back({kdtree::digitize(d.buffer[t].attrs, cfg_.attributes),
                         kdtree::LeafPayload{refs[t], t}});
    kdtree::IdGenerator ids = kdtree::IdGenerator::for_batch(d.id, upload_ts);
    std::unique_ptr<kdtree::KdNode> tree = kdtree::build(records, ids);
    std::map<std::uint64_t, NodeId> leaf_ids;
    collect_leaf_ids(tree.get(), leaf_ids);

    // Logs: encrypted file digest + the peer's signature.
    std::vector<CommLog> logs;
    logs.reserve(m);
    for (std::size_t t = 0; t < m; ++t) {
      const CommFile& f = d.buffer[t];
      CommLog log;
      log.cipher_ref = refs[t];
      Digest file_digest = crypto::hash(file_bytes[t]);
      log.enc_file_hash = crypto::sym_encrypt(d.keys.sym, next_nonce(),
                                              ByteView(file_digest.data(), file_digest.size()));
      log.ts = f.ts;
      log.leaf_id = leaf_ids.at(t);
      const DeviceId peer = (f.sender_id == d.id) ? f.receiver_id : f.sender_id;
      log.peer_sig = crypto::sign(device_by_id(peer).keys.sign, log.peer_sig_message());
      logs.push_back(std::move(log));
    }

    std::unique_ptr<kdtree::EncKdNode> enc = kdtree::encrypt_tree(tree.get(), d.keys.aspe_key);
    std::unique_ptr<imt::ImtNode> index = imt::build(*enc, logs);

    Broadcast bc;
    bc.body.device_id = d.id;
    bc.body.upload_ts = upload_ts;
    bc.body.logs = std::move(logs);
    bc.body.cloud_receipt = *sig_c;
    bc.body.batch_sig =
        crypto::sign(d.keys.sign, ledger::batch_sig_digest(bc.body.logs, *sig_c));
    bc.body.imt_bytes = imt::serialize(*index);
    bc.imt_root_sig = crypto::sign(d.keys.sign, index->hash);

    // Scheduled cloud faults against this batch.
    for (const auto& [fl, file] : cfg_.faults.drops)
      if (fl == flush_ordinal && file < refs.size()) {
        cloud_.inject_drop(refs[file]);
        event("fault_drop", "cloud", to_hex(refs[file]));
      }
    for (const auto& [fl, file, byte] : cfg_.faults.corrupts)
      if (fl == flush_ordinal && file < refs.size()) {
        cloud_.inject_corrupt(refs[file], byte);
        event("fault_corrupt", "cloud", to_hex(refs[file]));
      }

    files_out = std::move(d.buffer);
    d.buffer.clear();
    d.buffer_bytes = 0;
    event("broadcast", hex_id(d.id), to_hex(index->hash));
    return bc;
  }

  void drain_pending() {
    while (!pending_.empty()) {
      std::vector<bool> busy;
      busy.reserve(devices_.size());
      for (const Device& d : devices_) busy.push_back(d.busy);
      std::vector<std::size_t> miners = elect_miners(busy, rng_);
      if (miners.empty()) {
        event("defer", "net", "");
        return;
      }
      Pending p = std::move(pending_.front());
      pending_.pop_front();

      const std::size_t publisher = miners.front();
      ledger::BlockHeader header =
          ledger::mine(p.broadcast.body, p.broadcast.imt_root_sig, chain_.tip_hash(),
                       cfg_.difficulty, now_, devices_[publisher].id);
      ledger::Block block{header, p.broadcast.body};
      event("mine", hex_id(devices_[publisher].id), to_hex(ledger::header_hash(header)));

      const Digest prev = chain_.tip_hash();
      std::vector<ledger::Validator> validators;
      validators.reserve(devices_.size());
      for (std::size_t i = 0; i < devices_.size(); ++i)
        validators.push_back([&](const ledger::Block& b) {
          return ledger::validate_block(b, prev, params_).ok;
        });
      if (!ledger::approve_and_append(chain_, block, validators)) {
        event("block_rejected", "net", to_hex(ledger::header_hash(header)));
        continue;
      }
      const std::size_t block_index = chain_.blocks.size() - 1;
      event("block", hex_id(devices_[publisher].id), to_hex(ledger::header_hash(header)));
      for (std::size_t t = 0; t < p.files.size(); ++t) {
        const CommFile& f = p.files[t];
        const DeviceId owner = p.broadcast.body.device_id;
        history_.push_back({block_index, t, owner,
                            f.sender_id == owner ? f.receiver_id : f.sender_id, f.ts,
                            p.broadcast.body.logs[t].cipher_ref, f});
      }
    }
  }

  static void collect_leaf_ids(const kdtree::KdNode* n, std::map<std::uint64_t, NodeId>& out) {
    if (!n) return;
    if (n->is_leaf()) {
      out[n->payload->log_index] = n->id;
      return;
    }
    collect_leaf_ids(n->left.get(), out);
    collect_leaf_ids(n->right.get(), out);
  }

  Device& device_by_id(const DeviceId& id) {
    for (Device& d : devices_)
      if (d.id == id) return d;
    throw std::invalid_argument("unknown device id");
  }

  static std::string hex_id(const DeviceId& id) { return to_hex(ByteView(id.data(), id.size())); }

  void event(std::string kind, std::string actor, std::string digest) {
    events_.push_back({std::move(kind), now_, std::move(actor), std::move(digest)});
  }

  ScenarioConfig cfg_;
  Rng rng_;
  std::uint64_t now_ = 0;
  CloudStore cloud_;
  std::vector<Device> devices_;
  ledger::Chain chain_;
  ledger::ValidationParams params_;
  std::vector<SimEvent> events_;
  std::vector<FlushedFile> history_;
  std::deque<Pending> pending_;
  std::size_t flush_counter_ = 0;
};

}  // namespace iotledger::sim
