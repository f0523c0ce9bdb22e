#pragma once

// The blockchain: block layout, proof-of-work mining, block/chain validation,
// majority approval, and the unbalanced time index over blocks.
//
// Header wire layout (the exact bytes proof-of-work runs over):
//   prev_hash(32) || imt_root_sig(80) || difficulty(1) || timestamp(8, BE)
//   || nonce(8, BE)
//
// Validation re-derives everything a block claims from its own bytes: the
// IMT hashes, the deterministic node-id sequence, node sizes, the leaf/log
// linkage, and the four signature kinds (peer log signatures, the cloud
// upload receipt, the device batch signature, the device's IMT root
// signature). Every body byte is covered by at least one of those checks.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotledger/bytes.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/crypto.hpp"
#include "iotledger/imt.hpp"
#include "iotledger/kdtree.hpp"

namespace iotledger::ledger {

constexpr std::uint8_t kMaxDifficulty = 32;

struct BlockHeader {
  Digest prev_hash{};
  crypto::Signature imt_root_sig;  // device's signature over the IMT root
  std::uint8_t difficulty = 0;
  std::uint64_t timestamp = 0;
  std::uint64_t nonce = 0;

  static constexpr std::size_t kWireSize = 32 + crypto::Signature::kWireSize + 1 + 8 + 8;

  void serialize(ByteWriter& w) const {
    w.arr(prev_hash);
    imt_root_sig.serialize(w);
    w.u8(difficulty);
    w.u64(timestamp);
    w.u64(nonce);
  }

  Bytes bytes() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  static BlockHeader parse(ByteReader& r) {
    BlockHeader h;
    h.prev_hash = r.arr<32>();
    h.imt_root_sig = crypto::Signature::parse(r);
    h.difficulty = r.u8();
    h.timestamp = r.u64();
    h.nonce = r.u64();
    return h;
  }
};

inline Digest header_hash(const BlockHeader& h) { return crypto::hash(h.bytes()); }

inline int leading_zero_bits(const Digest& d) {
  int bits = 0;
  for (std::uint8_t b : d) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    for (int s = 7; s >= 0; --s) {
      if (b & (1u << s)) return bits;
      ++bits;
    }
  }
  return bits;
}

inline bool meets_target(const Digest& d, std::uint8_t difficulty) {
  return leading_zero_bits(d) >= difficulty;
}

struct BlockBody {
  DeviceId device_id{};
  std::uint64_t upload_ts = 0;           // timestamp in both upload receipts
  std::vector<CommLog> logs;
  crypto::Signature cloud_receipt;       // Sig_c over h_1..h_m || ID(D) || TS
  crypto::Signature batch_sig;           // Sig_d over H(L || Sig_c)
  Bytes imt_bytes;                       // serialized index merkle tree

  Bytes serialize() const {
    ByteWriter w;
    w.arr(device_id);
    w.u64(upload_ts);
    w.u32(static_cast<std::uint32_t>(logs.size()));
    for (const CommLog& log : logs) log.serialize(w);
    cloud_receipt.serialize(w);
    batch_sig.serialize(w);
    w.u64(imt_bytes.size());
    w.raw(imt_bytes);
    return w.take();
  }

  static BlockBody parse(ByteView data) {
    ByteReader r(data);
    BlockBody b;
    b.device_id = r.arr<16>();
    b.upload_ts = r.u64();
    std::uint32_t n = r.u32();
    if (n > (1u << 24)) throw ParseError("BlockBody: log count too large");
    b.logs.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) b.logs.push_back(CommLog::parse(r));
    b.cloud_receipt = crypto::Signature::parse(r);
    b.batch_sig = crypto::Signature::parse(r);
    std::uint64_t imt_len = r.u64();
    b.imt_bytes = r.raw(imt_len);
    r.expect_done();
    return b;
  }
};

struct Block {
  BlockHeader header;
  BlockBody body;

  Bytes serialize() const {
    ByteWriter w;
    header.serialize(w);
    Bytes body_bytes = body.serialize();
    w.u64(body_bytes.size());
    w.raw(body_bytes);
    return w.take();
  }

  static Block parse(ByteView data) {
    ByteReader r(data);
    Block b;
    b.header = BlockHeader::parse(r);
    std::uint64_t body_len = r.u64();
    b.body = BlockBody::parse(r.view(body_len));
    r.expect_done();
    return b;
  }
};

// --- receipt / signature message layouts ---

inline Bytes upload_receipt_message(std::span<const Digest> cipher_refs, const DeviceId& id,
                                    std::uint64_t ts) {
  ByteWriter w;
  for (const Digest& d : cipher_refs) w.arr(d);
  w.arr(id);
  w.u64(ts);
  return w.take();
}

inline Digest batch_sig_digest(const std::vector<CommLog>& logs,
                               const crypto::Signature& cloud_receipt) {
  ByteWriter w;
  w.raw(serialize_logs(logs));
  cloud_receipt.serialize(w);
  return crypto::hash(w.view());
}

// --- mining ---

// Scans nonces from zero and returns the first header whose hash meets the
// target, so the result is the lowest satisfying nonce. miner_id is carried
// for event attribution only; the header layout has no miner field.
inline BlockHeader mine(const BlockBody& body, const crypto::Signature& imt_root_sig,
                        const Digest& prev_hash, std::uint8_t difficulty,
                        std::uint64_t timestamp, const DeviceId& miner_id = {}) {
  (void)body;
  (void)miner_id;
  if (difficulty > kMaxDifficulty)
    throw std::invalid_argument("mine: difficulty above desk-scale cap");
  BlockHeader h;
  h.prev_hash = prev_hash;
  h.imt_root_sig = imt_root_sig;
  h.difficulty = difficulty;
  h.timestamp = timestamp;
  for (h.nonce = 0;; ++h.nonce) {
    if (meets_target(header_hash(h), difficulty)) return h;
  }
}

// --- validation ---

struct ValidationResult {
  bool ok = false;
  std::string reason;

  static ValidationResult pass() { return {true, ""}; }
  static ValidationResult fail(std::string r) { return {false, std::move(r)}; }
};

struct ValidationParams {
  std::map<DeviceId, crypto::PublicKey> device_keys;
  crypto::PublicKey cloud_key{};
  DeviceId cloud_id{};
  std::uint8_t expected_difficulty = 0;
};

namespace detail {

// Pre-order structural walk: replays the deterministic id sequence, checks
// size bookkeeping, and pairs each leaf with its log record.
inline bool check_imt_structure(const imt::ImtNode& node, kdtree::IdGenerator& ids,
                                const std::vector<CommLog>& logs,
                                std::vector<bool>& log_seen, std::string& why) {
  if (node.id != ids.next()) {
    why = "imt_ids";
    return false;
  }
  if (node.is_leaf()) {
    if (node.size != 1) {
      why = "imt_sizes";
      return false;
    }
    std::uint64_t i = node.payload->log_index;
    if (i >= logs.size() || log_seen[i]) {
      why = "leaf_log_link";
      return false;
    }
    log_seen[i] = true;
    if (logs[i].cipher_ref != node.payload->cipher_ref || logs[i].leaf_id != node.id) {
      why = "leaf_log_link";
      return false;
    }
    return true;
  }
  if (!node.left || !node.right) {
    why = "imt_structure";
    return false;
  }
  if (node.size != node.left->size + node.right->size ||
      (node.left->size > node.right->size ? node.left->size - node.right->size
                                          : node.right->size - node.left->size) > 1) {
    why = "imt_sizes";
    return false;
  }
  return check_imt_structure(*node.left, ids, logs, log_seen, why) &&
         check_imt_structure(*node.right, ids, logs, log_seen, why);
}

}  // namespace detail

inline ValidationResult validate_block(const Block& b, const Digest& prev_header_hash,
                                       const ValidationParams& params) {
  if (b.header.prev_hash != prev_header_hash) return ValidationResult::fail("prev_hash");
  if (b.header.difficulty != params.expected_difficulty)
    return ValidationResult::fail("difficulty");
  if (!meets_target(header_hash(b.header), b.header.difficulty))
    return ValidationResult::fail("pow");

  const BlockBody& body = b.body;
  auto key_it = params.device_keys.find(body.device_id);
  if (key_it == params.device_keys.end()) return ValidationResult::fail("unknown_device");
  const crypto::PublicKey& device_key = key_it->second;

  if (body.logs.empty()) return ValidationResult::fail("empty_body");

  std::unique_ptr<imt::ImtNode> root;
  try {
    root = imt::parse(body.imt_bytes);
  } catch (const ParseError&) {
    return ValidationResult::fail("imt_parse");
  }

  kdtree::IdGenerator ids = kdtree::IdGenerator::for_batch(body.device_id, body.upload_ts);
  std::vector<bool> log_seen(body.logs.size(), false);
  std::string why;
  if (!detail::check_imt_structure(*root, ids, body.logs, log_seen, why))
    return ValidationResult::fail(why);
  for (bool seen : log_seen)
    if (!seen) return ValidationResult::fail("leaf_log_link");

  if (!imt::verify_hashes(*root, body.logs)) return ValidationResult::fail("imt_hash");

  if (b.header.imt_root_sig.signer_id != body.device_id)
    return ValidationResult::fail("imt_root_sig");
  if (!crypto::verify(device_key, root->hash, b.header.imt_root_sig))
    return ValidationResult::fail("imt_root_sig");

  for (const CommLog& log : body.logs) {
    auto peer_it = params.device_keys.find(log.peer_sig.signer_id);
    if (peer_it == params.device_keys.end()) return ValidationResult::fail("log_sig");
    if (!crypto::verify(peer_it->second, log.peer_sig_message(), log.peer_sig))
      return ValidationResult::fail("log_sig");
  }

  std::vector<Digest> refs;
  refs.reserve(body.logs.size());
  for (const CommLog& log : body.logs) refs.push_back(log.cipher_ref);
  if (body.cloud_receipt.signer_id != params.cloud_id) return ValidationResult::fail("cloud_sig");
  if (!crypto::verify(params.cloud_key,
                      upload_receipt_message(refs, body.device_id, body.upload_ts),
                      body.cloud_receipt))
    return ValidationResult::fail("cloud_sig");

  if (body.batch_sig.signer_id != body.device_id) return ValidationResult::fail("batch_sig");
  if (!crypto::verify(device_key, batch_sig_digest(body.logs, body.cloud_receipt),
                      body.batch_sig))
    return ValidationResult::fail("batch_sig");

  return ValidationResult::pass();
}

// --- time index ---
//
// Right-spine tree: each insert creates one internal node whose left child is
// the previous root and whose right child is the new block's leaf, so the
// newest block sits at depth 1 and locating it touches O(1) nodes.

class TimeIndex {
 public:
  void insert(std::size_t block_index, std::uint64_t ts) {
    if (!nodes_.empty() && ts < nodes_[static_cast<std::size_t>(root_)].max_ts)
      throw std::invalid_argument("time_index: out-of-order timestamp");
    int leaf = add_node({ts, ts, -1, -1, block_index});
    if (root_ < 0) {
      root_ = leaf;
      return;
    }
    Node inner{nodes_[static_cast<std::size_t>(root_)].min_ts, ts, root_, leaf, 0};
    root_ = add_node(inner);
  }

  struct Locate {
    std::vector<std::size_t> blocks;  // ascending block index
    std::size_t visited = 0;          // nodes whose range was tested
  };

  Locate locate(std::uint64_t lo, std::uint64_t hi) const {
    Locate out;
    if (root_ < 0) return out;
    std::vector<int> stack{root_};
    while (!stack.empty()) {
      const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      ++out.visited;
      if (n.max_ts < lo || n.min_ts > hi) continue;
      if (n.is_leaf()) {
        out.blocks.push_back(n.block_index);
        continue;
      }
      const Node& l = nodes_[static_cast<std::size_t>(n.left)];
      const Node& r = nodes_[static_cast<std::size_t>(n.right)];
      if (!(r.max_ts < lo || r.min_ts > hi)) stack.push_back(n.right);
      if (!(l.max_ts < lo || l.min_ts > hi)) stack.push_back(n.left);
    }
    std::sort(out.blocks.begin(), out.blocks.end());
    return out;
  }

  // Edge count from the root to the block's leaf; throws for unknown blocks.
  // Every internal node's right child is a leaf, so the walk follows the
  // left spine.
  std::size_t leaf_depth(std::size_t block_index) const {
    int cur = root_;
    std::size_t depth = 0;
    while (cur >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(cur)];
      if (n.is_leaf()) {
        if (n.block_index == block_index) return depth;
        break;
      }
      const Node& r = nodes_[static_cast<std::size_t>(n.right)];
      if (r.is_leaf() && r.block_index == block_index) return depth + 1;
      cur = n.left;
      ++depth;
    }
    throw std::invalid_argument("time_index: unknown block");
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return root_ < 0; }

 private:
  struct Node {
    std::uint64_t min_ts = 0;
    std::uint64_t max_ts = 0;
    int left = -1;
    int right = -1;
    std::size_t block_index = 0;

    bool is_leaf() const { return left < 0; }
  };

  int add_node(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  int root_ = -1;
};

// --- chain ---

inline Block make_genesis() {
  Block g;
  g.header = BlockHeader{};  // all-zero prev hash, difficulty 0, nonce 0
  g.body = BlockBody{};
  return g;
}

struct Chain {
  Block genesis;
  std::vector<Block> blocks;  // B_1 .. B_cur
  TimeIndex tindex;

  static Chain create() {
    Chain c;
    c.genesis = make_genesis();
    return c;
  }

  Digest tip_hash() const {
    return blocks.empty() ? header_hash(genesis.header) : header_hash(blocks.back().header);
  }

  std::uint64_t tip_ts() const {
    return blocks.empty() ? genesis.header.timestamp : blocks.back().header.timestamp;
  }

  // Structural append: linkage and timestamp order are container invariants;
  // full verification is the validators' job.
  void append(Block b) {
    if (b.header.prev_hash != tip_hash())
      throw std::invalid_argument("chain: prev-hash linkage broken");
    if (b.header.timestamp < tip_ts())
      throw std::invalid_argument("chain: timestamp regression");
    tindex.insert(blocks.size(), b.header.timestamp);
    blocks.push_back(std::move(b));
  }
};

using Validator = std::function<bool(const Block&)>;

// Strict majority: appended iff more than half of the validators approve.
inline bool approve_and_append(Chain& chain, Block block, std::span<const Validator> validators) {
  std::size_t approvals = 0;
  for (const Validator& v : validators)
    if (v(block)) ++approvals;
  if (2 * approvals <= validators.size()) return false;
  chain.append(std::move(block));
  return true;
}

inline ValidationResult validate_chain(const Chain& chain, const ValidationParams& params) {
  if (chain.genesis.serialize() != make_genesis().serialize())
    return ValidationResult::fail("genesis");
  Digest prev = header_hash(chain.genesis.header);
  std::uint64_t prev_ts = chain.genesis.header.timestamp;
  for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
    const Block& b = chain.blocks[i];
    if (b.header.timestamp < prev_ts)
      return ValidationResult::fail("timestamp_order at block " + std::to_string(i + 1));
    ValidationResult r = validate_block(b, prev, params);
    if (!r.ok) return ValidationResult::fail(r.reason + " at block " + std::to_string(i + 1));
    prev = header_hash(b.header);
    prev_ts = b.header.timestamp;
  }
  return ValidationResult::pass();
}

// Verifies a stored suffix B_j..B_cur given only hash(B_{j-1}.header).
inline ValidationResult validate_suffix(std::span<const Block> suffix,
                                        const Digest& trusted_prev_hash,
                                        const ValidationParams& params) {
  Digest prev = trusted_prev_hash;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    ValidationResult r = validate_block(suffix[i], prev, params);
    if (!r.ok) return ValidationResult::fail(r.reason + " at suffix block " + std::to_string(i));
    prev = header_hash(suffix[i].header);
  }
  return ValidationResult::pass();
}

// --- persistence ---
//
// Append-only file of length-prefixed serialized blocks (genesis first).

constexpr char kChainMagic[8] = {'I', 'O', 'T', 'L', 'D', 'G', 'R', '1'};

inline Bytes serialize_chain(const Chain& chain) {
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t*>(kChainMagic), 8));
  w.u32(static_cast<std::uint32_t>(chain.blocks.size() + 1));
  auto put = [&w](const Block& b) {
    Bytes bytes = b.serialize();
    w.u64(bytes.size());
    w.raw(bytes);
  };
  put(chain.genesis);
  for (const Block& b : chain.blocks) put(b);
  return w.take();
}

inline Chain parse_chain(ByteView data) {
  ByteReader r(data);
  Bytes magic = r.raw(8);
  if (std::memcmp(magic.data(), kChainMagic, 8) != 0) throw ParseError("chain: bad magic");
  std::uint32_t count = r.u32();
  if (count == 0) throw ParseError("chain: missing genesis");
  Chain chain;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t len = r.u64();
    Block b = Block::parse(r.view(len));
    if (i == 0) {
      chain.genesis = std::move(b);
    } else {
      chain.tindex.insert(chain.blocks.size(), b.header.timestamp);
      chain.blocks.push_back(std::move(b));
    }
  }
  r.expect_done();
  return chain;
}

inline void save_chain(const Chain& chain, const std::string& path) {
  Bytes data = serialize_chain(chain);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Chain load_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_chain(data);
}

}  // namespace iotledger::ledger
