#pragma once

// Indexed Merkle tree: the encrypted kd-tree overlaid with authentication
// hashes, so the whole index is tamper-evident.
//
//   leaf:     hash = H([V_lo] || [V_hi] || H(L))      L = the leaf's log bytes
//   internal: hash = H(h_left || h_right || [V_lo] || [V_hi])
//
// "||" is plain byte concatenation of the fixed-width canonical
// serializations. A membership proof carries, per step, the sibling hash,
// which side the sibling sits on, and the parent's encrypted rectangle (the
// rectangle bytes are hashed into internal nodes, so replay needs them).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "iotledger/aspe.hpp"
#include "iotledger/bytes.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/crypto.hpp"
#include "iotledger/kdtree.hpp"

namespace iotledger::imt {

struct ImtNode {
  NodeId id{};
  aspe::EncRect enc_rect;
  std::uint64_t size = 0;
  std::unique_ptr<ImtNode> left;
  std::unique_ptr<ImtNode> right;
  std::optional<kdtree::LeafPayload> payload;
  Digest hash{};

  bool is_leaf() const { return payload.has_value(); }
};

inline Digest leaf_hash(const aspe::EncRect& rect, ByteView log_bytes) {
  ByteWriter w;
  rect.serialize(w);
  w.arr(crypto::hash(log_bytes));
  return crypto::hash(w.view());
}

inline Digest internal_hash(const Digest& h_left, const Digest& h_right,
                            const aspe::EncRect& rect) {
  ByteWriter w;
  w.arr(h_left);
  w.arr(h_right);
  rect.serialize(w);
  return crypto::hash(w.view());
}

namespace detail {

inline std::unique_ptr<ImtNode> build_rec(const kdtree::EncKdNode& src,
                                          std::span<const CommLog> logs) {
  auto n = std::make_unique<ImtNode>();
  n->id = src.id;
  n->enc_rect = src.enc_rect;
  n->size = src.size;
  n->payload = src.payload;
  if (src.is_leaf()) {
    if (src.payload->log_index >= logs.size())
      throw std::out_of_range("build_imt: dangling log_ref");
    n->hash = leaf_hash(n->enc_rect, logs[src.payload->log_index].bytes());
  } else {
    n->left = build_rec(*src.left, logs);
    n->right = build_rec(*src.right, logs);
    n->hash = internal_hash(n->left->hash, n->right->hash, n->enc_rect);
  }
  return n;
}

}  // namespace detail

inline std::unique_ptr<ImtNode> build(const kdtree::EncKdNode& tree,
                                      std::span<const CommLog> logs) {
  return detail::build_rec(tree, logs);
}

// Recomputes every hash from rectangles and logs and compares against the
// stored values; false on any mismatch or dangling log reference.
inline bool verify_hashes(const ImtNode& node, std::span<const CommLog> logs) {
  if (node.is_leaf()) {
    if (node.payload->log_index >= logs.size()) return false;
    return node.hash == leaf_hash(node.enc_rect, logs[node.payload->log_index].bytes());
  }
  if (!node.left || !node.right) return false;
  if (!verify_hashes(*node.left, logs) || !verify_hashes(*node.right, logs)) return false;
  return node.hash == internal_hash(node.left->hash, node.right->hash, node.enc_rect);
}

inline const ImtNode* find_leaf(const ImtNode* node, const NodeId& id) {
  if (!node) return nullptr;
  if (node->is_leaf()) return node->id == id ? node : nullptr;
  if (const ImtNode* hit = find_leaf(node->left.get(), id)) return hit;
  return find_leaf(node->right.get(), id);
}

// --- proofs ---

constexpr std::uint8_t kSiblingLeft = 0;   // sibling is the left child
constexpr std::uint8_t kSiblingRight = 1;  // sibling is the right child

struct ProofStep {
  Digest sibling_hash{};
  std::uint8_t sibling_side = 0;
  aspe::EncRect parent_rect;
};

struct MerkleProof {
  Digest leaf_hash{};
  std::vector<ProofStep> path;  // leaf-adjacent step first

  Bytes bytes() const {
    ByteWriter w;
    w.arr(leaf_hash);
    w.u32(static_cast<std::uint32_t>(path.size()));
    for (const ProofStep& s : path) {
      w.arr(s.sibling_hash);
      w.u8(s.sibling_side);
      s.parent_rect.serialize(w);
    }
    return w.take();
  }

  static MerkleProof parse(ByteView data) {
    ByteReader r(data);
    MerkleProof p;
    p.leaf_hash = r.arr<32>();
    std::uint32_t n = r.u32();
    if (n > 4096) throw ParseError("MerkleProof: path too long");
    p.path.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      ProofStep s;
      s.sibling_hash = r.arr<32>();
      s.sibling_side = r.u8();
      s.parent_rect = aspe::EncRect::parse(r);
      p.path.push_back(std::move(s));
    }
    r.expect_done();
    return p;
  }
};

namespace detail {

inline bool prove_rec(const ImtNode& node, const NodeId& leaf_id, MerkleProof& out) {
  if (node.is_leaf()) {
    if (node.id != leaf_id) return false;
    out.leaf_hash = node.hash;
    return true;
  }
  if (prove_rec(*node.left, leaf_id, out)) {
    out.path.push_back({node.right->hash, kSiblingRight, node.enc_rect});
    return true;
  }
  if (prove_rec(*node.right, leaf_id, out)) {
    out.path.push_back({node.left->hash, kSiblingLeft, node.enc_rect});
    return true;
  }
  return false;
}

}  // namespace detail

inline MerkleProof prove(const ImtNode& root, const NodeId& leaf_id) {
  MerkleProof proof;
  if (!detail::prove_rec(root, leaf_id, proof))
    throw std::invalid_argument("prove: unknown leaf id");
  return proof;
}

// Replays the path from the leaf hash; true iff it reproduces root_hash.
// Malformed proofs return false rather than throwing.
inline bool verify(const Digest& root_hash, const MerkleProof& proof) {
  Digest cur = proof.leaf_hash;
  for (const ProofStep& s : proof.path) {
    if (s.sibling_side == kSiblingLeft)
      cur = internal_hash(s.sibling_hash, cur, s.parent_rect);
    else if (s.sibling_side == kSiblingRight)
      cur = internal_hash(cur, s.sibling_hash, s.parent_rect);
    else
      return false;
  }
  return cur == root_hash;
}

// --- serialization ---
//
// The kd-tree layout with a 32-byte hash appended per node record.

namespace detail {

inline void serialize_rec(ByteWriter& w, const ImtNode& n) {
  w.arr(n.id);
  w.u8(n.is_leaf() ? kdtree::kTagLeaf : kdtree::kTagInternal);
  w.u64(n.size);
  n.enc_rect.serialize(w);
  if (n.is_leaf()) {
    w.arr(n.payload->cipher_ref);
    w.u64(n.payload->log_index);
  }
  w.arr(n.hash);
  if (!n.is_leaf()) {
    serialize_rec(w, *n.left);
    serialize_rec(w, *n.right);
  }
}

inline std::unique_ptr<ImtNode> parse_rec(ByteReader& r, std::size_t depth) {
  if (depth > 64) throw ParseError("ImtNode: tree too deep");
  auto n = std::make_unique<ImtNode>();
  n->id = r.arr<16>();
  std::uint8_t tag = r.u8();
  n->size = r.u64();
  n->enc_rect = aspe::EncRect::parse(r);
  if (tag == kdtree::kTagLeaf) {
    kdtree::LeafPayload p;
    p.cipher_ref = r.arr<32>();
    p.log_index = r.u64();
    n->payload = p;
    n->hash = r.arr<32>();
  } else if (tag == kdtree::kTagInternal) {
    n->hash = r.arr<32>();
    n->left = parse_rec(r, depth + 1);
    n->right = parse_rec(r, depth + 1);
    if (n->left->enc_rect.lo.dim() != n->enc_rect.lo.dim() ||
        n->right->enc_rect.lo.dim() != n->enc_rect.lo.dim())
      throw ParseError("ImtNode: child dimension mismatch");
  } else {
    throw ParseError("ImtNode: bad kind tag");
  }
  return n;
}

}  // namespace detail

inline Bytes serialize(const ImtNode& root) {
  ByteWriter w;
  detail::serialize_rec(w, root);
  return w.take();
}

inline std::unique_ptr<ImtNode> parse(ByteView data) {
  ByteReader r(data);
  auto root = detail::parse_rec(r, 0);
  r.expect_done();
  return root;
}

}  // namespace iotledger::imt
