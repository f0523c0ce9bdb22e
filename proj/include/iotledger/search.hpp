#pragma once

// User-side two-layer query engine. The first layer narrows the chain to
// candidate blocks through the time index and an optional participant filter;
// the second layer walks each block's encrypted index with a trapdoor,
// pruning subtrees whose rectangles cannot intersect the query. Every hit is
// then authenticated against the block's signed Merkle root and its file
// fetched from the cloud; when the cloud fails, the hit degrades to the
// verified log digest plus the signature evidence instead of failing.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "iotledger/aspe.hpp"
#include "iotledger/bytes.hpp"
#include "iotledger/cloud.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/geometry.hpp"
#include "iotledger/imt.hpp"
#include "iotledger/kdtree.hpp"
#include "iotledger/ledger.hpp"

namespace iotledger::search {

struct Query {
  std::uint64_t ts_lo = 0;
  std::uint64_t ts_hi = 0;
  std::optional<std::set<DeviceId>> participants;
  geometry::HyperRect rect;

  void check() const {
    if (ts_lo > ts_hi) throw std::invalid_argument("query: ts_lo > ts_hi");
    if (!rect.valid()) throw std::invalid_argument("query: invalid rectangle");
  }
};

// Everything the querier holds: per-device ASPE and symmetric keys plus the
// public material needed to validate the chain.
struct DeviceQueryKeys {
  aspe::AspeKey aspe_key;
  crypto::SymKey sym{};
};

struct KeyStore {
  std::map<DeviceId, DeviceQueryKeys> devices;
  ledger::ValidationParams vparams;
};

// Raised when chain or proof verification fails during a query; honest runs
// never see it.
struct TamperError : std::runtime_error {
  explicit TamperError(const std::string& what) : std::runtime_error(what) {}
};

// --- first layer ---

struct LocateResult {
  std::vector<std::size_t> blocks;  // ascending indices into chain.blocks
  std::size_t index_nodes_visited = 0;
};

inline bool block_has_participant(const ledger::Block& b, const std::set<DeviceId>& wanted) {
  if (wanted.count(b.body.device_id)) return true;
  for (const CommLog& log : b.body.logs)
    if (wanted.count(log.peer_sig.signer_id)) return true;
  return false;
}

inline LocateResult locate_blocks(const ledger::Chain& chain, const Query& q) {
  q.check();
  ledger::TimeIndex::Locate hits = chain.tindex.locate(q.ts_lo, q.ts_hi);
  LocateResult out;
  out.index_nodes_visited = hits.visited;
  for (std::size_t i : hits.blocks) {
    if (q.participants && !block_has_participant(chain.blocks[i], *q.participants)) continue;
    out.blocks.push_back(i);
  }
  return out;
}

// --- second layer ---

struct LeafHit {
  NodeId leaf_id{};
  kdtree::LeafPayload payload;
};

struct BlockSearchResult {
  std::vector<LeafHit> hits;        // traversal order
  std::size_t nodes_visited = 0;    // nodes whose rectangle was tested
};

namespace detail {

inline void qry_rec(const imt::ImtNode& node, const aspe::Trapdoor& tr,
                    BlockSearchResult& out) {
  ++out.nodes_visited;
  if (!aspe::enc_rects_inter(tr, node.enc_rect)) return;
  if (node.is_leaf()) {
    out.hits.push_back({node.id, *node.payload});
    return;
  }
  qry_rec(*node.left, tr, out);
  qry_rec(*node.right, tr, out);
}

}  // namespace detail

// Depth-first traversal of an index. Leaves hold their point as a degenerate
// rectangle, so the same intersection test doubles as the exact membership
// test.
inline BlockSearchResult search_index(const aspe::Trapdoor& tr, const imt::ImtNode& root) {
  if (root.enc_rect.lo.dim() != tr.dim())
    throw std::invalid_argument("search: trapdoor dimension mismatch");
  BlockSearchResult out;
  detail::qry_rec(root, tr, out);
  return out;
}

inline BlockSearchResult search_block(const aspe::Trapdoor& tr, const ledger::Block& block) {
  std::unique_ptr<imt::ImtNode> root = imt::parse(block.body.imt_bytes);
  return search_index(tr, *root);
}

// --- verification and retrieval ---

enum class FileStatus : std::uint8_t {
  kRecovered,  // plaintext fetched, digest matched the log
  kCloudLost,  // cloud dropped/corrupted the object; evidence retained
};

struct Hit {
  std::size_t block_index = 0;
  NodeId leaf_id{};
  std::size_t log_index = 0;
  CommLog log;
  imt::MerkleProof proof;
  FileStatus status = FileStatus::kCloudLost;
  Digest file_digest{};                // decrypted E(h(F)) from the log
  std::optional<CommFile> file;        // set when recovered
  crypto::Signature cloud_receipt;     // evidence: Sig_c
  crypto::Signature batch_sig;         // evidence: Sig_d over h(L || Sig_c)
};

struct QueryResult {
  std::vector<Hit> hits;
  std::size_t blocks_searched = 0;
  std::size_t index_nodes_visited = 0;   // first layer
  std::size_t tree_nodes_visited = 0;    // second layer, summed over blocks
};

// Authenticates one block's leaf hits and attempts file recovery.
inline void verify_and_fetch(const ledger::Chain& chain, const sim::CloudStore& cloud,
                             const KeyStore& keys, std::size_t block_index,
                             const std::vector<LeafHit>& leaf_hits, QueryResult& out) {
  const ledger::Block& block = chain.blocks[block_index];
  auto key_it = keys.devices.find(block.body.device_id);
  if (key_it == keys.devices.end())
    throw std::invalid_argument("verify_and_fetch: no keys for publishing device");
  const crypto::SymKey& sym = key_it->second.sym;

  std::unique_ptr<imt::ImtNode> root = imt::parse(block.body.imt_bytes);
  for (const LeafHit& lh : leaf_hits) {
    Hit hit;
    hit.block_index = block_index;
    hit.leaf_id = lh.leaf_id;
    hit.log_index = lh.payload.log_index;
    if (hit.log_index >= block.body.logs.size())
      throw TamperError("leaf points outside the log batch");
    hit.log = block.body.logs[hit.log_index];
    hit.cloud_receipt = block.body.cloud_receipt;
    hit.batch_sig = block.body.batch_sig;

    hit.proof = imt::prove(*root, lh.leaf_id);
    if (!imt::verify(root->hash, hit.proof)) throw TamperError("merkle proof rejected");

    std::optional<Bytes> digest_plain = crypto::sym_decrypt(sym, hit.log.enc_file_hash);
    if (!digest_plain || digest_plain->size() != 32)
      throw std::invalid_argument("verify_and_fetch: cannot decrypt log digest");
    std::copy(digest_plain->begin(), digest_plain->end(), hit.file_digest.begin());

    std::optional<Bytes> ct = cloud.get(lh.payload.cipher_ref);
    std::optional<Bytes> plain;
    if (ct) plain = crypto::sym_decrypt(sym, *ct);
    if (plain && crypto::hash(*plain) == hit.file_digest) {
      hit.status = FileStatus::kRecovered;
      hit.file = CommFile::parse(*plain);
    } else {
      hit.status = FileStatus::kCloudLost;
    }
    out.hits.push_back(std::move(hit));
  }
}

// The full pipeline: anchors -> per-device trapdoor -> first layer -> second
// layer -> verification and retrieval. The chain is validated up front; any
// post-mining mutation surfaces as TamperError before results are returned.
inline QueryResult end_to_end_query(const ledger::Chain& chain, const sim::CloudStore& cloud,
                                    const KeyStore& keys, const Query& q,
                                    std::uint64_t trapdoor_seed, double anchor_delta = 0.25) {
  q.check();
  ledger::ValidationResult chain_ok = ledger::validate_chain(chain, keys.vparams);
  if (!chain_ok.ok) throw TamperError("chain validation failed: " + chain_ok.reason);

  geometry::AnchorQuery anchors = geometry::anchors_for_rect(q.rect, anchor_delta);
  LocateResult located = locate_blocks(chain, q);

  QueryResult out;
  out.index_nodes_visited = located.index_nodes_visited;
  std::map<DeviceId, aspe::Trapdoor> trapdoors;  // one per device key per query
  for (std::size_t bi : located.blocks) {
    const ledger::Block& block = chain.blocks[bi];
    auto key_it = keys.devices.find(block.body.device_id);
    if (key_it == keys.devices.end())
      throw std::invalid_argument("end_to_end_query: no keys for device in block");
    auto [td_it, fresh] = trapdoors.try_emplace(block.body.device_id);
    if (fresh)
      td_it->second = aspe::make_trapdoor(key_it->second.aspe_key, anchors, trapdoor_seed);
    BlockSearchResult bs = search_block(td_it->second, block);
    out.tree_nodes_visited += bs.nodes_visited;
    ++out.blocks_searched;
    verify_and_fetch(chain, cloud, keys, bi, bs.hits, out);
  }

  std::sort(out.hits.begin(), out.hits.end(), [](const Hit& a, const Hit& b) {
    if (a.block_index != b.block_index) return a.block_index < b.block_index;
    return a.leaf_id < b.leaf_id;
  });
  return out;
}

}  // namespace iotledger::search
