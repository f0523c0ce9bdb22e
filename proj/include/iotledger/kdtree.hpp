#pragma once

// kd-tree over a device's digitized file points, plus the ASPE-encrypted
// variant whose rectangles go on-chain.
//
// Build rules: the root rectangle is the tight bounding box; the split
// dimension cycles with depth; the split value is the ceil(n/2)-th smallest
// coordinate with ties broken by input index (equal coordinates fill the left
// half first), so sibling sizes differ by at most one. Internal children keep
// the median-partitioned halves of the parent rectangle; a leaf stores the
// degenerate rectangle at its single point, which is what makes the encrypted
// leaf test exact.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "iotledger/aspe.hpp"
#include "iotledger/bytes.hpp"
#include "iotledger/comm_log.hpp"
#include "iotledger/crypto.hpp"
#include "iotledger/geometry.hpp"

namespace iotledger::kdtree {

// --- digitization ---

struct AttributeSchema {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::vector<std::string> categories;  // non-empty => categorical

  bool categorical() const { return !categories.empty(); }
};

// Min-max normalization into [0, 1]; categorical values map to their
// enumeration index over [0, #categories - 1] first. A zero-width range pins
// the coordinate to 0.5.
inline geometry::Point digitize(std::span<const AttrValue> attrs,
                                std::span<const AttributeSchema> schema) {
  if (attrs.size() != schema.size())
    throw std::invalid_argument("digitize: attribute count does not match schema");
  geometry::Point p;
  p.coords.reserve(attrs.size());
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    const AttributeSchema& s = schema[j];
    double value, lo, hi;
    if (s.categorical()) {
      const std::string* name = std::get_if<std::string>(&attrs[j]);
      if (!name) throw std::invalid_argument("digitize: expected categorical value for " + s.name);
      auto it = std::find(s.categories.begin(), s.categories.end(), *name);
      if (it == s.categories.end())
        throw std::invalid_argument("digitize: unknown categorical value '" + *name + "' for " +
                                    s.name);
      value = static_cast<double>(it - s.categories.begin());
      lo = 0.0;
      hi = static_cast<double>(s.categories.size() - 1);
    } else {
      const double* d = std::get_if<double>(&attrs[j]);
      if (!d) throw std::invalid_argument("digitize: expected numeric value for " + s.name);
      value = *d;
      lo = s.min;
      hi = s.max;
    }
    p.coords.push_back(lo == hi ? 0.5 : (value - lo) / (hi - lo));
  }
  return p;
}

// --- node ids ---

// Counter-based generator: id_k = SHA256(seed || k)[0:16]. Deterministic, so
// a validator can replay the id sequence of a broadcast index.
class IdGenerator {
 public:
  explicit IdGenerator(Bytes seed) : seed_(std::move(seed)) {}

  explicit IdGenerator(std::uint64_t seed) {
    ByteWriter w;
    w.u64(seed);
    seed_ = w.take();
  }

  static IdGenerator for_batch(const DeviceId& device, std::uint64_t upload_ts) {
    ByteWriter w;
    w.raw(ByteView(reinterpret_cast<const std::uint8_t*>("kdid"), 4));
    w.arr(device);
    w.u64(upload_ts);
    return IdGenerator(w.take());
  }

  NodeId next() {
    ByteWriter w;
    w.raw(seed_);
    w.u64(counter_++);
    Digest d = crypto::hash(w.view());
    NodeId id;
    std::copy_n(d.begin(), 16, id.begin());
    return id;
  }

 private:
  Bytes seed_;
  std::uint64_t counter_ = 0;
};

// --- trees ---

struct LeafPayload {
  Digest cipher_ref{};       // content address of C_it
  std::uint64_t log_index = 0;  // position of L_it in the batch

  bool operator==(const LeafPayload&) const = default;
};

struct PointRecord {
  geometry::Point point;
  LeafPayload payload;
};

struct KdNode {
  NodeId id{};
  geometry::HyperRect rect;
  std::uint64_t size = 0;
  std::unique_ptr<KdNode> left;
  std::unique_ptr<KdNode> right;
  std::optional<LeafPayload> payload;

  bool is_leaf() const { return payload.has_value(); }
};

struct EncKdNode {
  NodeId id{};
  aspe::EncRect enc_rect;
  std::uint64_t size = 0;
  std::unique_ptr<EncKdNode> left;
  std::unique_ptr<EncKdNode> right;
  std::optional<LeafPayload> payload;

  bool is_leaf() const { return payload.has_value(); }
};

namespace detail {

inline std::unique_ptr<KdNode> build_rec(std::span<const PointRecord> pts,
                                         std::span<std::size_t> idx, geometry::HyperRect rect,
                                         std::size_t depth, IdGenerator& ids) {
  auto node = std::make_unique<KdNode>();
  node->id = ids.next();
  node->size = idx.size();

  if (idx.size() == 1) {
    const PointRecord& rec = pts[idx[0]];
    node->rect = geometry::HyperRect{rec.point, rec.point};
    node->payload = rec.payload;
    return node;
  }

  node->rect = std::move(rect);
  const std::size_t l = pts[idx[0]].point.dim();
  const std::size_t d = depth % l;
  const std::size_t half = (idx.size() + 1) / 2;

  auto key_less = [&](std::size_t a, std::size_t b) {
    double ca = pts[a].point[d], cb = pts[b].point[d];
    if (ca != cb) return ca < cb;
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + (half - 1), idx.end(), key_less);
  const double median = pts[idx[half - 1]].point[d];

  geometry::HyperRect left_rect = node->rect;
  left_rect.hi.coords[d] = median;
  geometry::HyperRect right_rect = node->rect;
  right_rect.lo.coords[d] = median;

  node->left = build_rec(pts, idx.subspan(0, half), std::move(left_rect), depth + 1, ids);
  node->right = build_rec(pts, idx.subspan(half), std::move(right_rect), depth + 1, ids);
  return node;
}

}  // namespace detail

// Empty input returns the empty-tree sentinel (nullptr).
inline std::unique_ptr<KdNode> build(std::span<const PointRecord> points, IdGenerator& ids) {
  if (points.empty()) return nullptr;
  const std::size_t l = points[0].point.dim();
  if (l == 0) throw std::invalid_argument("build: zero-dimensional points");
  std::vector<geometry::Point> raw;
  raw.reserve(points.size());
  for (const PointRecord& p : points) {
    if (p.point.dim() != l) throw std::invalid_argument("build: mixed dimensions");
    if (!p.point.finite()) throw std::invalid_argument("build: non-finite coordinate");
    raw.push_back(p.point);
  }
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  return detail::build_rec(points, idx, geometry::HyperRect::bounding(raw), 0, ids);
}

inline std::unique_ptr<KdNode> build(std::span<const PointRecord> points,
                                     std::uint64_t id_seed = 0) {
  IdGenerator ids(id_seed);
  return build(points, ids);
}

inline std::unique_ptr<EncKdNode> encrypt_tree(const KdNode* t, const aspe::AspeKey& k) {
  if (!t) return nullptr;
  if (t->rect.dim() != k.dim) throw std::invalid_argument("encrypt_tree: dimension mismatch");
  auto enc = std::make_unique<EncKdNode>();
  enc->id = t->id;
  enc->size = t->size;
  enc->payload = t->payload;
  enc->enc_rect = aspe::EncRect{aspe::encrypt_point(k, t->rect.lo),
                                aspe::encrypt_point(k, t->rect.hi)};
  if (t->left) enc->left = encrypt_tree(t->left.get(), k);
  if (t->right) enc->right = encrypt_tree(t->right.get(), k);
  return enc;
}

// --- walking helpers ---

template <typename Node>
std::size_t count_nodes(const Node* n) {
  if (!n) return 0;
  return 1 + count_nodes(n->left.get()) + count_nodes(n->right.get());
}

template <typename Node>
std::size_t height(const Node* n) {
  if (!n || n->is_leaf()) return 0;
  return 1 + std::max(height(n->left.get()), height(n->right.get()));
}

// --- serialization ---
//
// Depth-first pre-order. Per node: 16-byte id, 1-byte kind tag, 8-byte
// big-endian size, rectangle payload, and for leaves a 32-byte content
// address plus an 8-byte log index.

constexpr std::uint8_t kTagInternal = 0;
constexpr std::uint8_t kTagLeaf = 1;

namespace detail {

inline void serialize_point(ByteWriter& w, const geometry::Point& p) {
  w.u32(static_cast<std::uint32_t>(p.dim()));
  for (double c : p.coords) w.f64(c);
}

inline geometry::Point parse_point(ByteReader& r) {
  std::uint32_t l = r.u32();
  if (l == 0 || l > 4096) throw ParseError("Point: bad dimension");
  geometry::Point p;
  p.coords.reserve(l);
  for (std::uint32_t i = 0; i < l; ++i) p.coords.push_back(r.f64());
  return p;
}

inline void serialize_rec(ByteWriter& w, const KdNode& n) {
  w.arr(n.id);
  w.u8(n.is_leaf() ? kTagLeaf : kTagInternal);
  w.u64(n.size);
  serialize_point(w, n.rect.lo);
  serialize_point(w, n.rect.hi);
  if (n.is_leaf()) {
    w.arr(n.payload->cipher_ref);
    w.u64(n.payload->log_index);
  } else {
    serialize_rec(w, *n.left);
    serialize_rec(w, *n.right);
  }
}

inline void serialize_enc_rec(ByteWriter& w, const EncKdNode& n) {
  w.arr(n.id);
  w.u8(n.is_leaf() ? kTagLeaf : kTagInternal);
  w.u64(n.size);
  n.enc_rect.serialize(w);
  if (n.is_leaf()) {
    w.arr(n.payload->cipher_ref);
    w.u64(n.payload->log_index);
  } else {
    serialize_enc_rec(w, *n.left);
    serialize_enc_rec(w, *n.right);
  }
}

inline std::unique_ptr<EncKdNode> parse_enc_rec(ByteReader& r, std::size_t depth) {
  if (depth > 64) throw ParseError("EncKdNode: tree too deep");
  auto n = std::make_unique<EncKdNode>();
  n->id = r.arr<16>();
  std::uint8_t tag = r.u8();
  n->size = r.u64();
  n->enc_rect = aspe::EncRect::parse(r);
  if (tag == kTagLeaf) {
    LeafPayload p;
    p.cipher_ref = r.arr<32>();
    p.log_index = r.u64();
    n->payload = p;
  } else if (tag == kTagInternal) {
    n->left = parse_enc_rec(r, depth + 1);
    n->right = parse_enc_rec(r, depth + 1);
    if (n->left->enc_rect.lo.dim() != n->enc_rect.lo.dim() ||
        n->right->enc_rect.lo.dim() != n->enc_rect.lo.dim())
      throw ParseError("EncKdNode: child dimension mismatch");
  } else {
    throw ParseError("EncKdNode: bad kind tag");
  }
  return n;
}

}  // namespace detail

inline Bytes serialize(const KdNode& root) {
  ByteWriter w;
  detail::serialize_rec(w, root);
  return w.take();
}

inline Bytes serialize(const EncKdNode& root) {
  ByteWriter w;
  detail::serialize_enc_rec(w, root);
  return w.take();
}

inline std::unique_ptr<EncKdNode> parse_enc(ByteView data) {
  ByteReader r(data);
  auto root = detail::parse_enc_rec(r, 0);
  r.expect_done();
  return root;
}

}  // namespace iotledger::kdtree
