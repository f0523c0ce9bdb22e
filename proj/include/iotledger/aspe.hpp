#pragma once

// Asymmetric scalar-product-preserving encryption. A secret invertible
// (l+1)x(l+1) matrix M encrypts data vectors as M^-1 * (v | 1) and query
// anchors as M^T * (a | -0.5*||a||^2), so that
//
//   [A] . [V] = a.v - 0.5*||a||^2 = 0.5*(dist2(v, a_out) - dist2(v, a_in))
//
// once differenced over an anchor pair. Distance comparisons therefore
// survive encryption, which is all the range predicates need. Each trapdoor
// pair additionally carries one fresh positive scalar, which randomizes the
// ciphertext without touching the sign.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "iotledger/bytes.hpp"
#include "iotledger/geometry.hpp"
#include "iotledger/rng.hpp"

namespace iotledger::aspe {

struct EncPoint {
  Eigen::VectorXd vec;  // l+1 entries

  std::size_t dim() const { return static_cast<std::size_t>(vec.size()) - 1; }

  void serialize(ByteWriter& w) const {
    w.u32(static_cast<std::uint32_t>(dim()));
    for (Eigen::Index i = 0; i < vec.size(); ++i) w.f64(vec[i]);
  }

  Bytes bytes() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  static EncPoint parse(ByteReader& r) {
    std::uint32_t l = r.u32();
    if (l == 0 || l > 4096) throw ParseError("EncPoint: bad dimension");
    EncPoint p;
    p.vec.resize(l + 1);
    for (std::uint32_t i = 0; i <= l; ++i) p.vec[i] = r.f64();
    return p;
  }
};

// Encrypted extremal-vertex pair of one hyperrectangle.
struct EncRect {
  EncPoint lo;
  EncPoint hi;

  void serialize(ByteWriter& w) const {
    lo.serialize(w);
    hi.serialize(w);
  }

  static EncRect parse(ByteReader& r) {
    EncRect e;
    e.lo = EncPoint::parse(r);
    e.hi = EncPoint::parse(r);
    if (e.lo.dim() != e.hi.dim()) throw ParseError("EncRect: dimension mismatch");
    return e;
  }
};

struct AspeKey {
  Eigen::MatrixXd m;      // secret matrix M
  Eigen::MatrixXd m_inv;  // precomputed inverse
  std::size_t dim = 0;    // l

  // Wire layout: 4-byte big-endian l, then (l+1)^2 big-endian doubles of M
  // in row-major order. The inverse is recomputed on load.
  void serialize(ByteWriter& w) const {
    w.u32(static_cast<std::uint32_t>(dim));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
  }

  Bytes bytes() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  static AspeKey parse(ByteReader& r) {
    std::uint32_t l = r.u32();
    if (l == 0 || l > 4096) throw ParseError("AspeKey: bad dimension");
    AspeKey k;
    k.dim = l;
    k.m.resize(l + 1, l + 1);
    for (std::uint32_t i = 0; i <= l; ++i)
      for (std::uint32_t j = 0; j <= l; ++j) k.m(i, j) = r.f64();
    k.m_inv = k.m.inverse();
    return k;
  }
};

// Entries uniform in [-1, 1], resampled until |det| >= 1e-6 so the inverse is
// usable at double precision for l <= 32.
inline AspeKey keygen(std::size_t l, std::uint64_t seed) {
  if (l < 1) throw std::invalid_argument("keygen: dimension must be >= 1");
  Rng rng(seed);
  AspeKey key;
  key.dim = l;
  const auto n = static_cast<Eigen::Index>(l + 1);
  key.m.resize(n, n);
  for (;;) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) key.m(i, j) = rng.uniform(-1.0, 1.0);
    if (std::abs(key.m.determinant()) >= 1e-6) break;
  }
  key.m_inv = key.m.inverse();
  return key;
}

namespace detail {

inline Eigen::VectorXd lift_data(const geometry::Point& v) {
  Eigen::VectorXd out(v.dim() + 1);
  for (std::size_t j = 0; j < v.dim(); ++j) out[static_cast<Eigen::Index>(j)] = v[j];
  out[static_cast<Eigen::Index>(v.dim())] = 1.0;
  return out;
}

inline Eigen::VectorXd lift_anchor(const geometry::Point& a) {
  Eigen::VectorXd out(a.dim() + 1);
  double norm2 = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    out[static_cast<Eigen::Index>(j)] = a[j];
    norm2 += a[j] * a[j];
  }
  out[static_cast<Eigen::Index>(a.dim())] = -0.5 * norm2;
  return out;
}

}  // namespace detail

inline EncPoint encrypt_point(const AspeKey& k, const geometry::Point& v) {
  if (v.dim() != k.dim) throw std::invalid_argument("encrypt_point: dimension mismatch");
  return EncPoint{k.m_inv * detail::lift_data(v)};
}

// Test-side round trip: M * [V] recovers (v | 1).
inline geometry::Point decrypt_point(const AspeKey& k, const EncPoint& ev) {
  if (ev.dim() != k.dim) throw std::invalid_argument("decrypt_point: dimension mismatch");
  Eigen::VectorXd lifted = k.m * ev.vec;
  geometry::Point p;
  p.coords.assign(lifted.data(), lifted.data() + k.dim);
  return p;
}

struct TrapdoorPair {
  Eigen::VectorXd enc_in;
  Eigen::VectorXd enc_out;
};

struct Trapdoor {
  std::vector<TrapdoorPair> pairs;

  std::size_t dim() const { return pairs.size() / 2; }

  Bytes bytes() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(dim()));
    for (const TrapdoorPair& p : pairs) {
      for (Eigen::Index i = 0; i < p.enc_in.size(); ++i) w.f64(p.enc_in[i]);
      for (Eigen::Index i = 0; i < p.enc_out.size(); ++i) w.f64(p.enc_out[i]);
    }
    return w.take();
  }
};

// r_lo/r_hi bound the per-pair randomizer; tests pin r by passing a
// degenerate range.
inline Trapdoor make_trapdoor(const AspeKey& k, const geometry::AnchorQuery& q,
                              std::uint64_t seed, double r_lo, double r_hi) {
  if (q.dim() != k.dim) throw std::invalid_argument("make_trapdoor: dimension mismatch");
  if (!(r_lo > 0.0) || r_hi < r_lo) throw std::invalid_argument("make_trapdoor: bad r range");
  Rng rng(seed);
  Eigen::MatrixXd mt = k.m.transpose();
  Trapdoor tr;
  tr.pairs.reserve(q.pairs.size());
  for (const geometry::AnchorPair& pair : q.pairs) {
    double r = rng.uniform(r_lo, r_hi);
    TrapdoorPair tp;
    tp.enc_in = r * (mt * detail::lift_anchor(pair.in));
    tp.enc_out = r * (mt * detail::lift_anchor(pair.out));
    tr.pairs.push_back(std::move(tp));
  }
  return tr;
}

inline Trapdoor make_trapdoor(const AspeKey& k, const geometry::AnchorQuery& q,
                              std::uint64_t seed) {
  return make_trapdoor(k, q, seed, 0.5, 2.0);
}

// Sign of ([A_in] - [A_out]) . [V]; equals the sign of
// 0.5*(dist2(V, A_out) - dist2(V, A_in)), so negative means the point lies
// strictly outside the pair's inner halfspace.
inline int enc_compare(const TrapdoorPair& pair, const EncPoint& ev) {
  if (pair.enc_in.size() != ev.vec.size())
    throw std::invalid_argument("enc_compare: dimension mismatch");
  double d = (pair.enc_in - pair.enc_out).dot(ev.vec);
  if (d > 0.0) return 1;
  if (d < 0.0) return -1;
  return 0;
}

inline bool enc_point_in_rect(const Trapdoor& tr, const EncPoint& ev) {
  for (const TrapdoorPair& pair : tr.pairs)
    if (enc_compare(pair, ev) < 0) return false;
  return true;
}

inline bool enc_rects_inter(const Trapdoor& tr, const EncRect& er) {
  for (const TrapdoorPair& pair : tr.pairs)
    if (enc_compare(pair, er.lo) < 0 && enc_compare(pair, er.hi) < 0) return false;
  return true;
}

}  // namespace iotledger::aspe
