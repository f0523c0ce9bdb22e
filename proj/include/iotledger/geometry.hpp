#pragma once

// Plaintext spatial primitives: points, axis-aligned hyperrectangles, and the
// anchor-point membership/intersection predicates. A point's position
// relative to a face is decided by comparing squared distances to a pair of
// anchor points mirrored about the face; the whole module is also the
// brute-force oracle for the encrypted query path.
//
// Boundary semantics are closed: a point on a face counts as inside, and the
// predicates only reject on strictly greater distance to the inner anchor.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace iotledger::geometry {

struct Point {
  std::vector<double> coords;

  Point() = default;
  Point(std::initializer_list<double> c) : coords(c) {}
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }

  bool finite() const {
    for (double c : coords)
      if (!std::isfinite(c)) return false;
    return true;
  }

  bool operator==(const Point&) const = default;
};

struct HyperRect {
  Point lo;  // per-dimension minima
  Point hi;  // per-dimension maxima

  std::size_t dim() const { return lo.dim(); }

  bool valid() const {
    if (lo.dim() != hi.dim() || !lo.finite() || !hi.finite()) return false;
    for (std::size_t j = 0; j < lo.dim(); ++j)
      if (lo[j] > hi[j]) return false;
    return true;
  }

  bool contains(const Point& p) const {
    for (std::size_t j = 0; j < dim(); ++j)
      if (p[j] < lo[j] || p[j] > hi[j]) return false;
    return true;
  }

  bool intersects(const HyperRect& r) const {
    for (std::size_t j = 0; j < dim(); ++j)
      if (r.hi[j] < lo[j] || r.lo[j] > hi[j]) return false;
    return true;
  }

  Point center() const {
    Point c;
    c.coords.resize(dim());
    for (std::size_t j = 0; j < dim(); ++j) c.coords[j] = 0.5 * (lo[j] + hi[j]);
    return c;
  }

  // Tight bounding box; callers guarantee a non-empty set.
  static HyperRect bounding(std::span<const Point> points) {
    if (points.empty()) throw std::invalid_argument("bounding: empty point set");
    HyperRect r{points[0], points[0]};
    for (const Point& p : points.subspan(1)) {
      for (std::size_t j = 0; j < r.dim(); ++j) {
        if (p[j] < r.lo.coords[j]) r.lo.coords[j] = p[j];
        if (p[j] > r.hi.coords[j]) r.hi.coords[j] = p[j];
      }
    }
    return r;
  }

  bool operator==(const HyperRect&) const = default;
};

struct AnchorPair {
  Point in;   // inside the face's inner halfspace
  Point out;  // mirrored across the face
};

// 2l anchor pairs describing one axis-aligned hyperrectangle, ordered
// (dim 0 lo-face, dim 0 hi-face, dim 1 lo-face, ...).
struct AnchorQuery {
  std::vector<AnchorPair> pairs;

  std::size_t dim() const { return pairs.size() / 2; }
};

inline double dist2(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dist2: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Places one anchor pair per face: both anchors sit at the rectangle center
// in every other coordinate and are offset by +-delta along the face normal,
// so the pair's midpoint lies on the face and the segment is normal to it.
inline AnchorQuery anchors_for_rect(const HyperRect& q, double delta) {
  if (!q.valid()) throw std::invalid_argument("anchors_for_rect: invalid rectangle");
  if (!(delta > 0.0)) throw std::invalid_argument("anchors_for_rect: delta must be positive");
  AnchorQuery out;
  out.pairs.reserve(2 * q.dim());
  Point c = q.center();
  for (std::size_t j = 0; j < q.dim(); ++j) {
    AnchorPair lo_face{c, c};
    lo_face.in.coords[j] = q.lo[j] + delta;
    lo_face.out.coords[j] = q.lo[j] - delta;
    out.pairs.push_back(std::move(lo_face));

    AnchorPair hi_face{c, c};
    hi_face.in.coords[j] = q.hi[j] - delta;
    hi_face.out.coords[j] = q.hi[j] + delta;
    out.pairs.push_back(std::move(hi_face));
  }
  return out;
}

// False iff some pair has the point strictly nearer the outer anchor.
inline bool is_point_in_rect(const Point& p, const AnchorQuery& q) {
  for (const AnchorPair& pair : q.pairs)
    if (dist2(p, pair.in) > dist2(p, pair.out)) return false;
  return true;
}

// False iff some pair rejects both extremal vertices of r. For axis-aligned
// q and r this is exact closed-interval overlap per dimension.
inline bool are_rects_inter(const AnchorQuery& q, const HyperRect& r) {
  for (const AnchorPair& pair : q.pairs) {
    bool lo_out = dist2(r.lo, pair.in) > dist2(r.lo, pair.out);
    bool hi_out = dist2(r.hi, pair.in) > dist2(r.hi, pair.out);
    if (lo_out && hi_out) return false;
  }
  return true;
}

// The test oracle: exact coordinate comparison, ascending index order.
inline std::vector<std::size_t> rect_range_query_bruteforce(std::span<const Point> points,
                                                            const HyperRect& q) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (q.contains(points[i])) out.push_back(i);
  return out;
}

}  // namespace iotledger::geometry
