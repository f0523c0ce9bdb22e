#include "iotledger/aspe.hpp"

#include <gtest/gtest.h>

#include "iotledger/geometry.hpp"
#include "iotledger/rng.hpp"
#include "test_util.hpp"

using namespace iotledger;
using namespace iotledger::aspe;
using iotledger::geometry::AnchorQuery;
using iotledger::geometry::HyperRect;
using iotledger::geometry::Point;

namespace {

AspeKey identity_key(std::size_t l) {
  AspeKey k;
  k.dim = l;
  k.m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(l + 1),
                                  static_cast<Eigen::Index>(l + 1));
  k.m_inv = k.m;
  return k;
}

double max_identity_deviation(const AspeKey& k) {
  Eigen::MatrixXd prod = k.m * k.m_inv;
  return (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Keygen, DeterministicForSeed) {
  AspeKey a = keygen(2, 7);
  AspeKey b = keygen(2, 7);
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.bytes(), b.bytes());
}

TEST(Keygen, InverseWithinTolerance) {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull})
    EXPECT_LT(max_identity_deviation(keygen(5, seed)), 1e-9);
}

TEST(Keygen, DifferentSeedsDiffer) {
  EXPECT_NE(keygen(5, 1).m, keygen(5, 2).m);
}

TEST(Keygen, DeterminantFloor) {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_GE(std::abs(keygen(3, seed).m.determinant()), 1e-6);
}

TEST(EncryptPoint, IdentityKeyAppendsOne) {
  EncPoint e = encrypt_point(identity_key(2), Point{2, 3});
  ASSERT_EQ(e.vec.size(), 3);
  EXPECT_DOUBLE_EQ(e.vec[0], 2.0);
  EXPECT_DOUBLE_EQ(e.vec[1], 3.0);
  EXPECT_DOUBLE_EQ(e.vec[2], 1.0);

  EncPoint z = encrypt_point(identity_key(3), Point{0, 0, 0});
  EXPECT_DOUBLE_EQ(z.vec[3], 1.0);
  EXPECT_DOUBLE_EQ(z.vec.head(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EncryptPoint, RoundTrip) {
  Rng rng(5);
  for (std::size_t l : {1u, 3u, 8u}) {
    AspeKey k = keygen(l, rng.u64());
    for (int i = 0; i < 50; ++i) {
      Point v = testutil::random_point(rng, l, -10.0, 10.0);
      Point back = decrypt_point(k, encrypt_point(k, v));
      for (std::size_t j = 0; j < l; ++j) EXPECT_NEAR(back[j], v[j], 1e-9);
    }
  }
}

TEST(EncryptPoint, DimensionMismatchThrows) {
  EXPECT_THROW(encrypt_point(keygen(2, 1), Point{1, 2, 3}), std::invalid_argument);
}

TEST(Trapdoor, IdentityKeyPattern) {
  // First pair (1,0) / (3,0): encrypted anchors are r*(1, 0, -0.5) and
  // r*(3, 0, -4.5) for one shared r per pair.
  AnchorQuery q;
  q.pairs.push_back({Point{1, 0}, Point{3, 0}});
  q.pairs.push_back({Point{0, 1}, Point{0, 3}});
  q.pairs.push_back({Point{2, 0}, Point{4, 0}});
  q.pairs.push_back({Point{0, 2}, Point{0, 4}});
  Trapdoor tr = make_trapdoor(identity_key(2), q, 9);
  const double r = tr.pairs[0].enc_in[0];
  EXPECT_GE(r, 0.5);
  EXPECT_LE(r, 2.0);
  EXPECT_DOUBLE_EQ(tr.pairs[0].enc_in[1], 0.0);
  EXPECT_DOUBLE_EQ(tr.pairs[0].enc_in[2], -0.5 * r);
  EXPECT_DOUBLE_EQ(tr.pairs[0].enc_out[0], 3.0 * r);
  EXPECT_DOUBLE_EQ(tr.pairs[0].enc_out[2], -4.5 * r);
}

TEST(Trapdoor, PairCountIs2L) {
  Rng rng(12);
  AspeKey k = keygen(3, 4);
  AnchorQuery q = geometry::anchors_for_rect(testutil::random_rect(rng, 3), 0.5);
  EXPECT_EQ(make_trapdoor(k, q, 1).pairs.size(), 6u);
}

TEST(Trapdoor, FreshSeedsDifferButAgree) {
  Rng rng(77);
  AspeKey k = keygen(3, 123);
  AnchorQuery q = geometry::anchors_for_rect(testutil::random_rect(rng, 3), 0.5);
  Trapdoor t1 = make_trapdoor(k, q, 1);
  Trapdoor t2 = make_trapdoor(k, q, 2);
  EXPECT_NE(t1.bytes(), t2.bytes());

  // Unlinkability, weak testable form: entries differ by more than 1e-9 yet
  // every query answer matches.
  double max_diff = 0.0;
  for (std::size_t i = 0; i < t1.pairs.size(); ++i)
    max_diff =
        std::max(max_diff, (t1.pairs[i].enc_in - t2.pairs[i].enc_in).cwiseAbs().maxCoeff());
  EXPECT_GT(max_diff, 1e-9);

  for (int i = 0; i < 300; ++i) {
    Point p = testutil::random_point(rng, 3);
    EncPoint ep = encrypt_point(k, p);
    EXPECT_EQ(enc_point_in_rect(t1, ep), enc_point_in_rect(t2, ep));
    HyperRect r = testutil::random_rect(rng, 3);
    EncRect er{encrypt_point(k, r.lo), encrypt_point(k, r.hi)};
    EXPECT_EQ(enc_rects_inter(t1, er), enc_rects_inter(t2, er));
  }
}

namespace {

// 2l pairs with the pair under test first.
AnchorQuery padded_query(const Point& a_in, const Point& a_out) {
  AnchorQuery q;
  for (std::size_t j = 0; j < 2 * a_in.dim(); ++j) q.pairs.push_back({a_in, a_out});
  return q;
}

}  // namespace

TEST(EncCompare, IdentityExample) {
  // (enc_in - enc_out) . [V] = (1-3, 0, -0.5+4.5) . (0, 0, 1) = 4 > 0.
  AspeKey k = identity_key(2);
  Trapdoor tr = make_trapdoor(k, padded_query(Point{1, 0}, Point{3, 0}), 3, 1.0, 1.0);
  EncPoint v = encrypt_point(k, Point{0, 0});
  EXPECT_DOUBLE_EQ((tr.pairs[0].enc_in - tr.pairs[0].enc_out).dot(v.vec), 4.0);
  EXPECT_EQ(enc_compare(tr.pairs[0], v), 1);
}

TEST(EncCompare, EquidistantIsZero) {
  AspeKey k = identity_key(2);
  Trapdoor tr = make_trapdoor(k, padded_query(Point{1, 0}, Point{3, 0}), 3, 1.0, 1.0);
  EXPECT_EQ(enc_compare(tr.pairs[0], encrypt_point(k, Point{2, 5})), 0);
}

TEST(EncCompare, MatchesPlaintextDistanceComparison) {
  Rng rng(31);
  for (int batch = 0; batch < 10; ++batch) {
    std::size_t l = 1 + batch % 5;
    AspeKey k = keygen(l, rng.u64());
    for (int i = 0; i < 1000; ++i) {
      Point v = testutil::random_point(rng, l, -5.0, 5.0);
      Point a_in = testutil::random_point(rng, l, -5.0, 5.0);
      Point a_out = testutil::random_point(rng, l, -5.0, 5.0);
      AnchorQuery q;
      for (std::size_t j = 0; j < 2 * l; ++j) q.pairs.push_back({a_in, a_out});
      Trapdoor tr = make_trapdoor(k, q, rng.u64());
      double plain = geometry::dist2(v, a_out) - geometry::dist2(v, a_in);
      int expected = plain > 0 ? 1 : (plain < 0 ? -1 : 0);
      EXPECT_EQ(enc_compare(tr.pairs[0], encrypt_point(k, v)), expected);
    }
  }
}

// The scalar-product identity the whole scheme rests on.
TEST(Properties, InnerProductIdentity) {
  Rng rng(41);
  for (int i = 0; i < 5000; ++i) {
    std::size_t l = 1 + static_cast<std::size_t>(rng.below(12));
    AspeKey k = keygen(l, rng.u64());
    Point a = testutil::random_point(rng, l, -3.0, 3.0);
    Point v = testutil::random_point(rng, l, -3.0, 3.0);
    AnchorQuery q;
    for (std::size_t j = 0; j < 2 * l; ++j) q.pairs.push_back({a, a});
    Trapdoor tr = make_trapdoor(k, q, rng.u64(), 1.0, 1.0);
    double got = tr.pairs[0].enc_in.dot(encrypt_point(k, v).vec);
    double a_dot_v = 0.0, norm2 = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      a_dot_v += a[j] * v[j];
      norm2 += a[j] * a[j];
    }
    double expected = a_dot_v - 0.5 * norm2;
    EXPECT_NEAR(got, expected, 1e-6 * std::max(1.0, std::abs(expected)));
  }
}

// Scaling both pair members by any positive r never flips a comparison.
TEST(Properties, SignPreservedUnderForcedR) {
  Rng rng(51);
  AspeKey k = keygen(3, 8);
  AnchorQuery q = geometry::anchors_for_rect(testutil::random_rect(rng, 3), 0.5);
  Trapdoor base = make_trapdoor(k, q, 1, 1.0, 1.0);
  for (double r : {0.5, 1.0, 2.0}) {
    Trapdoor forced = make_trapdoor(k, q, 1, r, r);
    for (int i = 0; i < 500; ++i) {
      EncPoint ep = encrypt_point(k, testutil::random_point(rng, 3));
      EXPECT_EQ(enc_point_in_rect(forced, ep), enc_point_in_rect(base, ep));
    }
  }
}

// Encrypted predicates equal the plaintext oracle on seeded instances.
TEST(Properties, EncryptedPlaintextEquivalence) {
  Rng rng(61);
  for (std::size_t l : {1u, 2u, 3u, 5u, 10u}) {
    AspeKey k = keygen(l, 1000 + l);
    for (int i = 0; i < 400; ++i) {
      HyperRect qr = testutil::random_rect(rng, l);
      AnchorQuery anchors = geometry::anchors_for_rect(qr, 0.5);
      Trapdoor tr = make_trapdoor(k, anchors, rng.u64());
      for (int j = 0; j < 5; ++j) {
        Point p = testutil::random_point(rng, l);
        EXPECT_EQ(enc_point_in_rect(tr, encrypt_point(k, p)),
                  geometry::is_point_in_rect(p, anchors));
        HyperRect r = testutil::random_rect(rng, l);
        EncRect er{encrypt_point(k, r.lo), encrypt_point(k, r.hi)};
        EXPECT_EQ(enc_rects_inter(tr, er), geometry::are_rects_inter(anchors, r));
      }
    }
  }
}

// The geometry examples, run through encryption. The identity key keeps the
// arithmetic exact; the boundary-tie cases additionally pin the pair scalar
// to 1, since an exact distance tie survives encryption only when the
// randomizer doesn't round.
TEST(EncPredicates, MirrorGeometryExamples) {
  AspeKey k = identity_key(2);
  AnchorQuery a = geometry::anchors_for_rect({Point{1, 2}, Point{4, 5}}, 0.5);
  Trapdoor tr = make_trapdoor(k, a, 17);
  EXPECT_TRUE(enc_point_in_rect(tr, encrypt_point(k, Point{2, 3})));
  EXPECT_FALSE(enc_point_in_rect(tr, encrypt_point(k, Point{0, 3})));
  Trapdoor tr_unit = make_trapdoor(k, a, 17, 1.0, 1.0);
  EXPECT_TRUE(enc_point_in_rect(tr_unit, encrypt_point(k, Point{1, 2})));

  auto enc_rect = [&](const HyperRect& r) {
    return EncRect{encrypt_point(k, r.lo), encrypt_point(k, r.hi)};
  };
  Trapdoor t02 = make_trapdoor(k, geometry::anchors_for_rect({Point{0, 0}, Point{2, 2}}, 0.5), 1);
  EXPECT_TRUE(enc_rects_inter(t02, enc_rect({Point{1, 1}, Point{3, 3}})));
  Trapdoor t01 = make_trapdoor(k, geometry::anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.5), 2);
  EXPECT_FALSE(enc_rects_inter(t01, enc_rect({Point{2, 2}, Point{3, 3}})));
  Trapdoor t01_unit =
      make_trapdoor(k, geometry::anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.5), 2, 1.0, 1.0);
  EXPECT_TRUE(enc_rects_inter(t01_unit, enc_rect({Point{1, 1}, Point{2, 2}})));
}

TEST(Serialization, KeyRoundTrip) {
  AspeKey k = keygen(4, 99);
  Bytes raw = k.bytes();
  ByteReader r(raw);
  AspeKey back = AspeKey::parse(r);
  r.expect_done();
  EXPECT_EQ(back.dim, k.dim);
  EXPECT_EQ(back.m, k.m);
  EXPECT_LT(max_identity_deviation(back), 1e-9);
}

TEST(Serialization, EncPointRoundTrip) {
  AspeKey k = keygen(3, 5);
  EncPoint e = encrypt_point(k, Point{0.1, 0.2, 0.3});
  Bytes raw = e.bytes();
  ByteReader r(raw);
  EncPoint back = EncPoint::parse(r);
  r.expect_done();
  EXPECT_EQ(back.bytes(), raw);
}
