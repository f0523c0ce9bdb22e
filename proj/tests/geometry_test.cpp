#include "iotledger/geometry.hpp"

#include <gtest/gtest.h>

#include "iotledger/rng.hpp"
#include "test_util.hpp"

using namespace iotledger;
using namespace iotledger::geometry;

TEST(Dist2, KnownValues) {
  EXPECT_DOUBLE_EQ(dist2(Point{0, 0}, Point{3, 4}), 25.0);
  EXPECT_DOUBLE_EQ(dist2(Point{1, 1}, Point{1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(dist2(Point{2, 3, 5}, Point{1, 0, 1}), 26.0);
}

TEST(Dist2, DimensionMismatchThrows) {
  EXPECT_THROW(dist2(Point{1, 2}, Point{1, 2, 3}), std::invalid_argument);
}

TEST(Anchors, PlacementExample) {
  HyperRect q{Point{1, 2}, Point{3, 6}};
  AnchorQuery a = anchors_for_rect(q, 0.5);
  ASSERT_EQ(a.pairs.size(), 4u);
  // face x = 1
  EXPECT_EQ(a.pairs[0].in, (Point{1.5, 4}));
  EXPECT_EQ(a.pairs[0].out, (Point{0.5, 4}));
  // face x = 3
  EXPECT_EQ(a.pairs[1].in, (Point{2.5, 4}));
  EXPECT_EQ(a.pairs[1].out, (Point{3.5, 4}));
  // face y = 2
  EXPECT_EQ(a.pairs[2].in, (Point{2, 2.5}));
  EXPECT_EQ(a.pairs[2].out, (Point{2, 1.5}));
  // face y = 6
  EXPECT_EQ(a.pairs[3].in, (Point{2, 5.5}));
  EXPECT_EQ(a.pairs[3].out, (Point{2, 6.5}));
}

TEST(Anchors, PairInvariants) {
  Rng rng(11);
  for (std::size_t l : {1u, 2u, 3u, 5u}) {
    HyperRect q = testutil::random_rect(rng, l);
    AnchorQuery a = anchors_for_rect(q, 0.25);
    ASSERT_EQ(a.pairs.size(), 2 * l);
    for (std::size_t k = 0; k < a.pairs.size(); ++k) {
      const AnchorPair& pair = a.pairs[k];
      std::size_t d = k / 2;
      double face = (k % 2 == 0) ? q.lo[d] : q.hi[d];
      // A_in != A_out, midpoint on the face plane, segment normal to it.
      EXPECT_NE(pair.in, pair.out);
      EXPECT_DOUBLE_EQ(0.5 * (pair.in[d] + pair.out[d]), face);
      for (std::size_t j = 0; j < l; ++j)
        if (j != d) EXPECT_DOUBLE_EQ(pair.in[j], pair.out[j]);
    }
  }
}

TEST(Anchors, UnitSquareCenter) {
  AnchorQuery a = anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.5);
  EXPECT_TRUE(is_point_in_rect(Point{0.5, 0.5}, a));
}

TEST(Anchors, DegenerateSide) {
  // Zero-width dimension: the two mirrored pairs admit only the plane itself.
  HyperRect q{Point{2, 0}, Point{2, 1}};
  AnchorQuery a = anchors_for_rect(q, 0.5);
  EXPECT_TRUE(is_point_in_rect(Point{2.0, 0.5}, a));
  EXPECT_FALSE(is_point_in_rect(Point{2.01, 0.5}, a));
  EXPECT_FALSE(is_point_in_rect(Point{1.99, 0.5}, a));
}

TEST(PointInRect, Examples) {
  AnchorQuery a = anchors_for_rect({Point{1, 2}, Point{4, 5}}, 0.5);
  EXPECT_TRUE(is_point_in_rect(Point{2, 3}, a));
  EXPECT_FALSE(is_point_in_rect(Point{0, 3}, a));
  // Boundary corner: distance ties on two faces count as inside, matching
  // the coordinate oracle.
  EXPECT_TRUE(is_point_in_rect(Point{1, 2}, a));
  EXPECT_TRUE(HyperRect({Point{1, 2}, Point{4, 5}}).contains(Point{1, 2}));
}

TEST(RectsInter, Examples) {
  EXPECT_TRUE(are_rects_inter(anchors_for_rect({Point{0, 0}, Point{2, 2}}, 0.5),
                              {Point{1, 1}, Point{3, 3}}));
  EXPECT_FALSE(are_rects_inter(anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.5),
                               {Point{2, 2}, Point{3, 3}}));
  // Touching at a corner counts as intersecting (closed intervals).
  EXPECT_TRUE(are_rects_inter(anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.5),
                              {Point{1, 1}, Point{2, 2}}));
}

TEST(BruteForce, Examples) {
  std::vector<Point> pts{Point{0, 0}, Point{5, 5}};
  EXPECT_EQ(rect_range_query_bruteforce(pts, {Point{0, 0}, Point{1, 1}}),
            (std::vector<std::size_t>{0}));
  EXPECT_TRUE(rect_range_query_bruteforce({}, {Point{0, 0}, Point{1, 1}}).empty());
}

TEST(BruteForce, AgreesWithAnchorPredicate) {
  Rng rng(101);
  std::vector<Point> pts = testutil::random_points(rng, 100, 2);
  HyperRect q{Point{0.25, 0.25}, Point{0.75, 0.75}};
  AnchorQuery a = anchors_for_rect(q, 0.5);
  std::vector<std::size_t> hits = rect_range_query_bruteforce(pts, q);
  std::vector<std::size_t> via_anchors;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (is_point_in_rect(pts[i], a)) via_anchors.push_back(i);
  EXPECT_EQ(hits, via_anchors);
}

// Oracle agreement: the anchor predicate equals coordinate comparison for
// every delta, on random points and rectangles.
TEST(Properties, OracleAgreementAcrossDeltas) {
  Rng rng(202);
  for (std::size_t l : {1u, 2u, 3u, 5u}) {
    for (int i = 0; i < 500; ++i) {
      HyperRect q = testutil::random_rect(rng, l);
      Point p = testutil::random_point(rng, l);
      bool expected = q.contains(p);
      for (double delta : {0.01, 0.5, 10.0})
        EXPECT_EQ(is_point_in_rect(p, anchors_for_rect(q, delta)), expected);
    }
  }
}

// No false negatives and axis-aligned exactness over the randomized corpus.
TEST(Properties, RectIntersectionMatchesIntervalOverlap) {
  Rng rng(303);
  for (std::size_t l : {1u, 2u, 3u, 5u}) {
    for (int i = 0; i < 2500; ++i) {
      HyperRect q = testutil::random_rect(rng, l);
      HyperRect r = testutil::random_rect(rng, l);
      bool expected = q.intersects(r);
      bool got = are_rects_inter(anchors_for_rect(q, 0.5), r);
      EXPECT_EQ(got, expected);
      if (expected) EXPECT_TRUE(got);  // never a false negative
    }
  }
}

TEST(Properties, DeltaInvariance) {
  Rng rng(404);
  for (int i = 0; i < 300; ++i) {
    HyperRect q = testutil::random_rect(rng, 3);
    HyperRect r = testutil::random_rect(rng, 3);
    bool d1 = are_rects_inter(anchors_for_rect(q, 0.01), r);
    bool d2 = are_rects_inter(anchors_for_rect(q, 0.5), r);
    bool d3 = are_rects_inter(anchors_for_rect(q, 10.0), r);
    EXPECT_EQ(d1, d2);
    EXPECT_EQ(d2, d3);
  }
}

TEST(Validation, BadInputs) {
  EXPECT_THROW(anchors_for_rect({Point{1, 0}, Point{0, 1}}, 0.5), std::invalid_argument);
  EXPECT_THROW(anchors_for_rect({Point{0, 0}, Point{1, 1}}, 0.0), std::invalid_argument);
  EXPECT_THROW(anchors_for_rect({Point{0, 0}, Point{1, 1}}, -1.0), std::invalid_argument);
}
