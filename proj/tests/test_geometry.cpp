#include <gtest/gtest.h>

#include "psd/geometry.hpp"

using namespace psd;

TEST(Contains, LowerBoundaryClosed) { EXPECT_TRUE(contains({0, 0, 1, 1}, {0, 0})); }

TEST(Contains, UpperBoundaryOpen) {
  EXPECT_FALSE(contains({0, 0, 1, 1}, {1, 0.5}));
  EXPECT_FALSE(contains({0, 0, 1, 1}, {0.5, 1}));
}

TEST(Contains, Interior) { EXPECT_TRUE(contains({0, 0, 2, 2}, {1.5, 1.5})); }

TEST(Relation, Contained) { EXPECT_EQ(relation({0, 0, 4, 4}, {1, 1, 2, 2}), Relation::AContainsB); }

TEST(Relation, Disjoint) { EXPECT_EQ(relation({0, 0, 1, 1}, {2, 2, 3, 3}), Relation::Disjoint); }

TEST(Relation, Partial) { EXPECT_EQ(relation({0, 0, 2, 2}, {1, 1, 3, 3}), Relation::PartialOverlap); }

TEST(Relation, SharedEdgeIsDisjoint) {
  EXPECT_EQ(relation({0, 0, 1, 1}, {1, 0, 2, 1}), Relation::Disjoint);
  EXPECT_EQ(relation({0, 0, 1, 1}, {0, 1, 1, 2}), Relation::Disjoint);
}

TEST(Relation, EqualRectanglesContain) {
  EXPECT_EQ(relation({0, 0, 1, 1}, {0, 0, 1, 1}), Relation::AContainsB);
}

TEST(Relation, EmptyRegionNeverContained) {
  EXPECT_EQ(relation({0, 0, 4, 4}, {1, 1, 1, 1}), Relation::Disjoint);
}

TEST(Relation, BContainsAIsPartial) {
  EXPECT_EQ(relation({1, 1, 2, 2}, {0, 0, 4, 4}), Relation::PartialOverlap);
}

TEST(OverlapFraction, ExactHalf) { EXPECT_DOUBLE_EQ(overlap_fraction({0, 0, 2, 2}, {0, 0, 1, 2}), 0.5); }

TEST(OverlapFraction, Identity) { EXPECT_DOUBLE_EQ(overlap_fraction({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0); }

TEST(OverlapFraction, AreaArithmetic) {
  EXPECT_DOUBLE_EQ(overlap_fraction({0, 0, 4, 4}, {1, 1, 2, 3}), 0.125);
}

TEST(OverlapFraction, DisjointIsZero) { EXPECT_EQ(overlap_fraction({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0); }

TEST(OverlapFraction, ZeroAreaLeafThrows) {
  EXPECT_THROW(overlap_fraction({0, 0, 0, 1}, {0, 0, 1, 1}), DegenerateRegion);
}

TEST(Rect, SplitHalves) {
  const Rect r{0, 0, 4, 2};
  EXPECT_EQ(r.lower(Axis::X, 1), (Rect{0, 0, 1, 2}));
  EXPECT_EQ(r.upper(Axis::X, 1), (Rect{1, 0, 4, 2}));
  EXPECT_EQ(r.lower(Axis::Y, 0.5), (Rect{0, 0, 4, 0.5}));
  EXPECT_EQ(r.upper(Axis::Y, 0.5), (Rect{0, 0.5, 4, 2}));
}

TEST(Rect, IntersectAndHull) {
  EXPECT_EQ(intersect({0, 0, 2, 2}, {1, 1, 3, 3}), (Rect{1, 1, 2, 2}));
  EXPECT_TRUE(intersect({0, 0, 1, 1}, {2, 2, 3, 3}).empty());
  EXPECT_TRUE(intersect({0, 0, 1, 1}, {2, 2, 3, 3}).valid());
  EXPECT_EQ(hull({0, 0, 1, 1}, {2, 2, 3, 3}), (Rect{0, 0, 3, 3}));
}
