#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "oracles.hpp"
#include "ptseg/metrics.hpp"
#include "support.hpp"

using namespace ptseg;
using ptseg::test::random_mask;
using ptseg::test::rect_mask;

namespace {

BinaryMask mask_from_bits(int w, int h, unsigned bits) {
  BinaryMask m(w, h);
  for (int i = 0; i < w * h; ++i) {
    if (bits & (1u << i)) m.set(i % w, i / w);
  }
  return m;
}

}  // namespace

TEST(RegionJ, MatchesSetCounts) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_mask(rng, 11, 9, 0.1 * (trial % 10));
    const auto b = random_mask(rng, 11, 9, 0.1 * ((trial / 10) % 10));
    EXPECT_EQ(region_j(a, b), ptseg::oracle::iou(a, b));
  }
}

TEST(RegionJ, EmptyPairScoresOne) {
  EXPECT_EQ(region_j(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
  EXPECT_EQ(region_j(rect_mask(4, 4, 0, 0, 1, 1), BinaryMask(4, 4)), 0.0);
}

TEST(Boundary, MatchesShiftedArrayReference) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 12);
    const int h = 1 + static_cast<int>(rng() % 12);
    const auto m = random_mask(rng, w, h, 0.5);
    const auto got = boundary_map(m);
    const auto want = ptseg::oracle::seg2bmap(ptseg::oracle::to_grid(m));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) EXPECT_EQ(got.test(x, y), want[y][x] == 1) << x << "," << y;
    }
  }
}

TEST(Boundary, FullMaskHasNone) {
  EXPECT_TRUE(boundary_map(rect_mask(6, 5, 0, 0, 6, 5)).is_empty());
}

TEST(Tolerance, IsCeilOfScaledDiagonal) {
  EXPECT_EQ(default_boundary_tolerance(854, 480), 8);
  for (int w : {10, 64, 100, 333, 1920}) {
    for (int h : {7, 48, 240, 1080}) EXPECT_EQ(default_boundary_tolerance(w, h), ptseg::oracle::tolerance(w, h));
  }
}

TEST(ContourF, ExhaustiveSmallPairsMatchReference) {
  // Every pair of 3x2 masks at tolerances 0 and 1.
  for (int tol : {0, 1}) {
    for (unsigned a = 0; a < 64; ++a) {
      for (unsigned b = 0; b < 64; ++b) {
        const auto pa = mask_from_bits(3, 2, a);
        const auto pb = mask_from_bits(3, 2, b);
        const auto got = contour_score(pa, pb, tol);
        const auto want = ptseg::oracle::contour(pa, pb, tol);
        ASSERT_NEAR(got.precision, want.precision, 1e-12) << a << " " << b;
        ASSERT_NEAR(got.recall, want.recall, 1e-12) << a << " " << b;
        ASSERT_NEAR(got.f, want.f, 1e-12) << a << " " << b;
      }
    }
  }
}

TEST(ContourF, RandomPairsMatchReference) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 4 + static_cast<int>(rng() % 20);
    const int h = 4 + static_cast<int>(rng() % 20);
    const int tol = static_cast<int>(rng() % 4);
    BinaryMask a;
    BinaryMask b;
    if (trial % 2 == 0) {
      a = random_mask(rng, w, h, 0.3);
      b = random_mask(rng, w, h, 0.3);
    } else {
      const int x0 = static_cast<int>(rng() % (w / 2));
      const int y0 = static_cast<int>(rng() % (h / 2));
      a = rect_mask(w, h, x0, y0, x0 + w / 2, y0 + h / 2);
      b = ptseg::test::disk_mask(w, h, w / 2.0, h / 2.0, std::min(w, h) / 3.0);
    }
    const auto got = contour_score(a, b, tol);
    const auto want = ptseg::oracle::contour(a, b, tol);
    EXPECT_NEAR(got.precision, want.precision, 1e-12);
    EXPECT_NEAR(got.recall, want.recall, 1e-12);
    EXPECT_NEAR(got.f, want.f, 1e-12);
    EXPECT_EQ(contour_f(a, b, tol), got.f);
  }
}

TEST(ContourF, EmptyCases) {
  const BinaryMask empty(8, 8);
  const auto box = rect_mask(8, 8, 2, 2, 6, 6);
  const auto both = contour_score(empty, empty, 1);
  EXPECT_EQ(both.f, 1.0);
  const auto miss = contour_score(empty, box, 1);
  EXPECT_EQ(miss.f, 0.0);
  EXPECT_EQ(miss.precision, 1.0);
  EXPECT_EQ(miss.recall, 0.0);
  EXPECT_EQ(contour_score(box, box, 0).f, 1.0);
}

TEST(ContourF, ShiftWithinToleranceIsPerfect) {
  const auto a = rect_mask(40, 40, 10, 10, 25, 25);
  const auto b = rect_mask(40, 40, 12, 10, 27, 25);
  EXPECT_EQ(contour_f(a, b, 2), 1.0);
  EXPECT_LT(contour_f(a, b, 1), 1.0);
}

TEST(Buckets, Boundaries) {
  EXPECT_EQ(visibility_bucket(1), VisibilityBucket::short_span);
  EXPECT_EQ(visibility_bucket(5), VisibilityBucket::short_span);
  EXPECT_EQ(visibility_bucket(6), VisibilityBucket::medium_span);
  EXPECT_EQ(visibility_bucket(30), VisibilityBucket::medium_span);
  EXPECT_EQ(visibility_bucket(31), VisibilityBucket::long_span);
}

TEST(ScoreSequence, SkipsFirstVisibleFrameAndZeroesMissing) {
  const int w = 16;
  const int h = 16;
  const BinaryMask empty(w, h);
  const auto box = rect_mask(w, h, 4, 4, 10, 10);
  const auto off = rect_mask(w, h, 5, 4, 11, 10);
  ObjectMasks gt;
  gt[ObjectId{1}] = {empty, box, box, box, box};
  ObjectMasks pred;
  // Frame 1 is the first visible one and is never scored, so a bad mask there is harmless.
  pred[ObjectId{1}] = {empty, empty, box, off, BinaryMask()};
  const auto s = score_sequence("seq", pred, gt, 1);
  ASSERT_EQ(s.objects.size(), 1u);
  const auto& o = s.objects[0];
  EXPECT_EQ(o.first_frame, 1);
  EXPECT_EQ(o.frames, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(o.missing_frames, (std::vector<int>{4}));
  EXPECT_EQ(o.visible_frames, 4);
  const double j3 = ptseg::oracle::iou(off, box);
  const double f3 = ptseg::oracle::contour(off, box, 1).f;
  EXPECT_DOUBLE_EQ(o.mean_j, (1.0 + j3 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(o.mean_f, (1.0 + f3 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(s.jf, (o.mean_j + o.mean_f) / 2.0);
}

TEST(ScoreSequence, IgnoresPredictionOnlyObjectsAndNeverVisible) {
  const BinaryMask empty(8, 8);
  const auto box = rect_mask(8, 8, 1, 1, 4, 4);
  ObjectMasks gt;
  gt[ObjectId{1}] = {box, box};
  gt[ObjectId{2}] = {empty, empty};
  ObjectMasks pred;
  pred[ObjectId{1}] = {box, box};
  pred[ObjectId{9}] = {box, box};
  const auto s = score_sequence("s", pred, gt);
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.jf, 1.0);
}

TEST(Aggregate, AveragesScoredObjectsAndBuckets) {
  const auto box = rect_mask(8, 8, 1, 1, 4, 4);
  const BinaryMask empty(8, 8);
  ObjectMasks gt;
  gt[ObjectId{1}] = {box, box, box};
  gt[ObjectId{2}] = {box};  // one frame: unscored
  ObjectMasks pred;
  pred[ObjectId{1}] = {box, box, empty};
  const auto d = aggregate({score_sequence("a", pred, gt, 1), score_sequence("b", gt, gt, 1)});
  EXPECT_DOUBLE_EQ(d.mean_j, 0.75);
  EXPECT_DOUBLE_EQ(d.mean_f, 0.75);
  ASSERT_EQ(d.buckets.size(), 1u);
  EXPECT_EQ(d.buckets.at(VisibilityBucket::short_span).objects, 2);
  nlohmann::json j = d;
  EXPECT_TRUE(j.contains("sequences"));
}
