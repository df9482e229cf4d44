#include <gtest/gtest.h>

#include <random>

#include "ptseg/backend.hpp"
#include "ptseg/error.hpp"
#include "ptseg/synthetic.hpp"
#include "support.hpp"

using namespace ptseg;
using ptseg::test::rect_mask;

namespace {

/// Moves every point by a fixed velocity per frame and records clip sizes.
class DriftTracker final : public TrackerBackend {
 public:
  explicit DriftTracker(std::optional<int> window) : window_(window) {}
  TrackerCapabilities capabilities() const override { return {true, window_}; }
  TrajectoryBundle track(std::span<const LabeledPoint> queries,
                         std::span<const Frame> frames) override {
    clips.push_back({frames.front().index(), static_cast<int>(frames.size())});
    TrajectoryBundle b(frames.front().index(), static_cast<int>(frames.size()),
                       {queries.begin(), queries.end()});
    for (std::size_t t = 1; t < frames.size(); ++t) {
      for (int i = 0; i < b.num_points(); ++i) {
        const auto q = queries[i];
        b.set(frames[t].index(), i, {q.x + 1.0 * t, q.y + 0.5 * t},
              (frames[t].index() % 3 == 0) ? 1.0 : 0.0);
      }
    }
    return b;
  }
  std::vector<std::pair<int, int>> clips;

 private:
  std::optional<int> window_;
};

/// Returns a bundle of the wrong length.
class BrokenTracker final : public TrackerBackend {
 public:
  TrackerCapabilities capabilities() const override { return {}; }
  TrajectoryBundle track(std::span<const LabeledPoint> queries,
                         std::span<const Frame> frames) override {
    return TrajectoryBundle(frames.front().index(), static_cast<int>(frames.size()) + 1,
                            {queries.begin(), queries.end()});
  }
};

std::vector<Frame> clip(int first, int n, int w = 64, int h = 32) {
  std::vector<Frame> out;
  for (int i = 0; i < n; ++i) out.push_back(Frame::filled(first + i, w, h, {0, 0, 0}));
  return out;
}

const std::vector<LabeledPoint> kQueries{{2.5, 3.5, PointLabel::positive, ObjectId{1}},
                                         {10.25, 1.0, PointLabel::negative, ObjectId{1}}};

}  // namespace

TEST(TrackPoints, WindowedStitchingEqualsWholeClip) {
  const auto frames = clip(5, 12);
  DriftTracker whole(std::nullopt);
  const auto expected = track_points(whole, kQueries, frames);
  EXPECT_EQ(whole.clips.size(), 1u);
  for (int window : {2, 3, 4, 5, 11}) {
    DriftTracker windowed(window);
    EXPECT_EQ(track_points(windowed, kQueries, frames), expected) << "window " << window;
    // Consecutive windows share one frame.
    int next = 5;
    for (const auto& [start, len] : windowed.clips) {
      EXPECT_EQ(start, next);
      EXPECT_LE(len, window);
      next = start + len - 1;
    }
    EXPECT_EQ(next, 16);
    const int steps = 11;
    EXPECT_EQ(windowed.clips.size(), static_cast<std::size_t>((steps + window - 2) / (window - 1)));
  }
}

TEST(TrackPoints, WindowAtLeastClipIsOneCall) {
  DriftTracker t(12);
  track_points(t, kQueries, clip(0, 12));
  EXPECT_EQ(t.clips.size(), 1u);
}

TEST(TrackPoints, OracleWindowedMatchesWholeClip) {
  const auto spec = three_shapes_scene();
  auto moving = spec;
  for (auto& s : moving.shapes) {
    s.motion.kind = MotionKind::linear;
    s.motion.velocity = {0.5, 0.25};
  }
  moving.duration = 16;
  const auto video = render(moving);
  const auto mask = video.ground_truth.begin()->second.front();
  const auto px = mask.pixels();
  std::vector<LabeledPoint> q{{px[px.size() / 2].x + 0.5, px[px.size() / 2].y + 0.5,
                               PointLabel::positive, ObjectId{1}}};
  OracleTracker whole(moving);
  OracleTracker windowed(moving, 5);
  const auto a = track_points(whole, q, video.frames);
  const auto b = track_points(windowed, q, video.frames);
  for (int t = 0; t < 16; ++t) {
    EXPECT_NEAR(a.position(t, 0).x, b.position(t, 0).x, 1e-9);
    EXPECT_NEAR(a.position(t, 0).y, b.position(t, 0).y, 1e-9);
    EXPECT_EQ(a.occlusion(t, 0), b.occlusion(t, 0));
  }
}

TEST(TrackRequest, Validation) {
  DriftTracker t(std::nullopt);
  EXPECT_THROW(track_points(t, {}, clip(0, 3)), Error);
  EXPECT_THROW(track_points(t, kQueries, {}), Error);
  auto gap = clip(0, 3);
  gap[2] = gap[2].with_index(7);
  EXPECT_THROW(track_points(t, kQueries, gap), Error);
  const std::vector<LabeledPoint> outside{{64.0, 1.0, PointLabel::positive, ObjectId{1}}};
  EXPECT_THROW(track_points(t, outside, clip(0, 3)), Error);
}

TEST(TrackResponse, WrongShapeIsProtocolError) {
  BrokenTracker t;
  try {
    track_points(t, kQueries, clip(0, 3));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
  }
}

TEST(Proposals, SortedDedupedAndTruncated) {
  const int w = 20;
  std::vector<BinaryMask> in{
      rect_mask(w, w, 0, 0, 5, 5),     // 25
      BinaryMask(w, w),                // empty
      rect_mask(w, w, 0, 0, 10, 10),   // 100
      rect_mask(w, w, 0, 0, 10, 9),    // 90, IoU 0.9 with the 100: kept
      rect_mask(w, w, 0, 0, 10, 10),   // duplicate
      rect_mask(w, w, 10, 10, 20, 13)  // 30
  };
  const auto out = normalize_proposals(in, 10);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].area(), 100u);
  EXPECT_EQ(out[1].area(), 90u);
  EXPECT_EQ(out[2].area(), 30u);
  EXPECT_EQ(out[3].area(), 25u);
  EXPECT_EQ(normalize_proposals(in, 2).size(), 2u);
  EXPECT_THROW(normalize_proposals(in, 0), Error);
}

TEST(Proposals, DefaultSegmenterDoesNotPropose) {
  class Plain final : public SegmenterBackend {
   public:
    SegmenterCapabilities capabilities() const override { return {}; }
    MaskPrediction segment(const Frame& f, std::span<const LabeledPoint>,
                           std::optional<PriorHandle>) override {
      return {BinaryMask(f.width(), f.height()), std::nullopt, {}, f.index()};
    }
  } plain;
  try {
    plain.propose_masks(Frame::filled(0, 2, 2, {}), 3);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported_capability);
  }
}
