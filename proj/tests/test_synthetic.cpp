#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"
#include "ptseg/synthetic.hpp"
#include "support.hpp"

using namespace ptseg;
using ptseg::test::disk_mask;
using ptseg::test::rect_mask;

namespace {

LabeledPoint pos(double x, double y, std::uint32_t obj = 1) {
  return {x, y, PointLabel::positive, ObjectId{obj}};
}
LabeledPoint neg(double x, double y, std::uint32_t obj = 1) {
  return {x, y, PointLabel::negative, ObjectId{obj}};
}

}  // namespace

TEST(Motion, ClosedForms) {
  Motion m;
  m.origin = {10, 20};
  EXPECT_EQ(m.at(5), (Point2{10, 20}));
  m.kind = MotionKind::linear;
  m.velocity = {1.5, -2};
  EXPECT_EQ(m.at(4), (Point2{16, 12}));
  m.kind = MotionKind::sinusoidal;
  m.amplitude = {3, 0};
  m.period = 8;
  m.phase = 0;
  EXPECT_NEAR(m.at(2).x, 13.0, 1e-12);
  EXPECT_NEAR(m.at(6).x, 7.0, 1e-12);
}

TEST(Render, ShapesRasterizeAtPixelCenters) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  ASSERT_EQ(video.num_frames(), 8);
  ASSERT_EQ(video.ground_truth.size(), 3u);
  const auto& disk = video.ground_truth.at(ObjectId{1});
  EXPECT_EQ(disk[0], disk_mask(96, 96, 24, 24, 12));
  // Rect centered at (68, 28), 30x20: pixels with centers in [53, 83) x [18, 38).
  EXPECT_EQ(video.ground_truth.at(ObjectId{2})[3], rect_mask(96, 96, 53, 18, 83, 38));
  const auto& tri = video.ground_truth.at(ObjectId{3})[0];
  EXPECT_GT(tri.area(), 300u);
  EXPECT_TRUE(tri.test(48, 70));
  EXPECT_FALSE(tri.test(33, 60));
  // Colors follow the topmost layer.
  EXPECT_EQ(video.frames[0].at(24, 24), spec.shapes[0].color);
  EXPECT_EQ(video.frames[0].at(0, 0), spec.background);
}

TEST(Render, OccludersHideDeeperLayers) {
  const auto video = render(vanish_scene());
  const auto& gt = video.ground_truth.at(ObjectId{1});
  for (int t = 0; t < 12; ++t) {
    // Disk centered at (56 + t/2, 64), radius 14, nothing in front yet.
    EXPECT_EQ(gt[t], disk_mask(128, 128, 56 + 0.5 * t, 64, 14)) << t;
  }
  for (int t = 12; t < 24; ++t) EXPECT_TRUE(gt[t].is_empty()) << t;
}

TEST(Render, RevealSceneHalves) {
  const auto video = render(reveal_scene());
  const auto& gt = video.ground_truth.at(ObjectId{1});
  const auto full = rect_mask(128, 128, 40, 48, 88, 80);
  const auto left = rect_mask(128, 128, 40, 48, 64, 80);
  const auto right = rect_mask(128, 128, 64, 48, 88, 80);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(gt[t], left) << t;
  for (int t = 10; t < 18; ++t) EXPECT_EQ(gt[t], full) << t;
  for (int t = 18; t < 24; ++t) EXPECT_EQ(gt[t], right) << t;
}

TEST(Suite, TenScenesWithHiddenCentres) {
  const auto suite = synthetic_suite();
  ASSERT_EQ(suite.size(), 10u);
  for (const auto& spec : suite) {
    EXPECT_EQ(spec.width, 128);
    EXPECT_EQ(spec.height, 128);
    EXPECT_EQ(spec.duration, 24);
    EXPECT_GE(spec.shapes.size(), 1u);
    EXPECT_LE(spec.shapes.size(), 3u);
    const SceneGeometry geo(spec);
    const auto video = render(spec);
    for (const auto& shape : spec.shapes) {
      const auto layer = *geo.layer_of_object(ObjectId{shape.id});
      int hidden = 0;
      for (int t = 0; t < spec.duration; ++t) {
        const auto c = shape.motion.at(t);
        if (geo.covered_above(c, t, shape.depth)) {
          ++hidden;
          EXPECT_GE(4 * geo.visible_mask(layer, t).area(), geo.raw_mask(layer, t).area())
              << spec.name << " object " << shape.id << " frame " << t;
        }
      }
      EXPECT_GT(hidden, 0) << spec.name << " object " << shape.id;
      EXPECT_FALSE(video.ground_truth.at(ObjectId{shape.id})[0].is_empty());
    }
  }
}

TEST(Scene, JsonAndFileRoundTrip) {
  auto spec = suite_scene(3, {1.0, 0.5, 0.1, 0.01}, 42);
  const nlohmann::json j = spec;
  const auto back = j.get<SceneSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  ptseg::test::TempDir dir;
  save_scene(spec, (dir.path() / "s.json").string());
  EXPECT_EQ(nlohmann::json(load_scene((dir.path() / "s.json").string())), j);
  EXPECT_EQ(render(back).frames, render(spec).frames);
}

TEST(Scene, ValidationRejectsBadSpecs) {
  auto dup_id = three_shapes_scene();
  dup_id.shapes[1].id = 1;
  EXPECT_THROW(dup_id.validate(), Error);
  auto dup_depth = three_shapes_scene();
  dup_depth.shapes[1].depth = 1;
  EXPECT_THROW(dup_depth.validate(), Error);
  auto zero = three_shapes_scene();
  zero.shapes[0].radius = 0;
  EXPECT_THROW(zero.validate(), Error);
  auto canvas = three_shapes_scene();
  canvas.width = 0;
  EXPECT_THROW(canvas.validate(), Error);
  auto noise = three_shapes_scene();
  noise.noise.mask_flip_prob = 2;
  EXPECT_THROW(noise.validate(), Error);
}

TEST(OracleTracker, FollowsMotionAndReportsOcclusion) {
  const auto spec = vanish_scene();
  const auto video = render(spec);
  OracleTracker tracker(spec);
  const std::vector<LabeledPoint> q{pos(56.5, 64.5), neg(5.5, 5.5)};
  const auto b = tracker.track(q, video.frames);
  for (int t = 0; t < 24; ++t) {
    EXPECT_DOUBLE_EQ(b.position(t, 0).x, 56.5 + 0.5 * t);
    EXPECT_DOUBLE_EQ(b.position(t, 0).y, 64.5);
    EXPECT_EQ(b.occlusion(t, 0), t >= 12 ? 1.0 : 0.0) << t;
    EXPECT_EQ(b.position(t, 1), (Point2{5.5, 5.5}));
    EXPECT_EQ(b.occlusion(t, 1), 0.0);
  }
  // Starting mid-clip keeps the query on the start frame.
  std::span<const Frame> tail(video.frames.data() + 5, 4);
  const std::vector<LabeledPoint> q5{pos(59.0, 64.0)};
  const auto c = tracker.track(q5, tail);
  EXPECT_EQ(c.start_frame(), 5);
  EXPECT_DOUBLE_EQ(c.position(8, 0).x, 60.5);
}

TEST(OracleTracker, JitterIsSeededAndLeavesTheQueryFrame) {
  const auto spec = three_shapes_scene();
  auto noisy = spec;
  noisy.noise.point_jitter_sigma = 1.0;
  noisy.seed = 9;
  const auto video = render(spec);
  const std::vector<LabeledPoint> q{pos(24.5, 24.5)};
  OracleTracker a(noisy);
  OracleTracker b(noisy);
  const auto ba = a.track(q, video.frames);
  EXPECT_EQ(ba, b.track(q, video.frames));
  EXPECT_EQ(ba.position(0, 0), (Point2{24.5, 24.5}));
  double sq = 0;
  for (int t = 1; t < 8; ++t) {
    const double dx = ba.position(t, 0).x - 24.5;
    const double dy = ba.position(t, 0).y - 24.5;
    sq += dx * dx + dy * dy;
  }
  EXPECT_GT(sq, 0.0);
  EXPECT_LT(sq / 14.0, 9.0);
}

TEST(OracleSegmenter, PositivesSelectTheVisibleLayer) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  OracleSegmenter seg(spec);
  const std::vector<LabeledPoint> pts{pos(24.5, 24.5)};
  const auto p = seg.segment(video.frames[2], pts, std::nullopt);
  EXPECT_EQ(p.mask, video.ground_truth.at(ObjectId{1})[2]);
  EXPECT_EQ(p.frame, 2);
  EXPECT_TRUE(p.dense_prior);
  // Majority vote over positive points.
  const std::vector<LabeledPoint> vote{pos(68.5, 28.5), pos(60.5, 30.5), pos(24.5, 24.5)};
  EXPECT_EQ(seg.segment(video.frames[0], vote, std::nullopt).mask, video.ground_truth.at(ObjectId{2})[0]);
  // Background and negative-only prompts give nothing.
  const std::vector<LabeledPoint> bg{pos(1.5, 1.5), neg(24.5, 24.5)};
  EXPECT_TRUE(seg.segment(video.frames[0], bg, std::nullopt).mask.is_empty());
}

TEST(OracleSegmenter, TiesGoToThePriorThenTheEarliestPoint) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  OracleSegmenter seg(spec);
  const auto& disk = video.ground_truth.at(ObjectId{1})[0];
  const auto& rect = video.ground_truth.at(ObjectId{2})[0];
  const std::vector<LabeledPoint> tie{pos(24.5, 24.5), pos(68.5, 28.5)};
  EXPECT_EQ(seg.segment(video.frames[0], tie, std::nullopt).mask, disk);
  const std::vector<LabeledPoint> only_rect{pos(68.5, 28.5)};
  const auto prior = seg.segment(video.frames[0], only_rect, std::nullopt).dense_prior;
  EXPECT_EQ(seg.segment(video.frames[0], tie, prior).mask, rect);
}

TEST(OracleSegmenter, NegativeOnAnotherLayerRemovesIt) {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  ShapeSpec back;
  back.id = 1;
  back.kind = ShapeKind::rect;
  back.width = 40;
  back.height = 40;
  back.depth = 1;
  back.color = {200, 0, 0};
  back.motion.origin = {32, 32};
  ShapeSpec front = back;
  front.id = 2;
  front.width = 10;
  front.height = 10;
  front.depth = 2;
  front.color = {0, 200, 0};
  spec.shapes = {back, front};
  const auto video = render(spec);
  OracleSegmenter seg(spec);
  const std::vector<LabeledPoint> pts{pos(15.5, 15.5), neg(32.5, 32.5)};
  const auto m = seg.segment(video.frames[0], pts, std::nullopt).mask;
  EXPECT_EQ(m, video.ground_truth.at(ObjectId{1})[0]);
  EXPECT_EQ(intersection_area(m, video.ground_truth.at(ObjectId{2})[0]), 0u);
}

TEST(OracleSegmenter, NoiseIsDeterministicPerFrameAndLayer) {
  auto spec = three_shapes_scene();
  spec.noise.boundary_dilation_px = 1.0;
  spec.noise.mask_flip_prob = 0.02;
  spec.seed = 4;
  const auto video = render(spec);
  OracleSegmenter a(spec);
  OracleSegmenter b(spec);
  const std::vector<LabeledPoint> pts{pos(24.5, 24.5)};
  const auto ma = a.segment(video.frames[1], pts, std::nullopt).mask;
  EXPECT_EQ(ma, a.segment(video.frames[1], pts, std::nullopt).mask);
  EXPECT_EQ(ma, b.segment(video.frames[1], pts, std::nullopt).mask);
  EXPECT_NE(ma, video.ground_truth.at(ObjectId{1})[1]);
  // Dilation by one pixel at least covers the clean mask minus flips.
  const auto clean = video.ground_truth.at(ObjectId{1})[1];
  EXPECT_GT(intersection_area(ma, clean), clean.area() * 9 / 10);
}

TEST(OracleSegmenter, RejectsForeignPriorsAndFrames) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  OracleSegmenter seg(spec);
  const std::vector<LabeledPoint> pts{pos(24.5, 24.5)};
  try {
    seg.segment(video.frames[0], pts, PriorHandle{12345});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
  }
  EXPECT_THROW(seg.segment(Frame::filled(0, 10, 10, {}), pts, std::nullopt), Error);
  EXPECT_THROW(seg.segment(Frame::filled(50, 96, 96, {}), pts, std::nullopt), Error);
}

TEST(OracleSegmenter, ProposalsAreVisibleObjectMasks) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  OracleSegmenter seg(spec);
  EXPECT_TRUE(seg.capabilities().proposes_masks);
  const auto props = seg.propose_masks(video.frames[0], 5);
  ASSERT_EQ(props.size(), 3u);
  for (std::size_t i = 1; i < props.size(); ++i) EXPECT_GE(props[i - 1].area(), props[i].area());
  for (const auto& m : props) {
    bool found = false;
    for (const auto& [id, gt] : video.ground_truth) found = found || gt[0] == m;
    EXPECT_TRUE(found);
  }
  EXPECT_EQ(seg.propose_masks(video.frames[0], 1).size(), 1u);
}
