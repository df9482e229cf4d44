#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "ptseg/config.hpp"
#include "ptseg/error.hpp"
#include "ptseg/types.hpp"

using namespace ptseg;

TEST(Bundle, StartFrameHoldsQueriesAndIsFixed) {
  std::vector<LabeledPoint> q{{1.5, 2.5, PointLabel::positive, ObjectId{1}},
                              {3.5, 0.5, PointLabel::negative, ObjectId{1}}};
  TrajectoryBundle b(4, 3, q);
  EXPECT_EQ(b.end_frame(), 6);
  EXPECT_TRUE(b.covers(4));
  EXPECT_FALSE(b.covers(7));
  EXPECT_EQ(b.points_at(4), q);
  EXPECT_EQ(b.occlusion(4, 0), 0.0);
  // Untouched frames copy the queries.
  EXPECT_EQ(b.position(6, 1), (Point2{3.5, 0.5}));
  EXPECT_THROW(b.set(4, 0, {0, 0}, 0.0), Error);
  EXPECT_THROW(b.set(5, 0, {0, 0}, 1.5), Error);
  EXPECT_THROW(b.set(7, 0, {0, 0}, 0.0), Error);
  EXPECT_THROW(b.set(5, 2, {0, 0}, 0.0), Error);
  b.set(5, 1, {9.0, 8.0}, 0.75);
  EXPECT_EQ(b.position(5, 1), (Point2{9.0, 8.0}));
  EXPECT_EQ(b.occlusion_at(5), (std::vector<double>{0.0, 0.75}));
  EXPECT_EQ(b.points_at(5)[1].label, PointLabel::negative);
}

TEST(Bundle, RejectsBadShape) {
  EXPECT_THROW(TrajectoryBundle(-1, 2, {}), Error);
  EXPECT_THROW(TrajectoryBundle(0, 0, {}), Error);
}

TEST(QueryPoints, Counts) {
  QueryPointSet s;
  s.points = {{0, 0, PointLabel::positive, {}}, {0, 0, PointLabel::negative, {}},
              {0, 0, PointLabel::positive, {}}};
  EXPECT_EQ(s.positive_count(), 2u);
  EXPECT_EQ(s.negative_count(), 1u);
}

TEST(Config, JsonRoundTrip) {
  PipelineConfig c;
  c.psm = PointSelection::mixed;
  c.positive_per_mask = 5;
  c.refinement_iterations = 3;
  c.patch_similarity_threshold = 0.25;
  c.reinit = ReinitVariant::similar_area_synced;
  c.horizon = 11;
  c.rng_seed = 77;
  c.multi_object_negatives = false;
  const nlohmann::json j = c;
  EXPECT_EQ(j.at("reinit"), "D");
  const auto back = j.get<PipelineConfig>();
  EXPECT_EQ(back.psm, c.psm);
  EXPECT_EQ(back.positive_per_mask, 5);
  EXPECT_EQ(back.refinement_iterations, 3);
  EXPECT_EQ(back.patch_similarity_threshold, 0.25);
  EXPECT_EQ(back.reinit, ReinitVariant::similar_area_synced);
  EXPECT_EQ(back.horizon, 11);
  EXPECT_EQ(back.rng_seed, 77u);
  EXPECT_FALSE(back.multi_object_negatives);
}

TEST(Config, DefaultsFillMissingKeys) {
  const auto c = nlohmann::json::object().get<PipelineConfig>();
  EXPECT_EQ(c.positive_per_mask, 8);
  EXPECT_EQ(c.negative_per_mask, 1);
  EXPECT_EQ(c.refinement_iterations, 12);
  EXPECT_EQ(c.reinit, ReinitVariant::off);
  EXPECT_FALSE(c.patch_similarity_threshold);
}

TEST(Config, RejectsInvalidValues) {
  const auto parse = [](const char* text) { return nlohmann::json::parse(text).get<PipelineConfig>(); };
  for (const char* bad : {R"({"positive_per_mask": 0})", R"({"negative_per_mask": -1})",
                          R"({"refinement_iterations": -2})", R"({"horizon": 0})",
                          R"({"occlusion_threshold": 1.5})", R"({"psm": "grid"})",
                          R"({"reinit": "E"})", R"({"patch_similarity_threshold": 0})",
                          R"({"reinit": "A", "negative_per_mask": 0})", R"({"horizon": "x"})",
                          R"([1, 2])"}) {
    try {
      parse(bad);
      ADD_FAILURE() << "accepted " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_input) << bad;
    }
  }
}

TEST(Config, VariantNames) {
  EXPECT_EQ(reinit_variant_from_string("fixed_horizon"), ReinitVariant::fixed_horizon);
  EXPECT_EQ(reinit_variant_from_string("B"), ReinitVariant::mean_area);
  EXPECT_EQ(reinit_variant_from_string("none"), ReinitVariant::off);
  EXPECT_EQ(point_selection_from_string("shi-tomasi"), PointSelection::shi_tomasi);
  EXPECT_EQ(point_selection_from_string(to_string(PointSelection::random)), PointSelection::random);
}

TEST(Errors, KindNamesRoundTrip) {
  for (auto k : {ErrorKind::invalid_input, ErrorKind::empty_mask, ErrorKind::transport,
                 ErrorKind::protocol, ErrorKind::unsupported_capability, ErrorKind::invalid_dataset,
                 ErrorKind::not_found, ErrorKind::precondition}) {
    EXPECT_EQ(error_kind_from_string(to_string(k)), k);
  }
  try {
    fail(ErrorKind::empty_mask, "nothing");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_mask);
    EXPECT_STREQ(e.what(), "nothing");
  }
}
