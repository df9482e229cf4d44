#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <jpeglib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "ptseg/datasets.hpp"
#include "ptseg/error.hpp"
#include "ptseg/image_io.hpp"
#include "ptseg/metrics.hpp"
#include "ptseg/synthetic.hpp"
#include "support.hpp"

using namespace ptseg;
namespace fs = std::filesystem;
using ptseg::test::TempDir;

namespace {

void write_jpeg(const fs::path& path, const Frame& f) {
  FILE* out = std::fopen(path.c_str(), "wb");
  ASSERT_NE(out, nullptr);
  jpeg_compress_struct c{};
  jpeg_error_mgr err{};
  c.err = jpeg_std_error(&err);
  jpeg_create_compress(&c);
  jpeg_stdio_dest(&c, out);
  c.image_width = static_cast<JDIMENSION>(f.width());
  c.image_height = static_cast<JDIMENSION>(f.height());
  c.input_components = 3;
  c.in_color_space = JCS_RGB;
  jpeg_set_defaults(&c);
  jpeg_set_quality(&c, 100, TRUE);
  jpeg_start_compress(&c, TRUE);
  const auto px = f.pixels();
  while (c.next_scanline < c.image_height) {
    JSAMPROW row = const_cast<JSAMPLE*>(px.data() + static_cast<std::size_t>(c.next_scanline) * f.width() * 3);
    jpeg_write_scanlines(&c, &row, 1);
  }
  jpeg_finish_compress(&c);
  jpeg_destroy_compress(&c);
  std::fclose(out);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::protocol;
}

}  // namespace

TEST(ImageIo, PngRoundTripIsLossless) {
  std::mt19937_64 rng(1);
  TempDir dir;
  const auto f = ptseg::test::noise_frame(rng, 4, 23, 17);
  write_png((dir.path() / "a.png").string(), f);
  EXPECT_EQ(read_image((dir.path() / "a.png").string(), 4), f);
  EXPECT_EQ(decode_image(encode_png(f), 4), f);
}

TEST(ImageIo, JpegDecodesCloseToTheSource) {
  TempDir dir;
  const auto f = Frame::filled(0, 16, 8, {200, 40, 90});
  write_jpeg(dir.path() / "a.jpg", f);
  const auto g = read_image((dir.path() / "a.jpg").string(), 2);
  EXPECT_EQ(g.index(), 2);
  ASSERT_EQ(g.width(), 16);
  ASSERT_EQ(g.height(), 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 16; ++x) {
      EXPECT_NEAR(g.at(x, y).r, 200, 3);
      EXPECT_NEAR(g.at(x, y).g, 40, 3);
      EXPECT_NEAR(g.at(x, y).b, 90, 3);
    }
  }
}

TEST(ImageIo, IndexedPngRoundTripAndPalette) {
  std::mt19937_64 rng(5);
  LabelMap l(13, 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 13; ++x) l.set(x, y, static_cast<std::uint8_t>(rng() % 256));
  }
  EXPECT_EQ(decode_indexed_png(encode_indexed_png(l)), l);
  const auto& pal = davis_palette();
  EXPECT_EQ(pal[0], (Rgb{0, 0, 0}));
  EXPECT_EQ(pal[1], (Rgb{128, 0, 0}));
  EXPECT_EQ(pal[2], (Rgb{0, 128, 0}));
  EXPECT_EQ(pal[3], (Rgb{128, 128, 0}));
  EXPECT_EQ(pal[4], (Rgb{0, 0, 128}));
}

TEST(ImageIo, NonPaletteAnnotationsAreRejected) {
  TempDir dir;
  write_png((dir.path() / "rgb.png").string(), Frame::filled(0, 4, 4, {1, 1, 1}));
  EXPECT_EQ(kind_of([&] { read_indexed_png((dir.path() / "rgb.png").string()); }),
            ErrorKind::invalid_dataset);
  std::ofstream(dir.path() / "junk.png") << "not a png";
  EXPECT_EQ(kind_of([&] { read_indexed_png((dir.path() / "junk.png").string()); }),
            ErrorKind::invalid_dataset);
  EXPECT_THROW(read_image((dir.path() / "missing.png").string(), 0), Error);
}

TEST(Labels, MasksFromLabelsAndBack) {
  LabelMap a(4, 3);
  a.set(0, 0, 2);
  a.set(1, 1, 5);
  LabelMap b(4, 3);
  b.set(3, 2, 5);
  const auto masks = masks_from_labels({a, b});
  ASSERT_EQ(masks.size(), 2u);
  EXPECT_EQ(masks.at(ObjectId{2})[1].area(), 0u);
  EXPECT_EQ(masks.at(ObjectId{5})[1].area(), 1u);
  EXPECT_EQ(labels_from_masks(masks, 0, 4, 3), a);
  EXPECT_EQ(labels_from_masks(masks, 1, 4, 3), b);
}

TEST(Labels, LaterIdsWinOnOverlap) {
  ObjectMasks m;
  m[ObjectId{1}] = {ptseg::test::rect_mask(4, 4, 0, 0, 3, 3)};
  m[ObjectId{2}] = {ptseg::test::rect_mask(4, 4, 2, 2, 4, 4)};
  const auto l = labels_from_masks(m, 0, 4, 4);
  EXPECT_EQ(l.at(2, 2), 2);
  EXPECT_EQ(l.at(1, 1), 1);
}

TEST(Davis, WriteThenLoadIsExact) {
  TempDir dir;
  auto video = render(suite_scene(2));
  video.id = "seq";
  write_davis_sequence(dir.path(), video);
  const auto dp = load_davis_sequence(dir.path(), "seq");
  EXPECT_EQ(dp.video.frames, video.frames);
  EXPECT_EQ(dp.video.ground_truth, video.ground_truth);
  EXPECT_EQ(dp.frame_stems, default_stems(24));
  ASSERT_EQ(dp.objects.size(), video.ground_truth.size());
  for (const auto& o : dp.objects) {
    EXPECT_EQ(o.seed_mask, video.ground_truth.at(o.id)[o.first_frame]);
    for (int t = 0; t < o.first_frame; ++t) EXPECT_TRUE(video.ground_truth.at(o.id)[t].is_empty());
  }
  EXPECT_FALSE(dp.scene_path);
  EXPECT_EQ(load_davis_dir(dir.path()).size(), 1u);
}

TEST(Davis, MissingAnnotationsAreBackground) {
  TempDir dir;
  auto video = render(three_shapes_scene());
  video.id = "s";
  write_davis_sequence(dir.path(), video);
  fs::remove(dir.path() / "Annotations" / "s" / "00000.png");
  const auto dp = load_davis_sequence(dir.path(), "s");
  for (const auto& o : dp.objects) EXPECT_EQ(o.first_frame, 1);
}

TEST(Davis, Errors) {
  TempDir dir;
  EXPECT_EQ(kind_of([&] { load_davis_dir(dir.path()); }), ErrorKind::invalid_dataset);
  fs::create_directories(dir.path() / "JPEGImages" / "empty");
  EXPECT_EQ(kind_of([&] { load_davis_sequence(dir.path(), "empty"); }), ErrorKind::invalid_dataset);
}

TEST(Davis, LabelPngsRoundTripWithMissingFiles) {
  TempDir dir;
  const auto video = render(three_shapes_scene());
  const auto stems = default_stems(8);
  write_label_pngs(dir.path(), video.ground_truth, stems, 96, 96);
  EXPECT_EQ(read_label_pngs(dir.path(), stems), video.ground_truth);
  fs::remove(dir.path() / "00003.png");
  const auto partial = read_label_pngs(dir.path(), stems);
  EXPECT_EQ(partial.at(ObjectId{1})[3].width(), 0);
}

TEST(Mots, ConversionKeepsTheFirstHundredByAppearance) {
  const auto fx = fixture::mots_fixture();
  const auto conv = convert_mots_sequence(fx.instances, fx.tracks);
  EXPECT_EQ(conv.dropped_flagged, 5);
  EXPECT_EQ(conv.dropped_overflow, 45);
  EXPECT_EQ(conv.dropped_empty, 0);
  ASSERT_EQ(conv.objects.size(), 100u);
  ASSERT_EQ(conv.masks.size(), 100u);
  for (std::size_t k = 0; k < conv.objects.size(); ++k) {
    const auto& o = conv.objects[k];
    EXPECT_EQ(o.id.value, k + 1);
    EXPECT_EQ(o.track_id, fx.expected[k].first);
    EXPECT_EQ(o.first_frame, fx.expected[k].second);
    const auto& m = conv.masks.at(o.id);
    EXPECT_EQ(m[o.first_frame].area(), 4u);
    for (int t = 0; t < o.first_frame; ++t) EXPECT_TRUE(m[t].is_empty());
  }
}

TEST(Mots, RejectsDuplicateValuesAndWarnsOnStrays) {
  auto fx = fixture::mots_fixture(10, 4);
  auto dup = fx.tracks;
  dup[1].value = dup[0].value;
  EXPECT_EQ(kind_of([&] { convert_mots_sequence(fx.instances, dup); }), ErrorKind::invalid_dataset);
  auto missing = fx.tracks;
  missing.pop_back();
  const auto conv = convert_mots_sequence(fx.instances, missing);
  EXPECT_EQ(conv.warnings.size(), 1u);
  auto extra = fx.tracks;
  extra.push_back({200, 9, false, false});
  EXPECT_EQ(convert_mots_sequence(fx.instances, extra).dropped_empty, 1);
  EXPECT_EQ(convert_mots_sequence(fx.instances, fx.tracks, 3).objects.size(), 3u);
}

TEST(Mots, DirectoryConversionLoadsAsDavis) {
  TempDir in;
  TempDir out;
  const auto fx = fixture::mots_fixture();
  fixture::write_mots_fixture(in.path(), "street", fx);
  const auto results = convert_mots(in.path(), out.path());
  ASSERT_EQ(results.size(), 1u);
  const auto dp = load_davis_sequence(out.path(), "street");
  ASSERT_EQ(dp.objects.size(), 100u);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(dp.objects[k].first_frame, fx.expected[k].second);
  std::ifstream meta(out.path() / "Objects" / "street.json");
  const auto j = nlohmann::json::parse(meta);
  EXPECT_EQ(j["objects"].size(), 100u);
  EXPECT_EQ(j["dropped_flagged"], 5);
  EXPECT_EQ(dp.video.frames[0].at(0, 0), (Rgb{0, 0, 0}));
}

TEST(Semisupervised, IdentityAtOriginalAndResizedResolution) {
  const auto spec = three_shapes_scene();
  auto video = render(spec);
  video.id = "shapes";
  const auto dp = datapoint_from_video(video);
  PipelineConfig cfg;
  cfg.refinement_iterations = 1;
  const auto pred = run_semisupervised_sequence(dp, cfg, oracle_backends(spec));
  EXPECT_EQ(score_sequence("shapes", pred.masks, video.ground_truth).jf, 1.0);
  ASSERT_TRUE(pred.run);

  // A failing backend is recorded per sequence rather than thrown.
  const auto failed = run_semisupervised({dp}, cfg, [](const VosDatapoint&) { return BackendPair{}; });
  ASSERT_EQ(failed.size(), 1u);
  EXPECT_TRUE(failed[0].error);
}

TEST(Semisupervised, ResizedRunMapsMasksBack) {
  const auto spec = three_shapes_scene();
  auto video = render(spec);
  const auto dp = datapoint_from_video(video);
  // The oracle answers at scene resolution, so run a scaled copy of the
  // scene for a resized pipeline and map back.
  auto big = spec;
  big.width *= 2;
  big.height *= 2;
  for (auto& s : big.shapes) {
    s.radius *= 2;
    s.width *= 2;
    s.height *= 2;
    s.motion.origin = {s.motion.origin.x * 2, s.motion.origin.y * 2};
    for (auto& v : s.vertices) v = {v.x * 2, v.y * 2};
  }
  SemisupervisedOptions opts;
  opts.longest_side = 192;
  const auto pred = run_semisupervised_sequence(dp, PipelineConfig{}, oracle_backends(big), opts);
  const auto score = score_sequence("s", pred.masks, video.ground_truth);
  EXPECT_GT(score.mean_j, 0.97);
  EXPECT_EQ(pred.masks.at(ObjectId{1})[3].width(), 96);
}

TEST(Proposals, FirstFrameProposalsSeedObjects) {
  const auto spec = three_shapes_scene();
  const auto video = render(spec);
  const auto pred = run_first_frame_proposals(video, 5, PipelineConfig{}, oracle_backends(spec));
  ASSERT_EQ(pred.masks.size(), 3u);
  // Proposals come largest first; every proposal tracks one true object exactly.
  for (const auto& [id, masks] : pred.masks) {
    bool matched = false;
    for (const auto& [gid, gt] : video.ground_truth) matched = matched || masks == gt;
    EXPECT_TRUE(matched) << id.value;
  }
}
