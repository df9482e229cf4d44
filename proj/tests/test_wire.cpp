#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <thread>

#include "protocol_checks.hpp"
#include "ptseg/synthetic.hpp"
#include "ptseg/wire.hpp"
#include "support.hpp"

using namespace ptseg;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::invalid_input;
}

SceneSpec small_scene() {
  auto spec = suite_scene(0);
  spec.duration = 8;
  return spec;
}

void expect_backends_work(BackendPair b, const SceneSpec& spec) {
  ASSERT_TRUE(b.tracker);
  ASSERT_TRUE(b.segmenter);
  const auto video = render(spec);
  OracleTracker lt(spec);
  OracleSegmenter ls(spec);
  const auto& gt = video.ground_truth.begin()->second;
  const auto pole = pole_of_inaccessibility(gt[0]);
  ASSERT_TRUE(pole);
  const std::vector<LabeledPoint> q{{pole->x + 0.5, pole->y + 0.5, PointLabel::positive,
                                     video.ground_truth.begin()->first}};
  EXPECT_EQ(b.tracker->track(q, video.frames), lt.track(q, video.frames));
  EXPECT_EQ(b.segmenter->segment(video.frames[0], q, std::nullopt).mask,
            ls.segment(video.frames[0], q, std::nullopt).mask);
}

}  // namespace

TEST(Framing, BigEndianLengthPrefix) {
  const json msg{{"kind", "hello"}, {"id", 7}};
  const auto bytes = wire::frame_message(msg);
  const auto body = msg.dump();
  ASSERT_EQ(bytes.size(), body.size() + 4);
  const std::uint32_t n = (std::to_integer<std::uint32_t>(bytes[0]) << 24) |
                          (std::to_integer<std::uint32_t>(bytes[1]) << 16) |
                          (std::to_integer<std::uint32_t>(bytes[2]) << 8) |
                          std::to_integer<std::uint32_t>(bytes[3]);
  EXPECT_EQ(n, body.size());
  wire::BufferStream in(bytes);
  EXPECT_EQ(wire::read_message(in), msg);
  EXPECT_EQ(kind_of([&] { wire::read_message(in); }), ErrorKind::transport);
}

TEST(Framing, OversizedAndTruncatedFramesAreTransportErrors) {
  std::vector<std::byte> huge{std::byte{0xff}, std::byte{0xff}, std::byte{0xff}, std::byte{0xff}};
  wire::BufferStream a(huge);
  EXPECT_EQ(kind_of([&] { wire::read_frame(a); }), ErrorKind::transport);
  auto bytes = wire::frame_message(json{{"kind", "x"}, {"id", 1}});
  bytes.pop_back();
  wire::BufferStream b(bytes);
  EXPECT_EQ(kind_of([&] { wire::read_frame(b); }), ErrorKind::transport);
}

TEST(Framing, BodyParsing) {
  EXPECT_EQ(kind_of([] { wire::parse_body("{not json"); }), ErrorKind::transport);
  EXPECT_EQ(kind_of([] { wire::parse_body("[1,2]"); }), ErrorKind::protocol);
  EXPECT_EQ(kind_of([] { wire::parse_body(R"({"kind": 3})"); }), ErrorKind::protocol);
  EXPECT_EQ(wire::parse_body(R"({"kind": "a", "id": 1})")["kind"], "a");
}

TEST(Codecs, TensorRoundTripAndValidation) {
  std::vector<std::byte> data(24);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::byte(i * 7);
  const std::vector<std::int64_t> shape{3};
  const auto j = wire::encode_tensor("float64", shape, data);
  const auto t = wire::decode_tensor(j);
  EXPECT_EQ(t.dtype, "float64");
  EXPECT_EQ(t.shape, shape);
  EXPECT_EQ(t.data, data);
  auto bad = j;
  bad["shape"] = {4};
  EXPECT_EQ(kind_of([&] { wire::decode_tensor(bad); }), ErrorKind::protocol);
  bad = j;
  bad["dtype"] = "int16";
  EXPECT_EQ(kind_of([&] { wire::decode_tensor(bad); }), ErrorKind::protocol);
  bad = j;
  bad["data"] = "###";
  EXPECT_EQ(kind_of([&] { wire::decode_tensor(bad); }), ErrorKind::protocol);
  bad = j;
  bad["shape"] = {-3};
  EXPECT_EQ(kind_of([&] { wire::decode_tensor(bad); }), ErrorKind::protocol);
}

TEST(Codecs, FrameMaskPointsBundleRoundTrip) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 40);
    const int h = 1 + static_cast<int>(rng() % 40);
    const auto f = ptseg::test::noise_frame(rng, trial, w, h);
    EXPECT_EQ(wire::decode_frame(wire::encode_frame(f)), f);
    const auto m = ptseg::test::random_mask(rng, w, h, 0.5);
    EXPECT_EQ(wire::decode_mask(wire::encode_mask(m)), m);
    const auto pts = protocol_check::random_points(rng, w, h, 1 + trial % 5);
    EXPECT_EQ(wire::decode_points(wire::encode_points(pts)), pts);
    TrajectoryBundle b(trial, 4, pts);
    for (int t = trial + 1; t < trial + 4; ++t) {
      for (int i = 0; i < b.num_points(); ++i) {
        b.set(t, i, {std::ldexp(static_cast<double>(rng() % 1000), -3), -1.0 / 3.0},
              static_cast<double>(rng() % 100) / 99.0);
      }
    }
    EXPECT_EQ(wire::decode_bundle(wire::encode_bundle(b), pts), b);
  }
}

TEST(Codecs, BundleMustKeepQueries) {
  const std::vector<LabeledPoint> q{{1.5, 1.5, PointLabel::positive, ObjectId{1}}};
  TrajectoryBundle b(0, 2, q);
  auto j = wire::encode_bundle(b);
  const std::vector<LabeledPoint> other{{2.5, 1.5, PointLabel::positive, ObjectId{1}}};
  EXPECT_EQ(kind_of([&] { wire::decode_bundle(j, other); }), ErrorKind::protocol);
}

TEST(Codecs, PointsRejectBadLabels) {
  EXPECT_EQ(kind_of([] { wire::decode_points(json::parse(R"([{"x":1,"y":1,"label":2,"object":1}])")); }),
            ErrorKind::protocol);
  EXPECT_EQ(kind_of([] { wire::decode_points(json::parse(R"({"x":1})")); }), ErrorKind::protocol);
}

TEST(Server, HelloAdvertisesCapabilities) {
  const auto spec = small_scene();
  wire::BackendServer srv(std::make_shared<OracleTracker>(spec, 5), nullptr);
  const auto reply = srv.handle({{"kind", "hello"}, {"id", 1}, {"version", wire::kProtocolVersion}});
  EXPECT_EQ(reply["kind"], "hello");
  EXPECT_EQ(reply["tracker"]["window_size"], 5);
  EXPECT_TRUE(reply["segmenter"].is_null());
  const auto seg = srv.handle({{"kind", "segment_request"}, {"id", 2}, {"frame", wire::encode_frame(render(spec).frames[0])}});
  EXPECT_EQ(seg["kind"], "error");
  EXPECT_EQ(seg["code"], "unsupported_capability");
  EXPECT_EQ(seg["id"], 2);
}

TEST(Server, ErrorReplies) {
  const auto spec = small_scene();
  wire::BackendServer srv(std::make_shared<OracleTracker>(spec), std::make_shared<OracleSegmenter>(spec));
  EXPECT_EQ(srv.handle({{"kind", "hello"}, {"id", 1}, {"version", 99}})["code"], "protocol");
  EXPECT_EQ(srv.handle({{"kind", "dance"}, {"id", 1}})["code"], "protocol");
  EXPECT_EQ(srv.handle({{"kind", "hello"}, {"id", -1}, {"version", 1}})["code"], "protocol");
  EXPECT_EQ(srv.handle_body("garbage")["code"], "transport");
}

TEST(Loopback, HundredRandomRequestsAreBitIdentical) {
  const auto report = protocol_check::loopback_equivalence(small_scene(), 100, 5);
  EXPECT_EQ(report.requests, 100);
  EXPECT_EQ(report.identical, 100) << report.first_mismatch;
}

TEST(Fuzz, ThousandMalformedBodiesNeverEscape) {
  const auto report = protocol_check::fuzz_server(small_scene(), 1000, 11);
  EXPECT_EQ(report.cases, 1000);
  EXPECT_EQ(report.escaped, 0);
  EXPECT_EQ(report.malformed_replies, 0);
}

TEST(Fuzz, RandomByteStreamsEndTheSessionCleanly) {
  const auto spec = small_scene();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::byte> bytes(rng() % 64);
    for (auto& b : bytes) b = std::byte(rng() % 256);
    wire::BufferStream s(bytes);
    wire::BackendServer srv(nullptr, std::make_shared<OracleSegmenter>(spec));
    EXPECT_NO_THROW(srv.serve(s));
  }
}

TEST(Transports, UnixSocket) {
  const auto spec = small_scene();
  ptseg::test::TempDir dir;
  wire::Listener listener("unix:" + (dir.path() / "b.sock").string());
  std::thread server([&] {
    auto s = listener.accept();
    wire::BackendServer srv(std::make_shared<OracleTracker>(spec), std::make_shared<OracleSegmenter>(spec));
    srv.serve(*s);
  });
  expect_backends_work(wire::connect_backend(listener.address()), spec);
  server.join();
}

TEST(Transports, TcpWithEphemeralPort) {
  const auto spec = small_scene();
  wire::Listener listener("tcp:127.0.0.1:0");
  EXPECT_NE(listener.address(), "tcp:127.0.0.1:0");
  std::thread server([&] {
    auto s = listener.accept();
    wire::BackendServer srv(std::make_shared<OracleTracker>(spec), std::make_shared<OracleSegmenter>(spec));
    srv.serve(*s);
  });
  expect_backends_work(wire::connect_backend(listener.address()), spec);
  server.join();
}

TEST(Transports, ExecChildProcess) {
  const auto spec = small_scene();
  ptseg::test::TempDir dir;
  const auto scene = (dir.path() / "scene.json").string();
  save_scene(spec, scene);
  expect_backends_work(
      wire::connect_backend(std::string("exec:") + PTSEG_CLI + " serve-backend --stdio --scene " + scene), spec);
}

TEST(Transports, BadAddresses) {
  EXPECT_EQ(kind_of([] { wire::connect_backend("carrier-pigeon:1"); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { wire::connect_backend("unix:/nonexistent/dir/sock"); }), ErrorKind::transport);
}
