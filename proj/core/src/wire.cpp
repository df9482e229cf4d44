#include "ptseg/wire.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>
#include <limits>
#include <thread>

#include "ptseg/error.hpp"

extern char** environ;

namespace ptseg::wire {

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are encoded little-endian");

namespace {

constexpr std::size_t kReadChunk = 1u << 20;
constexpr std::int64_t kMaxTensorElements = std::int64_t{1} << 28;

[[noreturn]] void transport_errno(const std::string& what) {
  fail(ErrorKind::transport, what + ": " + std::strerror(errno));
}

}  // namespace

FdStream::FdStream(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {
  struct stat st {};
  socket_ = ::fstat(write_fd_, &st) == 0 && S_ISSOCK(st.st_mode);
}

FdStream::~FdStream() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void FdStream::shutdown() {
  if (socket_) ::shutdown(write_fd_, SHUT_RDWR);
}

void FdStream::write_all(std::span<const std::byte> data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = socket_ ? ::send(write_fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL)
                              : ::write(write_fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      transport_errno("write failed");
    }
    done += static_cast<std::size_t>(n);
  }
}

void FdStream::read_exact(std::span<std::byte> data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::read(read_fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      transport_errno("read failed");
    }
    if (n == 0) fail(ErrorKind::transport, "connection closed");
    done += static_cast<std::size_t>(n);
  }
}

void BufferStream::write_all(std::span<const std::byte> data) {
  output_.insert(output_.end(), data.begin(), data.end());
}

void BufferStream::read_exact(std::span<std::byte> data) {
  if (input_.size() - cursor_ < data.size()) {
    cursor_ = input_.size();
    fail(ErrorKind::transport, "connection closed");
  }
  std::copy_n(input_.begin() + static_cast<std::ptrdiff_t>(cursor_), data.size(), data.begin());
  cursor_ += data.size();
}

std::pair<std::unique_ptr<FdStream>, std::unique_ptr<FdStream>> stream_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) transport_errno("socketpair");
  return {std::make_unique<FdStream>(fds[0], fds[0]), std::make_unique<FdStream>(fds[1], fds[1])};
}

std::vector<std::byte> frame_message(const nlohmann::json& message) {
  const std::string body = message.dump();
  require(body.size() <= kMaxMessageBytes, ErrorKind::transport, "message exceeds size limit");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::byte> out(4 + body.size());
  out[0] = std::byte(n >> 24);
  out[1] = std::byte(n >> 16);
  out[2] = std::byte(n >> 8);
  out[3] = std::byte(n);
  std::memcpy(out.data() + 4, body.data(), body.size());
  return out;
}

void write_message(ByteStream& stream, const nlohmann::json& message) {
  stream.write_all(frame_message(message));
}

std::string read_frame(ByteStream& stream) {
  std::array<std::byte, 4> header{};
  stream.read_exact(header);
  const std::uint32_t n = (std::to_integer<std::uint32_t>(header[0]) << 24) |
                          (std::to_integer<std::uint32_t>(header[1]) << 16) |
                          (std::to_integer<std::uint32_t>(header[2]) << 8) |
                          std::to_integer<std::uint32_t>(header[3]);
  require(n <= kMaxMessageBytes, ErrorKind::transport,
          "frame length " + std::to_string(n) + " exceeds limit");
  // Grow as bytes arrive so a bogus length cannot force a huge allocation.
  std::string body;
  while (body.size() < n) {
    const std::size_t step = std::min<std::size_t>(kReadChunk, n - body.size());
    const std::size_t old = body.size();
    body.resize(old + step);
    stream.read_exact(std::as_writable_bytes(std::span(body.data() + old, step)));
  }
  return body;
}

nlohmann::json parse_body(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  require(!j.is_discarded(), ErrorKind::transport, "malformed message body");
  require(j.is_object() && j.contains("kind") && j["kind"].is_string(), ErrorKind::protocol,
          "message is not an object with a string kind");
  return j;
}

nlohmann::json read_message(ByteStream& stream) { return parse_body(read_frame(stream)); }

nlohmann::json error_message(const nlohmann::json& id, ErrorKind kind, std::string_view text) {
  return {{"kind", "error"}, {"id", id}, {"code", to_string(kind)}, {"message", text}};
}

namespace {

std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "uint8") return 1;
  if (dtype == "float64") return 8;
  fail(ErrorKind::protocol, "unsupported tensor dtype '" + std::string(dtype) + "'");
}

std::string base64_encode(std::span<const std::byte> data) {
  const std::size_t len = sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, reinterpret_cast<const unsigned char*>(data.data()),
                    data.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop the terminator
  return out;
}

std::vector<std::byte> base64_decode(std::string_view text, std::size_t expected) {
  std::vector<std::byte> out(expected);
  std::size_t written = 0;
  const char* end = nullptr;
  const int rc = sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(),
                                   text.data(), text.size(), nullptr, &written, &end,
                                   sodium_base64_VARIANT_ORIGINAL);
  require(rc == 0 && end == text.data() + text.size() && written == expected, ErrorKind::protocol,
          "tensor data is not valid base64 of the declared size");
  return out;
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key) {
  require(j.is_object() && j.contains(key), ErrorKind::protocol,
          std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::protocol, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

nlohmann::json encode_tensor(std::string_view dtype, std::span<const std::int64_t> shape,
                             std::span<const std::byte> data) {
  return {{"dtype", dtype},
          {"shape", std::vector<std::int64_t>(shape.begin(), shape.end())},
          {"data", base64_encode(data)}};
}

Tensor decode_tensor(const nlohmann::json& j) {
  Tensor t;
  t.dtype = get_field<std::string>(j, "dtype");
  t.shape = get_field<std::vector<std::int64_t>>(j, "shape");
  std::int64_t count = 1;
  for (auto d : t.shape) {
    require(d >= 0 && d <= kMaxTensorElements, ErrorKind::protocol, "invalid tensor dimension");
    count *= d;
    require(count <= kMaxTensorElements, ErrorKind::protocol, "tensor too large");
  }
  const auto text = get_field<std::string>(j, "data");
  t.data = base64_decode(text, static_cast<std::size_t>(count) * dtype_size(t.dtype));
  return t;
}

nlohmann::json encode_frame(const Frame& frame) {
  const std::int64_t shape[] = {frame.height(), frame.width(), 3};
  return {{"index", frame.index()}, {"image", encode_tensor("uint8", shape, std::as_bytes(frame.pixels()))}};
}

Frame decode_frame(const nlohmann::json& j) {
  const int index = get_field<int>(j, "index");
  require(j.contains("image"), ErrorKind::protocol, "frame without image");
  auto t = decode_tensor(j["image"]);
  require(t.dtype == "uint8" && t.shape.size() == 3 && t.shape[2] == 3 && t.shape[0] >= 1 &&
              t.shape[1] >= 1 && index >= 0,
          ErrorKind::protocol, "frame image must be a uint8 [h, w, 3] tensor");
  std::vector<std::uint8_t> rgb(t.data.size());
  std::memcpy(rgb.data(), t.data.data(), t.data.size());
  return Frame(index, static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]), std::move(rgb));
}

nlohmann::json encode_mask(const BinaryMask& mask) {
  const std::int64_t shape[] = {mask.height(), mask.width()};
  return encode_tensor("uint8", shape, std::as_bytes(mask.bits()));
}

BinaryMask decode_mask(const nlohmann::json& j) {
  auto t = decode_tensor(j);
  require(t.dtype == "uint8" && t.shape.size() == 2, ErrorKind::protocol,
          "mask must be a uint8 [h, w] tensor");
  std::vector<std::uint8_t> bits(t.data.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto v = std::to_integer<std::uint8_t>(t.data[i]);
    require(v <= 1, ErrorKind::protocol, "mask values must be 0 or 1");
    bits[i] = v;
  }
  return BinaryMask(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]), std::move(bits));
}

nlohmann::json encode_points(std::span<const LabeledPoint> points) {
  auto out = nlohmann::json::array();
  for (const auto& p : points) {
    out.push_back({{"x", p.x}, {"y", p.y}, {"label", p.positive() ? 1 : 0}, {"object", p.object.value}});
  }
  return out;
}

std::vector<LabeledPoint> decode_points(const nlohmann::json& j) {
  require(j.is_array(), ErrorKind::protocol, "points must be an array");
  std::vector<LabeledPoint> out;
  for (const auto& e : j) {
    LabeledPoint p;
    p.x = get_field<double>(e, "x");
    p.y = get_field<double>(e, "y");
    const int label = get_field<int>(e, "label");
    require(label == 0 || label == 1, ErrorKind::protocol, "point label must be 0 or 1");
    p.label = label == 1 ? PointLabel::positive : PointLabel::negative;
    p.object = ObjectId{get_field<std::uint32_t>(e, "object")};
    require(std::isfinite(p.x) && std::isfinite(p.y), ErrorKind::protocol,
            "point coordinates must be finite");
    out.push_back(p);
  }
  return out;
}

nlohmann::json encode_bundle(const TrajectoryBundle& bundle) {
  const int frames = bundle.num_frames();
  const int points = bundle.num_points();
  std::vector<double> pos(static_cast<std::size_t>(frames) * points * 2);
  std::vector<double> occ(static_cast<std::size_t>(frames) * points);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < points; ++i) {
      const auto p = bundle.position(bundle.start_frame() + t, i);
      const std::size_t k = static_cast<std::size_t>(t) * points + i;
      pos[2 * k] = p.x;
      pos[2 * k + 1] = p.y;
      occ[k] = bundle.occlusion(bundle.start_frame() + t, i);
    }
  }
  const std::int64_t pshape[] = {frames, points, 2};
  const std::int64_t oshape[] = {frames, points};
  return {{"start_frame", bundle.start_frame()},
          {"positions", encode_tensor("float64", pshape, std::as_bytes(std::span(pos)))},
          {"occlusion", encode_tensor("float64", oshape, std::as_bytes(std::span(occ)))}};
}

TrajectoryBundle decode_bundle(const nlohmann::json& j, std::span<const LabeledPoint> queries) {
  const int start = get_field<int>(j, "start_frame");
  require(j.contains("positions") && j.contains("occlusion"), ErrorKind::protocol,
          "bundle without positions or occlusion");
  const auto pos = decode_tensor(j["positions"]);
  const auto occ = decode_tensor(j["occlusion"]);
  require(pos.dtype == "float64" && pos.shape.size() == 3 && pos.shape[2] == 2 &&
              occ.dtype == "float64" && occ.shape.size() == 2 && pos.shape[0] == occ.shape[0] &&
              pos.shape[1] == occ.shape[1] && pos.shape[0] >= 1 &&
              pos.shape[1] == static_cast<std::int64_t>(queries.size()) && start >= 0,
          ErrorKind::protocol, "bundle tensors have inconsistent shapes");
  const int frames = static_cast<int>(pos.shape[0]);
  const int points = static_cast<int>(pos.shape[1]);
  std::vector<double> p(pos.data.size() / 8);
  std::vector<double> o(occ.data.size() / 8);
  std::memcpy(p.data(), pos.data.data(), pos.data.size());
  std::memcpy(o.data(), occ.data.data(), occ.data.size());
  TrajectoryBundle bundle(start, frames, std::vector<LabeledPoint>(queries.begin(), queries.end()));
  for (int i = 0; i < points; ++i) {
    require(p[2 * i] == queries[i].x && p[2 * i + 1] == queries[i].y && o[i] == 0.0,
            ErrorKind::protocol, "bundle start frame does not reproduce the queries");
  }
  for (int t = 1; t < frames; ++t) {
    for (int i = 0; i < points; ++i) {
      const std::size_t k = static_cast<std::size_t>(t) * points + i;
      require(std::isfinite(p[2 * k]) && std::isfinite(p[2 * k + 1]) && o[k] >= 0.0 && o[k] <= 1.0,
              ErrorKind::protocol, "bundle values out of range");
      bundle.set(start + t, i, {p[2 * k], p[2 * k + 1]}, o[k]);
    }
  }
  return bundle;
}

BackendServer::BackendServer(std::shared_ptr<TrackerBackend> tracker,
                             std::shared_ptr<SegmenterBackend> segmenter)
    : tracker_(std::move(tracker)), segmenter_(std::move(segmenter)) {}

nlohmann::json BackendServer::handle(const nlohmann::json& request) {
  nlohmann::json id = nullptr;
  if (request.is_object() && request.contains("id")) id = request["id"];
  try {
    return dispatch(request);
  } catch (const Error& e) {
    return error_message(id, e.kind(), e.what());
  } catch (const std::exception& e) {
    return error_message(id, ErrorKind::protocol, e.what());
  }
}

nlohmann::json BackendServer::handle_body(std::string_view body) {
  try {
    return handle(parse_body(body));
  } catch (const Error& e) {
    return error_message(nullptr, e.kind(), e.what());
  }
}

nlohmann::json BackendServer::dispatch(const nlohmann::json& request) {
  require(request.is_object() && request.contains("kind") && request["kind"].is_string(),
          ErrorKind::protocol, "message is not an object with a string kind");
  require(request.contains("id") && (request["id"].is_number_unsigned() ||
                                      (request["id"].is_number_integer() &&
                                       request["id"].get<std::int64_t>() >= 0)),
          ErrorKind::protocol, "request without a non-negative integer id");
  const auto kind = request["kind"].get<std::string>();
  const auto id = request["id"];

  if (kind == "hello") {
    const int version = get_field<int>(request, "version");
    require(version == kProtocolVersion, ErrorKind::protocol,
            "unsupported protocol version " + std::to_string(version));
    nlohmann::json reply{{"kind", "hello"}, {"id", id}, {"version", kProtocolVersion}};
    if (tracker_) {
      const auto caps = tracker_->capabilities();
      reply["tracker"] = {{"predicts_occlusion", caps.predicts_occlusion},
                          {"window_size", caps.window_size ? nlohmann::json(*caps.window_size) : nlohmann::json(nullptr)}};
    } else {
      reply["tracker"] = nullptr;
    }
    if (segmenter_) {
      const auto caps = segmenter_->capabilities();
      reply["segmenter"] = {{"accepts_dense_prior", caps.accepts_dense_prior},
                            {"proposes_masks", caps.proposes_masks}};
    } else {
      reply["segmenter"] = nullptr;
    }
    return reply;
  }
  if (kind == "track_request") {
    require(tracker_ != nullptr, ErrorKind::unsupported_capability, "no tracker on this endpoint");
    const auto queries = decode_points(request.value("queries", nlohmann::json()));
    const auto& jframes = request.value("frames", nlohmann::json());
    require(jframes.is_array(), ErrorKind::protocol, "frames must be an array");
    std::vector<Frame> frames;
    for (const auto& f : jframes) frames.push_back(decode_frame(f));
    validate_track_request(queries, frames);
    const auto bundle = tracker_->track(queries, frames);
    validate_track_response(bundle, queries, frames);
    auto reply = encode_bundle(bundle);
    reply["kind"] = "track_response";
    reply["id"] = id;
    return reply;
  }
  if (kind == "segment_request") {
    require(segmenter_ != nullptr, ErrorKind::unsupported_capability,
            "no segmenter on this endpoint");
    require(request.contains("frame"), ErrorKind::protocol, "segment request without frame");
    const auto frame = decode_frame(request["frame"]);
    const auto points = decode_points(request.value("points", nlohmann::json()));
    std::optional<PriorHandle> prior;
    if (request.contains("prior") && !request["prior"].is_null()) {
      prior = PriorHandle{get_field<std::uint64_t>(request, "prior")};
    }
    const auto pred = segmenter_->segment(frame, points, prior);
    return {{"kind", "segment_response"},
            {"id", id},
            {"mask", encode_mask(pred.mask)},
            {"prior", pred.dense_prior ? nlohmann::json(pred.dense_prior->value) : nlohmann::json(nullptr)},
            {"object", pred.object.value},
            {"frame", pred.frame}};
  }
  if (kind == "propose_request") {
    require(segmenter_ != nullptr, ErrorKind::unsupported_capability,
            "no segmenter on this endpoint");
    require(request.contains("frame"), ErrorKind::protocol, "propose request without frame");
    const auto frame = decode_frame(request["frame"]);
    const int max_proposals = get_field<int>(request, "max_proposals");
    auto masks = nlohmann::json::array();
    for (const auto& m : segmenter_->propose_masks(frame, max_proposals)) {
      masks.push_back(encode_mask(m));
    }
    return {{"kind", "propose_response"}, {"id", id}, {"masks", masks}};
  }
  fail(ErrorKind::protocol, "unknown message kind '" + kind + "'");
}

void BackendServer::serve(ByteStream& stream) {
  for (;;) {
    std::string body;
    try {
      body = read_frame(stream);
    } catch (const Error& e) {
      // Framing is lost; tell the peer if it is still listening and hang up.
      try {
        write_message(stream, error_message(nullptr, ErrorKind::transport, e.what()));
      } catch (const Error&) {
      }
      return;
    }
    try {
      write_message(stream, handle_body(body));
    } catch (const Error&) {
      return;
    }
  }
}

WireClient::WireClient(std::unique_ptr<ByteStream> stream) : stream_(std::move(stream)) {
  hello_ = call({{"kind", "hello"}, {"version", kProtocolVersion}}, "hello");
  require(hello_.value("version", -1) == kProtocolVersion, ErrorKind::protocol,
          "backend speaks a different protocol version");
}

nlohmann::json WireClient::call(nlohmann::json request, std::string_view expected_kind) {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  request["id"] = id;
  write_message(*stream_, request);
  auto reply = read_message(*stream_);
  const auto kind = reply["kind"].get<std::string>();
  if (kind == "error") {
    const auto code = reply.value("code", std::string("protocol"));
    fail(error_kind_from_string(code), "backend error: " + reply.value("message", std::string()));
  }
  require(reply.contains("id") && reply["id"].is_number_unsigned() &&
              reply["id"].get<std::uint64_t>() == id,
          ErrorKind::protocol, "response id does not echo the request id");
  require(kind == expected_kind, ErrorKind::protocol,
          "expected " + std::string(expected_kind) + ", got " + kind);
  return reply;
}

RemoteTracker::RemoteTracker(std::shared_ptr<WireClient> client) : client_(std::move(client)) {
  const auto& t = client_->hello()["tracker"];
  require(t.is_object(), ErrorKind::unsupported_capability, "endpoint has no tracker");
  caps_.predicts_occlusion = get_field<bool>(t, "predicts_occlusion");
  if (t.contains("window_size") && !t["window_size"].is_null()) {
    caps_.window_size = get_field<int>(t, "window_size");
  }
}

TrajectoryBundle RemoteTracker::track(std::span<const LabeledPoint> queries,
                                      std::span<const Frame> frames) {
  validate_track_request(queries, frames);
  auto jframes = nlohmann::json::array();
  for (const auto& f : frames) jframes.push_back(encode_frame(f));
  const auto reply = client_->call(
      {{"kind", "track_request"}, {"queries", encode_points(queries)}, {"frames", jframes}},
      "track_response");
  auto bundle = decode_bundle(reply, queries);
  validate_track_response(bundle, queries, frames);
  return bundle;
}

RemoteSegmenter::RemoteSegmenter(std::shared_ptr<WireClient> client) : client_(std::move(client)) {
  const auto& s = client_->hello()["segmenter"];
  require(s.is_object(), ErrorKind::unsupported_capability, "endpoint has no segmenter");
  caps_.accepts_dense_prior = get_field<bool>(s, "accepts_dense_prior");
  caps_.proposes_masks = get_field<bool>(s, "proposes_masks");
}

MaskPrediction RemoteSegmenter::segment(const Frame& frame, std::span<const LabeledPoint> points,
                                        std::optional<PriorHandle> prior) {
  const auto reply = client_->call({{"kind", "segment_request"},
                                    {"frame", encode_frame(frame)},
                                    {"points", encode_points(points)},
                                    {"prior", prior ? nlohmann::json(prior->value) : nlohmann::json(nullptr)}},
                                   "segment_response");
  require(reply.contains("mask"), ErrorKind::protocol, "segment response without mask");
  MaskPrediction pred;
  pred.mask = decode_mask(reply["mask"]);
  require(pred.mask.width() == frame.width() && pred.mask.height() == frame.height(),
          ErrorKind::protocol, "segmenter returned a mask of the wrong size");
  if (reply.contains("prior") && !reply["prior"].is_null()) {
    pred.dense_prior = PriorHandle{get_field<std::uint64_t>(reply, "prior")};
  }
  pred.object = ObjectId{get_field<std::uint32_t>(reply, "object")};
  pred.frame = get_field<int>(reply, "frame");
  return pred;
}

std::vector<BinaryMask> RemoteSegmenter::propose_masks(const Frame& frame, int max_proposals) {
  require(caps_.proposes_masks, ErrorKind::unsupported_capability,
          "segmenter backend does not propose masks");
  const auto reply = client_->call({{"kind", "propose_request"},
                                    {"frame", encode_frame(frame)},
                                    {"max_proposals", max_proposals}},
                                   "propose_response");
  require(reply.contains("masks") && reply["masks"].is_array(), ErrorKind::protocol,
          "propose response without masks");
  std::vector<BinaryMask> out;
  for (const auto& m : reply["masks"]) {
    out.push_back(decode_mask(m));
    require(out.back().width() == frame.width() && out.back().height() == frame.height(),
            ErrorKind::protocol, "proposal of the wrong size");
  }
  return out;
}

BackendPair connect_stream(std::unique_ptr<ByteStream> stream) {
  auto client = std::make_shared<WireClient>(std::move(stream));
  BackendPair pair;
  if (client->hello()["tracker"].is_object()) pair.tracker = std::make_shared<RemoteTracker>(client);
  if (client->hello()["segmenter"].is_object()) {
    pair.segmenter = std::make_shared<RemoteSegmenter>(client);
  }
  return pair;
}

namespace {

struct HostPort {
  std::string host;
  std::string port;
};

HostPort split_host_port(const std::string& spec) {
  const auto colon = spec.rfind(':');
  require(colon != std::string::npos, ErrorKind::invalid_input,
          "tcp address must be host:port, got '" + spec + "'");
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

int connect_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  require(path.size() < sizeof(addr.sun_path), ErrorKind::invalid_input, "unix socket path too long");
  std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) transport_errno("socket");
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    transport_errno("connect to " + path);
  }
  return fd;
}

int connect_tcp(const std::string& spec) {
  const auto hp = split_host_port(spec);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(hp.host.c_str(), hp.port.c_str(), &hints, &res) != 0 || res == nullptr) {
    fail(ErrorKind::transport, "cannot resolve " + spec);
  }
  int fd = -1;
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) fail(ErrorKind::transport, "cannot connect to " + spec);
  return fd;
}

/// Child process speaking the protocol on its stdio; reaped on destruction.
class ProcessStream final : public ByteStream {
 public:
  explicit ProcessStream(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
      transport_errno("pipe");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::string sh = "/bin/sh";
    std::string flag = "-c";
    std::string cmd = command;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      errno = rc;
      transport_errno("spawn '" + command + "'");
    }
    stream_ = std::make_unique<FdStream>(from_child[0], to_child[1]);
  }

  ~ProcessStream() override {
    stream_.reset();
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

  void write_all(std::span<const std::byte> data) override { stream_->write_all(data); }
  void read_exact(std::span<std::byte> data) override { stream_->read_exact(data); }

 private:
  pid_t pid_ = -1;
  std::unique_ptr<FdStream> stream_;
};

}  // namespace

BackendPair connect_backend(const std::string& address) {
  if (address.rfind("unix:", 0) == 0) {
    const int fd = connect_unix(address.substr(5));
    return connect_stream(std::make_unique<FdStream>(fd, fd));
  }
  if (address.rfind("tcp:", 0) == 0) {
    const int fd = connect_tcp(address.substr(4));
    return connect_stream(std::make_unique<FdStream>(fd, fd));
  }
  if (address.rfind("exec:", 0) == 0) {
    ::signal(SIGPIPE, SIG_IGN);
    return connect_stream(std::make_unique<ProcessStream>(address.substr(5)));
  }
  fail(ErrorKind::invalid_input, "unrecognized backend address '" + address + "'");
}

Listener::Listener(const std::string& address) {
  if (address.rfind("unix:", 0) == 0) {
    unix_path_ = address.substr(5);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    require(unix_path_.size() < sizeof(addr.sun_path), ErrorKind::invalid_input,
            "unix socket path too long");
    std::strncpy(addr.sun_path, unix_path_.c_str(), sizeof(addr.sun_path) - 1);
    ::unlink(unix_path_.c_str());
    fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) transport_errno("socket");
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) transport_errno("bind");
    address_ = address;
  } else if (address.rfind("tcp:", 0) == 0) {
    const auto hp = split_host_port(address.substr(4));
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(hp.host.empty() ? nullptr : hp.host.c_str(), hp.port.c_str(), &hints, &res) != 0 ||
        res == nullptr) {
      fail(ErrorKind::transport, "cannot resolve " + address);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (fd_ < 0 || rc != 0) transport_errno("bind " + address);
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    address_ = "tcp:" + (hp.host.empty() ? std::string("127.0.0.1") : hp.host) + ":" +
               std::to_string(ntohs(bound.sin_port));
  } else {
    fail(ErrorKind::invalid_input, "unrecognized listen address '" + address + "'");
  }
  if (::listen(fd_, 16) != 0) transport_errno("listen");
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
  if (!unix_path_.empty()) ::unlink(unix_path_.c_str());
}

std::unique_ptr<FdStream> Listener::accept() {
  for (;;) {
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return std::make_unique<FdStream>(fd, fd);
    if (errno != EINTR) transport_errno("accept");
  }
}

void serve_forever(Listener& listener, const ServerFactory& factory) {
  for (;;) {
    std::shared_ptr<FdStream> conn = listener.accept();
    std::thread([conn, server = factory()]() mutable { server.serve(*conn); }).detach();
  }
}

}  // namespace ptseg::wire
