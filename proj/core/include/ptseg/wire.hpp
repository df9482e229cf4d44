#pragma once

// Length-prefixed JSON protocol between the engine and backend processes.
//
// Every message is a 4-byte big-endian body length followed by a UTF-8 JSON
// object with a string "kind" and an integer "id". Binary payloads travel as
// {"dtype": "uint8"|"float64", "shape": [...], "data": <base64>} objects,
// little-endian. Kinds:
//
//   hello             -> hello              version + capability negotiation
//   track_request     -> track_response
//   segment_request   -> segment_response
//   propose_request   -> propose_response
//   (anything)        -> error              {"code", "message"}
//
// One connection is one session: prior handles are scoped to it and there is
// at most one request in flight.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptseg/backend.hpp"
#include "ptseg/error.hpp"

namespace ptseg::wire {

constexpr int kProtocolVersion = 1;
constexpr std::uint32_t kMaxMessageBytes = 256u << 20;

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Both throw Error(transport) on failure or end of stream.
  virtual void write_all(std::span<const std::byte> data) = 0;
  virtual void read_exact(std::span<std::byte> data) = 0;
};

/// Stream over POSIX descriptors (pipes or sockets). Owns and closes them.
class FdStream final : public ByteStream {
 public:
  FdStream(int read_fd, int write_fd);
  ~FdStream() override;
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;

  void write_all(std::span<const std::byte> data) override;
  void read_exact(std::span<std::byte> data) override;
  /// Shuts down the socket so a blocked peer sees end of stream.
  void shutdown();

 private:
  int read_fd_;
  int write_fd_;
  bool socket_;
};

/// In-memory stream: reads drain `input`, writes append to `output`.
class BufferStream final : public ByteStream {
 public:
  explicit BufferStream(std::vector<std::byte> input = {}) : input_(std::move(input)) {}
  void write_all(std::span<const std::byte> data) override;
  void read_exact(std::span<std::byte> data) override;
  const std::vector<std::byte>& output() const { return output_; }

 private:
  std::vector<std::byte> input_;
  std::size_t cursor_ = 0;
  std::vector<std::byte> output_;
};

/// Connected socket pair, for loopback use and tests.
std::pair<std::unique_ptr<FdStream>, std::unique_ptr<FdStream>> stream_pair();

std::vector<std::byte> frame_message(const nlohmann::json& message);
void write_message(ByteStream& stream, const nlohmann::json& message);
/// Returns the raw body of the next message.
std::string read_frame(ByteStream& stream);
/// Parses a body into a message object; malformed bodies are transport
/// errors, well-formed JSON without a string "kind" is a protocol error.
nlohmann::json parse_body(std::string_view body);
nlohmann::json read_message(ByteStream& stream);

nlohmann::json error_message(const nlohmann::json& id, ErrorKind kind, std::string_view text);

// Payload codecs. Decoders throw Error(protocol) on malformed input.
nlohmann::json encode_tensor(std::string_view dtype, std::span<const std::int64_t> shape,
                             std::span<const std::byte> data);
struct Tensor {
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::vector<std::byte> data;
};
Tensor decode_tensor(const nlohmann::json& j);

nlohmann::json encode_frame(const Frame& frame);
Frame decode_frame(const nlohmann::json& j);
nlohmann::json encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(const nlohmann::json& j);
nlohmann::json encode_points(std::span<const LabeledPoint> points);
std::vector<LabeledPoint> decode_points(const nlohmann::json& j);
nlohmann::json encode_bundle(const TrajectoryBundle& bundle);
/// Rebuilds a bundle around the caller's queries; the start frame must hold
/// them exactly.
TrajectoryBundle decode_bundle(const nlohmann::json& j, std::span<const LabeledPoint> queries);

/// Answers protocol requests with in-process backends. Either may be null.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<TrackerBackend> tracker,
                std::shared_ptr<SegmenterBackend> segmenter);

  /// One request in, one response out; never throws.
  nlohmann::json handle(const nlohmann::json& request);
  /// Handles raw frame bodies, including ones that fail to parse.
  nlohmann::json handle_body(std::string_view body);
  /// Serves until the peer disconnects or the framing breaks.
  void serve(ByteStream& stream);

 private:
  nlohmann::json dispatch(const nlohmann::json& request);

  std::shared_ptr<TrackerBackend> tracker_;
  std::shared_ptr<SegmenterBackend> segmenter_;
};

/// Client side of one connection; performs the hello exchange on creation.
class WireClient {
 public:
  explicit WireClient(std::unique_ptr<ByteStream> stream);

  /// Sends `request` (its id is assigned here) and returns the matching
  /// response; error replies are rethrown as Error.
  nlohmann::json call(nlohmann::json request, std::string_view expected_kind);
  const nlohmann::json& hello() const { return hello_; }

 private:
  std::mutex mutex_;
  std::unique_ptr<ByteStream> stream_;
  std::uint64_t next_id_ = 0;
  nlohmann::json hello_;
};

class RemoteTracker final : public TrackerBackend {
 public:
  explicit RemoteTracker(std::shared_ptr<WireClient> client);
  TrackerCapabilities capabilities() const override { return caps_; }
  TrajectoryBundle track(std::span<const LabeledPoint> queries,
                         std::span<const Frame> frames) override;

 private:
  std::shared_ptr<WireClient> client_;
  TrackerCapabilities caps_;
};

class RemoteSegmenter final : public SegmenterBackend {
 public:
  explicit RemoteSegmenter(std::shared_ptr<WireClient> client);
  SegmenterCapabilities capabilities() const override { return caps_; }
  MaskPrediction segment(const Frame& frame, std::span<const LabeledPoint> points,
                         std::optional<PriorHandle> prior) override;
  std::vector<BinaryMask> propose_masks(const Frame& frame, int max_proposals) override;

 private:
  std::shared_ptr<WireClient> client_;
  SegmenterCapabilities caps_;
};

/// Backends behind one connection; either side is null when the server does
/// not offer it.
BackendPair connect_stream(std::unique_ptr<ByteStream> stream);

/// Addresses: "unix:<path>", "tcp:<host>:<port>", "exec:<shell command>"
/// (the command speaks the protocol on stdin/stdout).
BackendPair connect_backend(const std::string& address);

class Listener {
 public:
  /// "unix:<path>" or "tcp:<host>:<port>" (port 0 picks a free one).
  explicit Listener(const std::string& address);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::unique_ptr<FdStream> accept();
  /// Address clients can connect to (resolves port 0).
  const std::string& address() const { return address_; }

 private:
  int fd_ = -1;
  std::string address_;
  std::string unix_path_;
};

using ServerFactory = std::function<BackendServer()>;

/// Accepts connections forever, serving each on its own thread with a fresh
/// server from `factory`.
[[noreturn]] void serve_forever(Listener& listener, const ServerFactory& factory);

}  // namespace ptseg::wire
