#pragma once

// Annotation sessions: a video, a point memory edited by a person, per-frame
// previews, asynchronous propagation, undo/redo, on-disk persistence and
// archive export. Transport-agnostic; the HTTP layer lives in service.hpp.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ptseg/backend.hpp"
#include "ptseg/config.hpp"
#include "ptseg/error.hpp"
#include "ptseg/interaction.hpp"
#include "ptseg/synthetic.hpp"

namespace ptseg {

/// Where a session's models come from: oracle backends for a synthetic
/// scene, or a protocol endpoint address.
struct SessionBinding {
  std::optional<SceneSpec> scene;
  std::optional<std::string> address;
};

void to_json(nlohmann::json& j, const SessionBinding& b);
void from_json(const nlohmann::json& j, SessionBinding& b);

/// The undoable part of a session.
struct SessionState {
  PointMemory memory;
  /// Last committed label map per frame; nullopt where nothing was predicted.
  std::vector<std::optional<LabelMap>> predictions;
  /// Add and remove events in order.
  std::vector<InteractionEvent> events;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

enum class PropagationPhase { idle, running, done, failed };
std::string_view to_string(PropagationPhase p);

struct PropagationStatus {
  PropagationPhase phase = PropagationPhase::idle;
  int from = 0;
  int frames_done = 0;
  int frames_total = 0;
  std::string error;
};

struct EditResult {
  std::uint64_t point_id = 0;
  int frame = 0;
  LabelMap preview;
};

/// Thrown when an upload is over a configured limit.
class LimitExceeded : public Error {
 public:
  LimitExceeded(const std::string& message, std::uint64_t limit)
      : Error(ErrorKind::invalid_input, message), limit_(limit) {}
  std::uint64_t limit() const { return limit_; }

 private:
  std::uint64_t limit_;
};

using SessionBackendFactory = std::function<BackendPair(const SessionBinding&)>;

/// Oracle backends for scene bindings, connect_backend for addresses.
BackendPair default_session_backends(const SessionBinding& binding);

/// Mutations serialize on the session lock. A running propagation rejects
/// edits, undo and redo with a precondition error; reads return the last
/// committed state and never wait for it.
class Session {
 public:
  /// `dir`, when set, receives the session on every mutation.
  Session(std::string id, std::string name, std::vector<Frame> frames, PipelineConfig config,
          SessionBinding binding, SessionBackendFactory backends,
          std::optional<std::filesystem::path> dir);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Restores a session saved under `dir`.
  static std::unique_ptr<Session> load(const std::filesystem::path& dir,
                                       SessionBackendFactory backends);

  const std::string& id() const { return id_; }
  const std::string& name() const { return name_; }
  int num_frames() const { return static_cast<int>(frames_.size()); }
  int width() const { return frames_.front().width(); }
  int height() const { return frames_.front().height(); }
  const Frame& frame(int index) const;
  const PipelineConfig& config() const { return config_; }

  /// Adds a point living on `frame` only and re-segments that frame.
  EditResult add_point(int frame, Point2 position, PointLabel label, ObjectId object);
  /// Removes the point on `frame` (default: its origin frame) and later
  /// frames, then re-segments `frame`.
  EditResult remove_point(std::uint64_t id, std::optional<int> frame = std::nullopt);

  /// Starts tracking the points visible at `from` to the end of the video and
  /// segmenting frames from `from` on. Needs a positive point at `from`.
  void start_propagation(int from);
  /// Blocks until the current propagation (if any) finishes.
  void wait_for_propagation();
  PropagationStatus propagation() const;

  bool undo();
  bool redo();
  std::size_t undo_depth() const;
  std::size_t redo_depth() const;

  SessionState state() const;
  std::optional<LabelMap> mask(int frame) const;
  /// ustar archive: JPEGImages/<name>/*.png, Annotations/<name>/*.png and
  /// Points/<name>.json. Throws precondition when nothing was predicted.
  std::vector<std::uint8_t> export_archive() const;
  nlohmann::json points_json() const;
  nlohmann::json summary() const;

 private:
  void check_idle() const;
  LabelMap segment_frame(const PointMemory& memory, int frame);
  BackendPair& backends();
  void commit(SessionState next);
  void save() const;
  void run_propagation(std::stop_token stop, int from, PointMemory memory);

  std::string id_;
  std::string name_;
  std::vector<Frame> frames_;
  PipelineConfig config_;
  SessionBinding binding_;
  SessionBackendFactory factory_;
  std::optional<std::filesystem::path> dir_;

  mutable std::mutex mutex_;
  SessionState state_;
  std::vector<SessionState> undo_;
  std::vector<SessionState> redo_;
  BackendPair backends_;

  mutable std::mutex progress_mutex_;
  PropagationStatus progress_;
  std::atomic<bool> running_{false};
  std::jthread worker_;
};

struct StoreOptions {
  /// Sessions persist under `<root>/<id>/` and are reloaded on start.
  std::optional<std::filesystem::path> root;
  /// Address used for uploads without a scene.
  std::optional<std::string> default_backend;
  int max_frames = 2000;
  std::uint64_t max_pixels = 1ull << 30;
  SessionBackendFactory backends = default_session_backends;
};

struct CreateRequest {
  std::string name;
  PipelineConfig config;
  /// Exactly one source: frames, a scene, or a DAVIS dataset sequence.
  std::vector<Frame> frames;
  std::optional<SceneSpec> scene;
  std::optional<std::filesystem::path> dataset_root;
  std::string sequence;
  std::optional<std::string> backend;
};

class SessionStore {
 public:
  explicit SessionStore(StoreOptions options = {});

  std::shared_ptr<Session> create(CreateRequest request);
  /// Throws not_found.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::string> ids() const;
  const StoreOptions& options() const { return options_; }

 private:
  StoreOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace ptseg
