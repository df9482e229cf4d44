#include "ptseg/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "ptseg/datasets.hpp"
#include "ptseg/error.hpp"
#include "ptseg/image_io.hpp"
#include "ptseg/pipeline.hpp"
#include "ptseg/tar.hpp"
#include "ptseg/wire.hpp"

namespace ptseg {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const SessionBinding& b) {
  j = json::object();
  if (b.scene) j["scene"] = *b.scene;
  if (b.address) j["address"] = *b.address;
}

void from_json(const json& j, SessionBinding& b) {
  b = {};
  if (j.contains("scene")) b.scene = j.at("scene").get<SceneSpec>();
  if (j.contains("address")) b.address = j.at("address").get<std::string>();
}

std::string_view to_string(PropagationPhase p) {
  switch (p) {
    case PropagationPhase::idle: return "idle";
    case PropagationPhase::running: return "running";
    case PropagationPhase::done: return "done";
    case PropagationPhase::failed: return "failed";
  }
  return "?";
}

BackendPair default_session_backends(const SessionBinding& binding) {
  if (binding.scene) return oracle_backends(*binding.scene);
  if (binding.address) return wire::connect_backend(*binding.address);
  fail(ErrorKind::precondition, "session has no backend");
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::not_found, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_atomically(const fs::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), ErrorKind::invalid_input, "cannot write " + tmp);
    out << text;
    require(out.good(), ErrorKind::invalid_input, "failed writing " + tmp);
  }
  fs::rename(tmp, path);
}

std::string label_hash(const LabelMap& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (int v : {m.width(), m.height()}) {
    for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>(v >> s));
  }
  for (auto b : m.labels()) mix(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json status_json(const PropagationStatus& s) {
  json j{{"state", to_string(s.phase)},
         {"from", s.from},
         {"frames_done", s.frames_done},
         {"frames_total", s.frames_total}};
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

bool visible_at(const PointMemory::FramePoint& p, const Frame& frame, const PipelineConfig& c) {
  return p.occlusion < c.occlusion_threshold && frame.in_bounds(p.point.position());
}

std::string safe_name(const std::string& name, const std::string& fallback) {
  const bool ok = !name.empty() && name != "." && name != ".." &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                           c == '.';
                  });
  return ok ? name : fallback;
}

}  // namespace

Session::Session(std::string id, std::string name, std::vector<Frame> frames, PipelineConfig config,
                 SessionBinding binding, SessionBackendFactory backends,
                 std::optional<fs::path> dir)
    : id_(std::move(id)),
      name_(safe_name(name, id_)),
      frames_(std::move(frames)),
      config_(config),
      binding_(std::move(binding)),
      factory_(std::move(backends)),
      dir_(std::move(dir)) {
  require(!frames_.empty(), ErrorKind::invalid_input, "a session needs at least one frame");
  config_.validate();
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    require(frames_[i].width() == frames_[0].width() && frames_[i].height() == frames_[0].height(),
            ErrorKind::invalid_input, "frames differ in size");
    if (frames_[i].index() != static_cast<int>(i)) frames_[i] = frames_[i].with_index(static_cast<int>(i));
  }
  state_.memory = PointMemory(num_frames());
  state_.predictions.resize(frames_.size());
  if (dir_) {
    const auto fdir = *dir_ / "frames";
    fs::create_directories(fdir);
    const auto stems = default_stems(num_frames());
    for (int t = 0; t < num_frames(); ++t) {
      const auto path = fdir / (stems[t] + ".png");
      if (!fs::exists(path)) write_png(path.string(), frames_[t]);
    }
    save();
  }
}

Session::~Session() {
  worker_.request_stop();
  if (worker_.joinable()) worker_.join();
}

const Frame& Session::frame(int index) const {
  require(index >= 0 && index < num_frames(), ErrorKind::not_found,
          "frame " + std::to_string(index) + " out of range");
  return frames_[static_cast<std::size_t>(index)];
}

void Session::check_idle() const {
  require(!running_.load(), ErrorKind::precondition, "a propagation is running");
}

BackendPair& Session::backends() {
  if (!backends_.tracker || !backends_.segmenter) backends_ = factory_(binding_);
  return backends_;
}

// Own points only; objects without points at `frame` stay background.
LabelMap Session::segment_frame(const PointMemory& memory, int frame) {
  const auto& img = frames_[static_cast<std::size_t>(frame)];
  std::map<ObjectId, std::pair<std::vector<LabeledPoint>, std::vector<double>>> by_object;
  for (const auto& p : memory.at(frame)) {
    auto& [pts, occ] = by_object[p.point.object];
    pts.push_back(p.point);
    occ.push_back(p.occlusion);
  }
  LabelMap out(img.width(), img.height());
  if (by_object.empty()) return out;
  auto segmenter = backends().segmenter;
  for (const auto& [object, po] : by_object) {
    auto r = two_pass_segment(*segmenter, img, po.first, po.second, config_);
    if (r.prediction.mask.width() == img.width() && r.prediction.mask.height() == img.height()) {
      out.paint(r.prediction.mask, static_cast<std::uint8_t>(object.value));
    }
  }
  return out;
}

void Session::commit(SessionState next) {
  undo_.push_back(std::move(state_));
  redo_.clear();
  state_ = std::move(next);
  save();
}

EditResult Session::add_point(int frame, Point2 position, PointLabel label, ObjectId object) {
  std::lock_guard lock(mutex_);
  check_idle();
  require(frame >= 0 && frame < num_frames(), ErrorKind::invalid_input,
          "frame " + std::to_string(frame) + " out of range");
  require(frames_[static_cast<std::size_t>(frame)].in_bounds(position), ErrorKind::invalid_input,
          "point lies outside the frame");
  require(object.value >= 1 && object.value <= 255, ErrorKind::invalid_input,
          "object ids must be in 1..255");
  SessionState next = state_;
  const auto id = next.memory.add(frame, label, object, {position}, {0.0});
  next.events.push_back({EventKind::add, frame, object, label, position, id});
  auto preview = segment_frame(next.memory, frame);
  next.predictions[static_cast<std::size_t>(frame)] = preview;
  commit(std::move(next));
  return {id, frame, std::move(preview)};
}

EditResult Session::remove_point(std::uint64_t id, std::optional<int> frame) {
  std::lock_guard lock(mutex_);
  check_idle();
  const auto* p = state_.memory.find(id);
  require(p != nullptr, ErrorKind::not_found, "no point " + std::to_string(id));
  const int f = frame.value_or(p->origin_frame);
  require(p->exists_at(f), ErrorKind::not_found,
          "point " + std::to_string(id) + " does not exist at frame " + std::to_string(f));
  const auto pos = p->positions[static_cast<std::size_t>(f - p->origin_frame)];
  SessionState next = state_;
  next.events.push_back({EventKind::remove, f, p->object, p->label, pos, id});
  next.memory.remove_from(id, f);
  auto preview = segment_frame(next.memory, f);
  next.predictions[static_cast<std::size_t>(f)] = preview;
  commit(std::move(next));
  return {id, f, std::move(preview)};
}

void Session::start_propagation(int from) {
  std::lock_guard lock(mutex_);
  check_idle();
  require(from >= 0 && from < num_frames(), ErrorKind::invalid_input,
          "frame " + std::to_string(from) + " out of range");
  const auto& img = frames_[static_cast<std::size_t>(from)];
  const auto points = state_.memory.at(from);
  require(std::any_of(points.begin(), points.end(),
                      [&](const auto& p) { return p.point.positive() && visible_at(p, img, config_); }),
          ErrorKind::precondition, "no positive point at frame " + std::to_string(from));
  if (worker_.joinable()) worker_.join();
  {
    std::lock_guard plock(progress_mutex_);
    progress_ = {PropagationPhase::running, from, 0, num_frames() - from, {}};
  }
  running_.store(true);
  worker_ = std::jthread([this, from, memory = state_.memory](std::stop_token stop) {
    run_propagation(stop, from, memory);
  });
}

void Session::run_propagation(std::stop_token stop, int from, PointMemory memory) {
  std::string error;
  try {
    BackendPair b;
    {
      std::lock_guard lock(mutex_);
      b = backends();
    }
    const auto& img = frames_[static_cast<std::size_t>(from)];
    std::vector<LabeledPoint> queries;
    std::vector<std::uint64_t> ids;
    for (const auto& p : memory.at(from)) {
      if (visible_at(p, img, config_)) {
        queries.push_back(p.point);
        ids.push_back(p.id);
      } else if (from + 1 < num_frames() && memory.find(p.id)->exists_at(from + 1)) {
        memory.remove_from(p.id, from + 1);
      }
    }
    const std::span<const Frame> clip(frames_.data() + from, frames_.size() - from);
    const auto bundle = track_points(*b.tracker, queries, clip);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      std::vector<Point2> pos;
      std::vector<double> occ;
      for (int t = from; t < num_frames(); ++t) {
        pos.push_back(bundle.position(t, static_cast<int>(k)));
        occ.push_back(bundle.occlusion(t, static_cast<int>(k)));
      }
      memory.retrack(ids[k], from, std::move(pos), std::move(occ));
    }
    std::vector<LabelMap> maps;
    for (int t = from; t < num_frames(); ++t) {
      if (stop.stop_requested()) fail(ErrorKind::precondition, "propagation cancelled");
      maps.push_back(segment_frame(memory, t));
      std::lock_guard plock(progress_mutex_);
      ++progress_.frames_done;
    }
    std::lock_guard lock(mutex_);
    SessionState next = state_;
    next.memory = std::move(memory);
    for (std::size_t k = 0; k < maps.size(); ++k) next.predictions[from + k] = std::move(maps[k]);
    commit(std::move(next));
  } catch (const Error& e) {
    error = e.what();
    if (e.kind() == ErrorKind::transport || e.kind() == ErrorKind::protocol) {
      std::lock_guard lock(mutex_);
      backends_ = {};
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  {
    std::lock_guard plock(progress_mutex_);
    progress_.phase = error.empty() ? PropagationPhase::done : PropagationPhase::failed;
    progress_.error = error;
  }
  running_.store(false);
  running_.notify_all();
}

void Session::wait_for_propagation() { running_.wait(true); }

PropagationStatus Session::propagation() const {
  std::lock_guard plock(progress_mutex_);
  return progress_;
}

bool Session::undo() {
  std::lock_guard lock(mutex_);
  check_idle();
  if (undo_.empty()) return false;
  redo_.push_back(std::move(state_));
  state_ = std::move(undo_.back());
  undo_.pop_back();
  save();
  return true;
}

bool Session::redo() {
  std::lock_guard lock(mutex_);
  check_idle();
  if (redo_.empty()) return false;
  undo_.push_back(std::move(state_));
  state_ = std::move(redo_.back());
  redo_.pop_back();
  save();
  return true;
}

std::size_t Session::undo_depth() const {
  std::lock_guard lock(mutex_);
  return undo_.size();
}

std::size_t Session::redo_depth() const {
  std::lock_guard lock(mutex_);
  return redo_.size();
}

SessionState Session::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::optional<LabelMap> Session::mask(int frame) const {
  require(frame >= 0 && frame < num_frames(), ErrorKind::not_found,
          "frame " + std::to_string(frame) + " out of range");
  std::lock_guard lock(mutex_);
  return state_.predictions[static_cast<std::size_t>(frame)];
}

json Session::points_json() const {
  std::lock_guard lock(mutex_);
  return {{"sequence", name_}, {"events", state_.events}, {"memory", state_.memory}};
}

std::vector<std::uint8_t> Session::export_archive() const {
  const auto points = points_json();
  std::vector<std::optional<LabelMap>> predictions;
  {
    std::lock_guard lock(mutex_);
    predictions = state_.predictions;
  }
  require(std::any_of(predictions.begin(), predictions.end(), [](const auto& p) { return p.has_value(); }),
          ErrorKind::precondition, "nothing to export: no frame has a prediction");
  const auto stems = default_stems(num_frames());
  std::vector<TarEntry> entries;
  for (int t = 0; t < num_frames(); ++t) {
    entries.push_back({"JPEGImages/" + name_ + "/" + stems[t] + ".png", encode_png(frames_[t])});
  }
  for (int t = 0; t < num_frames(); ++t) {
    const auto& p = predictions[static_cast<std::size_t>(t)];
    entries.push_back({"Annotations/" + name_ + "/" + stems[t] + ".png",
                       encode_indexed_png(p ? *p : LabelMap(width(), height()))});
  }
  const auto text = points.dump(2);
  entries.push_back({"Points/" + name_ + ".json", {text.begin(), text.end()}});
  return write_tar(entries);
}

json Session::summary() const {
  std::size_t predicted = 0;
  std::size_t points = 0;
  std::size_t events = 0;
  std::size_t undo = 0;
  std::size_t redo = 0;
  {
    std::lock_guard lock(mutex_);
    for (const auto& p : state_.predictions) predicted += p.has_value() ? 1 : 0;
    points = state_.memory.points().size();
    events = state_.events.size();
    undo = undo_.size();
    redo = redo_.size();
  }
  return {{"id", id_},           {"name", name_},
          {"num_frames", num_frames()}, {"width", width()},
          {"height", height()},  {"points", points},
          {"events", events},    {"predicted_frames", predicted},
          {"undo", undo},        {"redo", redo},
          {"propagation", status_json(propagation())}};
}

namespace {

json state_to_json(const SessionState& s, const fs::path& mask_dir) {
  json preds = json::array();
  for (const auto& p : s.predictions) {
    if (!p) {
      preds.push_back(nullptr);
      continue;
    }
    const auto h = label_hash(*p);
    const auto path = mask_dir / (h + ".png");
    if (!fs::exists(path)) {
      write_indexed_png(path.string(), *p);
    } else {
      require(read_indexed_png(path.string()) == *p, ErrorKind::invalid_input,
              "mask hash collision at " + path.string());
    }
    preds.push_back(h);
  }
  return {{"memory", s.memory}, {"events", s.events}, {"predictions", preds}};
}

SessionState state_from_json(const json& j, const fs::path& mask_dir,
                             std::map<std::string, LabelMap>& cache) {
  SessionState s;
  s.memory = j.at("memory").get<PointMemory>();
  s.events = j.at("events").get<std::vector<InteractionEvent>>();
  for (const auto& p : j.at("predictions")) {
    if (p.is_null()) {
      s.predictions.emplace_back();
      continue;
    }
    const auto h = p.get<std::string>();
    auto it = cache.find(h);
    if (it == cache.end()) it = cache.emplace(h, read_indexed_png((mask_dir / (h + ".png")).string())).first;
    s.predictions.emplace_back(it->second);
  }
  return s;
}

}  // namespace

void Session::save() const {
  if (!dir_) return;
  const auto mask_dir = *dir_ / "masks";
  fs::create_directories(mask_dir);
  json undo = json::array();
  for (const auto& s : undo_) undo.push_back(state_to_json(s, mask_dir));
  json redo = json::array();
  for (const auto& s : redo_) redo.push_back(state_to_json(s, mask_dir));
  json j{{"id", id_},
         {"name", name_},
         {"num_frames", num_frames()},
         {"config", config_},
         {"binding", binding_},
         {"state", state_to_json(state_, mask_dir)},
         {"undo", undo},
         {"redo", redo}};
  write_atomically(*dir_ / "session.json", j.dump());
}

std::unique_ptr<Session> Session::load(const fs::path& dir, SessionBackendFactory backends) {
  const auto bytes = read_bytes(dir / "session.json");
  const auto j = json::parse(bytes.begin(), bytes.end());
  const int n = j.at("num_frames").get<int>();
  const auto stems = default_stems(n);
  std::vector<Frame> frames;
  for (int t = 0; t < n; ++t) frames.push_back(read_image((dir / "frames" / (stems[t] + ".png")).string(), t));
  auto s = std::make_unique<Session>(j.at("id").get<std::string>(), j.at("name").get<std::string>(),
                                     std::move(frames), j.at("config").get<PipelineConfig>(),
                                     j.at("binding").get<SessionBinding>(), std::move(backends),
                                     std::nullopt);
  const auto mask_dir = dir / "masks";
  std::map<std::string, LabelMap> cache;
  s->state_ = state_from_json(j.at("state"), mask_dir, cache);
  for (const auto& u : j.at("undo")) s->undo_.push_back(state_from_json(u, mask_dir, cache));
  for (const auto& r : j.at("redo")) s->redo_.push_back(state_from_json(r, mask_dir, cache));
  require(s->state_.memory.num_frames() == n && s->state_.predictions.size() == static_cast<std::size_t>(n),
          ErrorKind::invalid_input, "saved session state does not match its frames");
  s->dir_ = dir;
  return s;
}

SessionStore::SessionStore(StoreOptions options) : options_(std::move(options)) {
  if (!options_.root) return;
  fs::create_directories(*options_.root);
  for (const auto& entry : fs::directory_iterator(*options_.root)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "session.json")) continue;
    std::shared_ptr<Session> s = Session::load(entry.path(), options_.backends);
    sessions_[s->id()] = std::move(s);
  }
}

std::shared_ptr<Session> SessionStore::create(CreateRequest request) {
  const int sources = (request.frames.empty() ? 0 : 1) + (request.scene ? 1 : 0) +
                      (request.dataset_root ? 1 : 0);
  require(sources == 1, ErrorKind::invalid_input,
          "give exactly one of frames, scene or dataset");
  SessionBinding binding;
  std::vector<Frame> frames;
  std::string name = request.name;
  if (request.scene) {
    request.scene->validate();
    binding.scene = request.scene;
    if (name.empty()) name = request.scene->name;
    const auto pixels = static_cast<std::uint64_t>(request.scene->width) * request.scene->height *
                        static_cast<std::uint64_t>(request.scene->duration);
    if (request.scene->duration > options_.max_frames) {
      throw LimitExceeded("scene exceeds the frame limit", static_cast<std::uint64_t>(options_.max_frames));
    }
    if (pixels > options_.max_pixels) throw LimitExceeded("scene exceeds the pixel limit", options_.max_pixels);
    frames = render(*request.scene).frames;
  } else if (request.dataset_root) {
    auto dp = load_davis_sequence(*request.dataset_root, request.sequence);
    frames = std::move(dp.video.frames);
    if (dp.scene_path) {
      binding.scene = load_scene(dp.scene_path->string());
    }
    if (name.empty()) name = request.sequence;
  } else {
    frames = std::move(request.frames);
  }
  require(!frames.empty(), ErrorKind::invalid_input, "a session needs at least one frame");
  if (frames.size() > static_cast<std::size_t>(options_.max_frames)) {
    throw LimitExceeded("upload exceeds the frame limit", static_cast<std::uint64_t>(options_.max_frames));
  }
  std::uint64_t pixels = 0;
  for (const auto& f : frames) pixels += static_cast<std::uint64_t>(f.width()) * f.height();
  if (pixels > options_.max_pixels) throw LimitExceeded("upload exceeds the pixel limit", options_.max_pixels);
  if (!binding.scene) {
    binding.address = request.backend ? request.backend : options_.default_backend;
    require(binding.address.has_value(), ErrorKind::invalid_input,
            "no backend: give a scene, a dataset with a scene, or a backend address");
  }

  std::lock_guard lock(mutex_);
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::string id;
  do {
    char buf[13];
    std::snprintf(buf, sizeof buf, "%012llx",
                  static_cast<unsigned long long>(rng() & 0xffffffffffffull));
    id = buf;
  } while (sessions_.count(id) != 0);
  std::optional<fs::path> dir;
  if (options_.root) dir = *options_.root / id;
  auto s = std::make_shared<Session>(id, name, std::move(frames), request.config, std::move(binding),
                                     options_.backends, dir);
  sessions_[id] = s;
  return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorKind::not_found, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

}  // namespace ptseg
