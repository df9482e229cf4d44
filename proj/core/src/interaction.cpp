#include "ptseg/interaction.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"
#include "ptseg/metrics.hpp"
#include "ptseg/pipeline.hpp"

namespace ptseg {

std::uint64_t PointMemory::add(int frame, PointLabel label, ObjectId object,
                               std::vector<Point2> positions, std::vector<double> occlusion) {
  require(frame >= 0 && frame < num_frames_, ErrorKind::invalid_input, "frame out of range");
  require(!positions.empty() && positions.size() == occlusion.size() &&
              frame + static_cast<int>(positions.size()) <= num_frames_,
          ErrorKind::invalid_input, "trajectory does not fit the memory");
  MemoryPoint p;
  p.id = next_id_++;
  p.origin_frame = frame;
  p.label = label;
  p.object = object;
  p.end_frame = frame + static_cast<int>(positions.size());
  p.positions = std::move(positions);
  p.occlusion = std::move(occlusion);
  points_.push_back(std::move(p));
  return points_.back().id;
}

void PointMemory::remove_from(std::uint64_t id, int frame) {
  auto it = std::find_if(points_.begin(), points_.end(), [&](const auto& p) { return p.id == id; });
  require(it != points_.end() && it->exists_at(frame), ErrorKind::not_found,
          "no point " + std::to_string(id) + " at frame " + std::to_string(frame));
  if (frame == it->origin_frame) {
    points_.erase(it);
    return;
  }
  const auto keep = static_cast<std::size_t>(frame - it->origin_frame);
  it->positions.resize(keep);
  it->occlusion.resize(keep);
  it->end_frame = frame;
}

void PointMemory::retrack(std::uint64_t id, int frame, std::vector<Point2> positions,
                          std::vector<double> occlusion) {
  auto it = std::find_if(points_.begin(), points_.end(), [&](const auto& p) { return p.id == id; });
  require(it != points_.end() && it->exists_at(frame), ErrorKind::not_found,
          "no point " + std::to_string(id) + " at frame " + std::to_string(frame));
  require(!positions.empty() && positions.size() == occlusion.size() &&
              frame + static_cast<int>(positions.size()) <= num_frames_,
          ErrorKind::invalid_input, "trajectory does not fit the memory");
  const auto keep = static_cast<std::size_t>(frame - it->origin_frame);
  it->positions.resize(keep);
  it->occlusion.resize(keep);
  it->positions.insert(it->positions.end(), positions.begin(), positions.end());
  it->occlusion.insert(it->occlusion.end(), occlusion.begin(), occlusion.end());
  it->end_frame = it->origin_frame + static_cast<int>(it->positions.size());
}

PointMemory PointMemory::restore(int num_frames, std::uint64_t next_id,
                                 std::vector<MemoryPoint> points) {
  require(num_frames >= 0, ErrorKind::invalid_input, "negative frame count");
  std::uint64_t last = 0;
  for (const auto& p : points) {
    require(p.id > last && p.id < next_id, ErrorKind::invalid_input,
            "point ids must increase and stay below next_id");
    last = p.id;
    require(p.origin_frame >= 0 && p.positions.size() == p.occlusion.size() &&
                !p.positions.empty() &&
                p.end_frame == p.origin_frame + static_cast<int>(p.positions.size()) &&
                p.end_frame <= num_frames,
            ErrorKind::invalid_input, "inconsistent trajectory for point " + std::to_string(p.id));
  }
  PointMemory m(num_frames);
  m.next_id_ = next_id;
  m.points_ = std::move(points);
  return m;
}

const MemoryPoint* PointMemory::find(std::uint64_t id) const {
  for (const auto& p : points_) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::vector<PointMemory::FramePoint> PointMemory::at(int frame) const {
  std::vector<FramePoint> out;
  for (const auto& p : points_) {
    if (!p.exists_at(frame)) continue;
    const auto k = static_cast<std::size_t>(frame - p.origin_frame);
    out.push_back({p.id, {p.positions[k].x, p.positions[k].y, p.label, p.object}, p.occlusion[k]});
  }
  return out;
}

std::uint64_t add_point(PointMemory& memory, TrackerBackend& tracker, std::span<const Frame> frames,
                        int frame, Point2 position, PointLabel label, ObjectId object,
                        bool propagate) {
  require(frame >= 0 && frame < static_cast<int>(frames.size()), ErrorKind::invalid_input,
          "frame out of range");
  if (!propagate) return memory.add(frame, label, object, {position}, {0.0});
  const LabeledPoint q{position.x, position.y, label, object};
  const auto clip = frames.subspan(static_cast<std::size_t>(frame));
  const auto bundle = track_points(tracker, std::span<const LabeledPoint>(&q, 1), clip);
  std::vector<Point2> positions;
  std::vector<double> occlusion;
  for (int t = frame; t < static_cast<int>(frames.size()); ++t) {
    positions.push_back(bundle.position(t, 0));
    occlusion.push_back(bundle.occlusion(t, 0));
  }
  return memory.add(frame, label, object, std::move(positions), std::move(occlusion));
}

void to_json(nlohmann::json& j, const MemoryPoint& p) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& q : p.positions) pos.push_back({q.x, q.y});
  j = {{"id", p.id},
       {"origin_frame", p.origin_frame},
       {"label", p.label == PointLabel::positive ? 1 : 0},
       {"object", p.object.value},
       {"positions", pos},
       {"occlusion", p.occlusion}};
}

void from_json(const nlohmann::json& j, MemoryPoint& p) {
  p.id = j.at("id").get<std::uint64_t>();
  p.origin_frame = j.at("origin_frame").get<int>();
  p.label = j.at("label").get<int>() == 1 ? PointLabel::positive : PointLabel::negative;
  p.object = {j.at("object").get<std::uint32_t>()};
  p.positions.clear();
  for (const auto& q : j.at("positions")) p.positions.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
  p.occlusion = j.at("occlusion").get<std::vector<double>>();
  p.end_frame = p.origin_frame + static_cast<int>(p.positions.size());
}

void to_json(nlohmann::json& j, const PointMemory& m) {
  j = {{"num_frames", m.num_frames()}, {"next_id", m.next_id()}, {"points", m.points()}};
}

void from_json(const nlohmann::json& j, PointMemory& m) {
  m = PointMemory::restore(j.at("num_frames").get<int>(), j.at("next_id").get<std::uint64_t>(),
                           j.at("points").get<std::vector<MemoryPoint>>());
}

void to_json(nlohmann::json& j, const InteractionEvent& e) {
  j = {{"kind", to_string(e.kind)},
       {"frame", e.frame},
       {"object", e.object.value},
       {"label", e.label == PointLabel::positive ? 1 : 0},
       {"x", e.position.x},
       {"y", e.position.y},
       {"point_id", e.point_id}};
}

void from_json(const nlohmann::json& j, InteractionEvent& e) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "add") {
    e.kind = EventKind::add;
  } else if (kind == "remove") {
    e.kind = EventKind::remove;
  } else if (kind == "noop") {
    e.kind = EventKind::noop;
  } else {
    fail(ErrorKind::invalid_input, "unknown event kind '" + kind + "'");
  }
  e.frame = j.at("frame").get<int>();
  e.object = {j.at("object").get<std::uint32_t>()};
  e.label = j.at("label").get<int>() == 1 ? PointLabel::positive : PointLabel::negative;
  e.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  e.point_id = j.at("point_id").get<std::uint64_t>();
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::add: return "add";
    case EventKind::remove: return "remove";
    case EventKind::noop: return "noop";
  }
  return "?";
}

std::optional<Point2> extract_point(const BinaryMask& region) {
  const auto pole = pole_of_inaccessibility(region);
  if (!pole) return std::nullopt;
  return center_of(*pole);
}

namespace {

bool visible(const PointMemory::FramePoint& p, const Frame& frame, const PipelineConfig& config) {
  return p.occlusion < config.occlusion_threshold && frame.in_bounds(p.point.position());
}

}  // namespace

InteractionEvent perform_interaction(int frame, const BinaryMask& pred, const BinaryMask& gt,
                                     PointMemory& memory, TrackerBackend& tracker,
                                     std::span<const Frame> frames, ObjectId object,
                                     const PipelineConfig& config, bool propagate) {
  InteractionEvent ev;
  ev.frame = frame;
  ev.object = object;
  if (pred == gt) return ev;
  const auto fn = gt.minus(pred);
  const auto fp = pred.minus(gt);
  const auto& img = frames[static_cast<std::size_t>(frame)];
  const auto points = memory.at(frame);
  auto first_inside = [&](PointLabel label, const BinaryMask& region) -> const PointMemory::FramePoint* {
    for (const auto& p : points) {
      if (p.point.object != object || p.point.label != label) continue;
      if (visible(p, img, config) && region.contains(p.point.position())) return &p;
    }
    return nullptr;
  };
  const auto* wrong = first_inside(PointLabel::negative, fn);
  if (wrong == nullptr) wrong = first_inside(PointLabel::positive, fp);
  if (wrong != nullptr) {
    ev.kind = EventKind::remove;
    ev.label = wrong->point.label;
    ev.position = wrong->point.position();
    ev.point_id = wrong->id;
    memory.remove_from(wrong->id, frame);
    return ev;
  }
  const bool positive = fn.area() > fp.area();
  const auto at = extract_point(positive ? fn : fp);
  require(at.has_value(), ErrorKind::precondition, "no error region to click in");
  ev.kind = EventKind::add;
  ev.label = positive ? PointLabel::positive : PointLabel::negative;
  ev.position = *at;
  ev.point_id = add_point(memory, tracker, frames, frame, *at, ev.label, object, propagate);
  return ev;
}

MemoryPredictor::MemoryPredictor(SegmenterBackend& segmenter, std::span<const Frame> frames,
                                 const PipelineConfig& config)
    : segmenter_(segmenter), frames_(frames), config_(config) {}

BinaryMask MemoryPredictor::predict(const PointMemory& memory, int frame) {
  const auto points = memory.at(frame);
  std::vector<std::uint64_t> key;
  std::vector<LabeledPoint> prompt;
  std::vector<double> occlusion;
  for (const auto& p : points) {
    key.push_back(p.id);
    prompt.push_back(p.point);
    occlusion.push_back(p.occlusion);
  }
  auto it = cache_.find(frame);
  if (it != cache_.end() && it->second.first == key) return it->second.second;
  const auto& img = frames_[static_cast<std::size_t>(frame)];
  auto result = two_pass_segment(segmenter_, img, prompt, occlusion, config_);
  calls_ += static_cast<std::size_t>(result.segmenter_calls);
  auto mask = std::move(result.prediction.mask);
  if (mask.width() != img.width() || mask.height() != img.height()) {
    mask = BinaryMask(img.width(), img.height());
  }
  cache_[frame] = {std::move(key), mask};
  return mask;
}

std::vector<BinaryMask> MemoryPredictor::predict_all(const PointMemory& memory) {
  std::vector<BinaryMask> out;
  out.reserve(frames_.size());
  for (int t = 0; t < static_cast<int>(frames_.size()); ++t) out.push_back(predict(memory, t));
  return out;
}

double mean_iou(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt) {
  require(pred.size() == gt.size(), ErrorKind::invalid_input, "frame count mismatch");
  if (gt.empty()) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += region_j(pred[i], gt[i]);
  return sum / static_cast<double>(gt.size());
}

namespace {

void check_inputs(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                  const BackendPair& backends) {
  require(!frames.empty() && frames.size() == gt.size(), ErrorKind::invalid_input,
          "need one ground-truth mask per frame");
  require(backends.tracker && backends.segmenter, ErrorKind::invalid_input, "missing backend");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    require(gt[i].width() == frames[i].width() && gt[i].height() == frames[i].height(),
            ErrorKind::invalid_input, "ground truth size differs from its frame");
  }
}

std::optional<int> first_visible(std::span<const BinaryMask> gt) {
  for (int t = 0; t < static_cast<int>(gt.size()); ++t) {
    if (!gt[static_cast<std::size_t>(t)].is_empty()) return t;
  }
  return std::nullopt;
}

// Shared state of the online and offline loops.
struct Session {
  std::span<const Frame> frames;
  std::span<const BinaryMask> gt;
  ObjectId object;
  TrackerBackend& tracker;
  const SimulationConfig& config;
  PointMemory memory;
  MemoryPredictor predictor;
  ObjectSimulation result;

  Session(std::span<const Frame> f, std::span<const BinaryMask> g, ObjectId o, BackendPair& b,
          const SimulationConfig& c)
      : frames(f), gt(g), object(o), tracker(*b.tracker), config(c),
        memory(static_cast<int>(f.size())), predictor(*b.segmenter, f, c.pipeline) {
    result.object = o;
  }

  double frame_iou(int t) {
    return region_j(predictor.predict(memory, t), gt[static_cast<std::size_t>(t)]);
  }

  void interact(int t) {
    const auto pred = predictor.predict(memory, t);
    result.log.push_back(perform_interaction(t, pred, gt[static_cast<std::size_t>(t)], memory,
                                             tracker, frames, object, config.pipeline));
    ++result.used;
  }

  // Click the pole of the first visible ground-truth mask.
  bool first_point() {
    const auto f = first_visible(gt);
    if (!f) return false;
    const auto at = *extract_point(gt[static_cast<std::size_t>(*f)]);
    InteractionEvent ev{EventKind::add, *f, object, PointLabel::positive, at, 0};
    ev.point_id = add_point(memory, tracker, frames, *f, at, PointLabel::positive, object);
    result.log.push_back(ev);
    ++result.used;
    return true;
  }

  double all_iou() {
    const auto all = predictor.predict_all(memory);
    return mean_iou(all, gt);
  }
};

void finish_curve(ObjectSimulation& r, int max_budget, double value_if_empty) {
  // Budgets after the run stopped keep the last value.
  double last = r.curve.empty() ? value_if_empty : r.curve.back().mean_iou;
  for (int b = static_cast<int>(r.curve.size()) + 1; b <= max_budget; ++b) r.curve.push_back({b, last});
}

}  // namespace

ObjectSimulation simulate_sam_only(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                   ObjectId object, int interactions_per_frame,
                                   BackendPair backends, const SimulationConfig& config) {
  check_inputs(frames, gt, backends);
  require(interactions_per_frame >= 1, ErrorKind::invalid_input,
          "interactions per frame must be at least 1");
  Session s(frames, gt, object, backends, config);
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    for (int k = 0; k < interactions_per_frame; ++k) {
      const auto pred = s.predictor.predict(s.memory, t);
      s.result.log.push_back(perform_interaction(t, pred, gt[static_cast<std::size_t>(t)], s.memory,
                                                 s.tracker, frames, object, config.pipeline, false));
      ++s.result.used;
    }
  }
  s.result.predictions = s.predictor.predict_all(s.memory);
  s.result.mean_iou = mean_iou(s.result.predictions, gt);
  s.result.curve.push_back({s.result.used, s.result.mean_iou});
  return s.result;
}

ObjectSimulation simulate_online(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                 ObjectId object, BackendPair backends,
                                 const SimulationConfig& config) {
  check_inputs(frames, gt, backends);
  require(config.max_interactions >= 1, ErrorKind::invalid_input, "budget must be at least 1");
  Session s(frames, gt, object, backends, config);
  auto& r = s.result;
  if (s.first_point()) {
    r.curve.push_back({r.used, s.all_iou()});
    for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
      if (s.frame_iou(t) >= config.threshold) continue;
      if (r.used >= config.max_interactions) break;
      s.interact(t);
      r.curve.push_back({r.used, s.all_iou()});
    }
  }
  r.predictions = s.predictor.predict_all(s.memory);
  r.mean_iou = mean_iou(r.predictions, gt);
  finish_curve(r, config.max_interactions, r.mean_iou);
  return r;
}

ObjectSimulation simulate_offline(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                  ObjectId object, BackendPair backends,
                                  const SimulationConfig& config) {
  check_inputs(frames, gt, backends);
  require(config.max_interactions >= 1, ErrorKind::invalid_input, "budget must be at least 1");
  require(config.max_interactions_per_frame >= 1, ErrorKind::invalid_input,
          "interactions per frame must be at least 1");
  Session s(frames, gt, object, backends, config);
  auto& r = s.result;
  std::vector<BinaryMask> best;
  // (budget used, mean IoU) at each checkpoint.
  std::vector<CurvePoint> checkpoints;
  if (s.first_point()) {
    best = s.predictor.predict_all(s.memory);
    checkpoints.push_back({r.used, mean_iou(best, gt)});
    for (double threshold : config.offline_thresholds) {
      bool complete = true;
      for (int t = 0; t < static_cast<int>(frames.size()) && complete; ++t) {
        for (int k = 0; k < config.max_interactions_per_frame; ++k) {
          if (s.frame_iou(t) >= threshold) break;
          if (r.used >= config.max_interactions) {
            complete = false;
            break;
          }
          s.interact(t);
        }
      }
      if (!complete) break;
      best = s.predictor.predict_all(s.memory);
      checkpoints.push_back({r.used, mean_iou(best, gt)});
    }
    r.predictions = best;
  } else {
    r.predictions = s.predictor.predict_all(s.memory);
  }
  r.mean_iou = mean_iou(r.predictions, gt);
  std::size_t c = 0;
  for (int b = 1; b <= config.max_interactions; ++b) {
    while (c + 1 < checkpoints.size() && checkpoints[c + 1].budget <= b) ++c;
    const double v = checkpoints.empty() ? r.mean_iou : checkpoints[c].mean_iou;
    r.curve.push_back({b, v});
  }
  return r;
}

SimulationMethod simulation_method_from_string(std::string_view name) {
  if (name == "sam-only") return SimulationMethod::sam_only;
  if (name == "online") return SimulationMethod::online;
  if (name == "offline") return SimulationMethod::offline;
  fail(ErrorKind::invalid_input, "unknown simulation method: " + std::string(name));
}

SequenceSimulation simulate_sequence(SimulationMethod method, const VideoSequence& video,
                                     BackendPair backends, const SimulationConfig& config) {
  require(!video.ground_truth.empty(), ErrorKind::invalid_input,
          "simulation needs ground truth for " + video.id);
  SequenceSimulation out;
  out.sequence = video.id;
  const int n = video.num_frames();
  if (method == SimulationMethod::sam_only) {
    const int max_k = std::max(1, config.max_interactions / std::max(1, n));
    for (int k = 1; k <= max_k; ++k) {
      std::vector<ObjectSimulation> objects;
      double sum = 0.0;
      for (const auto& [id, gt] : video.ground_truth) {
        objects.push_back(simulate_sam_only(video.frames, gt, id, k, backends, config));
        sum += objects.back().mean_iou;
      }
      out.curve.push_back({k * n, sum / static_cast<double>(objects.size())});
      out.objects = std::move(objects);
    }
    return out;
  }
  for (const auto& [id, gt] : video.ground_truth) {
    out.objects.push_back(method == SimulationMethod::online
                              ? simulate_online(video.frames, gt, id, backends, config)
                              : simulate_offline(video.frames, gt, id, backends, config));
  }
  for (int b = 1; b <= config.max_interactions; ++b) {
    double sum = 0.0;
    for (const auto& o : out.objects) sum += o.curve[static_cast<std::size_t>(b - 1)].mean_iou;
    out.curve.push_back({b, sum / static_cast<double>(out.objects.size())});
  }
  return out;
}

}  // namespace ptseg
