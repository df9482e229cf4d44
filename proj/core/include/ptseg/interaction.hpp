#pragma once

// Simulated point-clicking annotator: a SAM-only baseline, a single-pass
// online method and a multi-pass offline checkpoint method, all driven by
// the same add/remove interaction primitive.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ptseg/backend.hpp"
#include "ptseg/config.hpp"

namespace ptseg {

/// One point with its lineage. It exists on frames [origin_frame, end_frame),
/// where it was tracked from its origin; removal truncates the future.
struct MemoryPoint {
  std::uint64_t id = 0;
  int origin_frame = 0;
  PointLabel label = PointLabel::positive;
  ObjectId object;
  /// Tracked position and occlusion per frame from `origin_frame`.
  std::vector<Point2> positions;
  std::vector<double> occlusion;
  int end_frame = 0;

  bool exists_at(int frame) const { return frame >= origin_frame && frame < end_frame; }
  friend bool operator==(const MemoryPoint&, const MemoryPoint&) = default;
};

class PointMemory {
 public:
  PointMemory() = default;
  explicit PointMemory(int num_frames) : num_frames_(num_frames) {}

  int num_frames() const { return num_frames_; }
  /// Adds a point at `frame` with its trajectory (frames frame, frame+1, ...).
  /// Ids grow with insertion order, so they double as timestamps.
  std::uint64_t add(int frame, PointLabel label, ObjectId object, std::vector<Point2> positions,
                    std::vector<double> occlusion);
  /// Deletes the point on `frame` and every later frame. Throws not_found for
  /// unknown ids or points that do not exist at `frame`.
  void remove_from(std::uint64_t id, int frame);
  /// Replaces the trajectory of `id` from `frame` on (the point must exist
  /// at `frame`); the new trajectory may end earlier or later than the old.
  void retrack(std::uint64_t id, int frame, std::vector<Point2> positions,
               std::vector<double> occlusion);
  const MemoryPoint* find(std::uint64_t id) const;
  std::uint64_t next_id() const { return next_id_; }
  /// Rebuilds a saved memory; throws invalid_input when inconsistent.
  static PointMemory restore(int num_frames, std::uint64_t next_id, std::vector<MemoryPoint> points);

  struct FramePoint {
    std::uint64_t id;
    LabeledPoint point;
    double occlusion;
  };
  /// Points existing at `frame`, oldest first.
  std::vector<FramePoint> at(int frame) const;
  const std::vector<MemoryPoint>& points() const { return points_; }

  friend bool operator==(const PointMemory&, const PointMemory&) = default;

 private:
  int num_frames_ = 0;
  std::uint64_t next_id_ = 1;
  std::vector<MemoryPoint> points_;
};

/// Tracks a new point from `frame` to the end of `frames` and adds it.
/// With `propagate` false the point lives on `frame` only.
std::uint64_t add_point(PointMemory& memory, TrackerBackend& tracker,
                        std::span<const Frame> frames, int frame, Point2 position,
                        PointLabel label, ObjectId object, bool propagate = true);

enum class EventKind { add, remove, noop };
std::string_view to_string(EventKind k);

struct InteractionEvent {
  EventKind kind = EventKind::noop;
  int frame = 0;
  ObjectId object;
  PointLabel label = PointLabel::positive;
  Point2 position;
  std::uint64_t point_id = 0;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

void to_json(nlohmann::json& j, const MemoryPoint& p);
void from_json(const nlohmann::json& j, MemoryPoint& p);
void to_json(nlohmann::json& j, const PointMemory& m);
void from_json(const nlohmann::json& j, PointMemory& m);
void to_json(nlohmann::json& j, const InteractionEvent& e);
void from_json(const nlohmann::json& j, InteractionEvent& e);

/// Pixel center of the region's pole of inaccessibility.
std::optional<Point2> extract_point(const BinaryMask& region);

/// One corrective interaction at `frame`, in this order: remove the oldest
/// visible negative point inside the false-negative region; else remove the
/// oldest visible positive point inside the false-positive region; else add
/// a positive point in the false negatives when they outnumber the false
/// positives, a negative one in the false positives otherwise. `pred == gt`
/// yields a no-op.
InteractionEvent perform_interaction(int frame, const BinaryMask& pred, const BinaryMask& gt,
                                     PointMemory& memory, TrackerBackend& tracker,
                                     std::span<const Frame> frames, ObjectId object,
                                     const PipelineConfig& config, bool propagate = true);

/// Segments frames from a point memory, caching per frame on the set of
/// points present there.
class MemoryPredictor {
 public:
  MemoryPredictor(SegmenterBackend& segmenter, std::span<const Frame> frames,
                  const PipelineConfig& config);
  BinaryMask predict(const PointMemory& memory, int frame);
  std::vector<BinaryMask> predict_all(const PointMemory& memory);
  std::size_t segmenter_calls() const { return calls_; }

 private:
  SegmenterBackend& segmenter_;
  std::span<const Frame> frames_;
  const PipelineConfig& config_;
  std::map<int, std::pair<std::vector<std::uint64_t>, BinaryMask>> cache_;
  std::size_t calls_ = 0;
};

struct SimulationConfig {
  int max_interactions = 300;
  int max_interactions_per_frame = 3;
  double threshold = 0.95;
  std::vector<double> offline_thresholds{0.10, 0.20, 0.30, 0.40, 0.50,
                                         0.60, 0.70, 0.80, 0.90, 0.95};
  /// Segmentation settings (refinement iterations, occlusion threshold).
  PipelineConfig pipeline;
};

struct CurvePoint {
  int budget = 0;
  double mean_iou = 0.0;
};

struct ObjectSimulation {
  ObjectId object;
  std::vector<BinaryMask> predictions;
  std::vector<InteractionEvent> log;
  /// Mean IoU the method returns when allowed `budget` interactions. Online
  /// and offline runs report every budget from 1 to the configured maximum;
  /// a SAM-only run reports its single total.
  std::vector<CurvePoint> curve;
  /// Interactions counted against the budget.
  int used = 0;
  double mean_iou = 0.0;
};

/// Mean over frames of IoU (both empty scores 1).
double mean_iou(std::span<const BinaryMask> pred, std::span<const BinaryMask> gt);

ObjectSimulation simulate_sam_only(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                   ObjectId object, int interactions_per_frame,
                                   BackendPair backends, const SimulationConfig& config = {});
ObjectSimulation simulate_online(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                 ObjectId object, BackendPair backends,
                                 const SimulationConfig& config = {});
ObjectSimulation simulate_offline(std::span<const Frame> frames, std::span<const BinaryMask> gt,
                                  ObjectId object, BackendPair backends,
                                  const SimulationConfig& config = {});

enum class SimulationMethod { sam_only, online, offline };
SimulationMethod simulation_method_from_string(std::string_view name);

struct SequenceSimulation {
  std::string sequence;
  std::vector<ObjectSimulation> objects;
  /// Mean over objects per budget.
  std::vector<CurvePoint> curve;
};

/// Simulates every ground-truth object independently, each with its own
/// budget. SAM-only runs k interactions per frame for k = 1, 2, ... while
/// k times the frame count fits the budget (at least once); `objects` holds
/// the largest k.
SequenceSimulation simulate_sequence(SimulationMethod method, const VideoSequence& video,
                                     BackendPair backends, const SimulationConfig& config = {});

}  // namespace ptseg
