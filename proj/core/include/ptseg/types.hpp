#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptseg/image.hpp"

namespace ptseg {

/// Positive integer identifying an object within one sequence.
struct ObjectId {
  std::uint32_t value = 0;

  friend auto operator<=>(const ObjectId&, const ObjectId&) = default;
};

enum class PointLabel : std::uint8_t { negative = 0, positive = 1 };

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  PointLabel label = PointLabel::positive;
  ObjectId object;

  Point2 position() const { return {x, y}; }
  bool positive() const { return label == PointLabel::positive; }

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

/// Labeled query points for one object at a reference frame.
struct QueryPointSet {
  int frame = 0;
  std::vector<LabeledPoint> points;

  std::size_t positive_count() const;
  std::size_t negative_count() const;
};

/// Positions and occlusion scores of tracked points over consecutive frames,
/// starting at the query frame. The start frame holds the queries verbatim
/// and is never occluded.
class TrajectoryBundle {
 public:
  TrajectoryBundle() = default;
  TrajectoryBundle(int start_frame, int num_frames, std::vector<LabeledPoint> queries);

  int start_frame() const { return start_frame_; }
  int num_frames() const { return num_frames_; }
  int end_frame() const { return start_frame_ + num_frames_ - 1; }
  int num_points() const { return static_cast<int>(queries_.size()); }
  bool covers(int frame) const { return frame >= start_frame_ && frame <= end_frame(); }

  const std::vector<LabeledPoint>& queries() const { return queries_; }

  Point2 position(int frame, int point) const { return positions_[offset(frame, point)]; }
  double occlusion(int frame, int point) const { return occlusion_[offset(frame, point)]; }

  /// Throws invalid_input when writing the start frame or a score outside [0,1].
  void set(int frame, int point, Point2 position, double occlusion);
  void set_occlusion(int frame, int point, double occlusion);

  /// Query labels and objects with positions at `frame`.
  std::vector<LabeledPoint> points_at(int frame) const;
  std::vector<double> occlusion_at(int frame) const;

  friend bool operator==(const TrajectoryBundle&, const TrajectoryBundle&) = default;

 private:
  std::size_t offset(int frame, int point) const;

  int start_frame_ = 0;
  int num_frames_ = 0;
  std::vector<LabeledPoint> queries_;
  std::vector<Point2> positions_;
  std::vector<double> occlusion_;
};

/// Opaque token for a dense mask prior held by the backend that issued it.
struct PriorHandle {
  std::uint64_t value = 0;

  friend auto operator<=>(const PriorHandle&, const PriorHandle&) = default;
};

struct MaskPrediction {
  BinaryMask mask;
  std::optional<PriorHandle> dense_prior;
  ObjectId object;
  int frame = 0;
};

/// Full-length per-frame masks per object.
using ObjectMasks = std::map<ObjectId, std::vector<BinaryMask>>;

struct VideoSequence {
  std::string id;
  std::vector<Frame> frames;
  /// Optional; when present every object has one mask per frame.
  ObjectMasks ground_truth;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

}  // namespace ptseg
