#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ptseg/image.hpp"
#include "ptseg/types.hpp"

namespace ptseg {

struct TrackerCapabilities {
  bool predicts_occlusion = true;
  /// Frames per call for windowed trackers; absent means whole clips.
  std::optional<int> window_size;
};

/// Long-term point tracker. `frames` is a contiguous clip whose first frame
/// is the query frame; the returned bundle covers every frame in it.
class TrackerBackend {
 public:
  virtual ~TrackerBackend() = default;
  virtual TrackerCapabilities capabilities() const = 0;
  virtual TrajectoryBundle track(std::span<const LabeledPoint> queries,
                                 std::span<const Frame> frames) = 0;
};

struct SegmenterCapabilities {
  bool accepts_dense_prior = true;
  bool proposes_masks = false;
};

/// Promptable segmenter. Stateless across frames except for the dense
/// priors it hands out, which are only valid on the issuing backend.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual SegmenterCapabilities capabilities() const = 0;
  virtual MaskPrediction segment(const Frame& frame, std::span<const LabeledPoint> points,
                                 std::optional<PriorHandle> prior) = 0;
  /// Throws unsupported_capability unless `proposes_masks`.
  virtual std::vector<BinaryMask> propose_masks(const Frame& frame, int max_proposals);
};

struct BackendPair {
  std::shared_ptr<TrackerBackend> tracker;
  std::shared_ptr<SegmenterBackend> segmenter;
};

/// Checks that `frames` is non-empty and contiguous, and that `queries` is
/// non-empty and lies inside the first frame.
void validate_track_request(std::span<const LabeledPoint> queries, std::span<const Frame> frames);

/// Throws protocol when `bundle` does not match the request shape or moves
/// the query frame.
void validate_track_response(const TrajectoryBundle& bundle,
                             std::span<const LabeledPoint> queries,
                             std::span<const Frame> frames);

/// Tracks through `backend`, splitting the clip into windows when the
/// backend advertises a window size. Consecutive windows share one frame; the
/// last position of each point in a window is its query in the next, and the
/// earlier window's values are kept on the shared frame.
TrajectoryBundle track_points(TrackerBackend& backend, std::span<const LabeledPoint> queries,
                              std::span<const Frame> frames);

/// Sorts by area (descending, stable), drops empties and masks with IoU > 0.9
/// against an already kept one, and truncates to `max_proposals`.
std::vector<BinaryMask> normalize_proposals(std::vector<BinaryMask> masks, int max_proposals);

}  // namespace ptseg
