#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stop_token>
#include <vector>

#include "ptseg/backend.hpp"
#include "ptseg/config.hpp"

namespace ptseg {

struct TwoPassResult {
  MaskPrediction prediction;
  /// No visible positive point: the mask is empty and the segmenter was not
  /// called.
  bool flagged = false;
  int segmenter_calls = 0;
  /// Points dropped for occlusion or for lying outside the frame.
  int gated_points = 0;
};

/// Prompts the segmenter with the points visible at this frame: positives
/// alone first, then positives and negatives with the previous mask as prior,
/// repeated `refinement_iterations` more times.
TwoPassResult two_pass_segment(SegmenterBackend& segmenter, const Frame& frame,
                               std::span<const LabeledPoint> points,
                               std::span<const double> occlusion, const PipelineConfig& config);

/// Mean squared difference of the 7x7 RGB patches (values in [0, 1]) around
/// `pa` in `a` and `pb` in `b`. Samples outside the image are clamped.
double patch_difference(const Frame& a, Point2 pa, const Frame& b, Point2 pb);

/// Marks a point occluded on every frame where its patch differs from the one
/// at its query by more than `threshold`. `frames` is the whole video.
TrajectoryBundle filter_by_patch_similarity(const TrajectoryBundle& bundle,
                                            std::span<const Frame> frames, double threshold);

/// Offset into the window of the frame to reinitialize from, for one object.
/// Returns none when every mask in the window is empty, and for the area
/// variants also when no frame qualifies. `off` never triggers; the synced
/// variant behaves like similar_area for a single object.
std::optional<int> reinit_trigger(ReinitVariant variant, std::span<const std::size_t> window_areas,
                                  std::size_t initial_area, double band = 0.25);

/// Earliest offset at which every object passes the area similarity test.
std::optional<int> synced_reinit_trigger(std::span<const std::vector<std::size_t>> window_areas,
                                         std::span<const std::size_t> initial_areas,
                                         double band = 0.25);

/// Initial prompt for one object: either a mask to sample query points from,
/// or explicit points (used when `mask` is 0x0).
struct ObjectPrompt {
  ObjectId object;
  int frame = 0;
  BinaryMask mask;
  std::vector<LabeledPoint> points;
};

struct ObjectResult {
  int first_frame = 0;
  QueryPointSet initial_queries;
  /// One mask per frame from `first_frame` to the end of the video.
  std::vector<BinaryMask> masks;
  std::optional<int> disappeared_at;
  /// Frames predicted empty because no positive point was visible.
  std::vector<int> flagged_frames;
};

struct ReinitEvent {
  ObjectId object;
  int frame = 0;
  friend bool operator==(const ReinitEvent&, const ReinitEvent&) = default;
};

struct PipelineDiagnostics {
  std::vector<ReinitEvent> reinit_events;
  std::size_t segmenter_calls = 0;
  std::size_t tracker_calls = 0;
  std::size_t gated_points = 0;
  double seconds = 0.0;
};

struct PipelineRun {
  PipelineConfig config;
  std::map<ObjectId, ObjectResult> objects;
  PipelineDiagnostics diagnostics;

  /// Full-length masks, empty before each object's first frame.
  ObjectMasks masks(int num_frames) const;
};

struct RunOptions {
  /// Called with the fraction of (object, frame) pairs segmented so far.
  std::function<void(double)> progress;
  std::stop_token stop;
};

/// Segments every prompted object through the rest of the video. Throws
/// precondition when stopped through `options.stop`.
PipelineRun run_pipeline(const VideoSequence& video, std::span<const ObjectPrompt> prompts,
                         const PipelineConfig& config, TrackerBackend& tracker,
                         SegmenterBackend& segmenter, const RunOptions& options = {});

/// Seed used to sample an object's query points at a frame.
std::uint64_t query_seed(std::uint64_t rng_seed, ObjectId object, int frame);

/// Positive points sampled from `mask` plus negatives from its complement.
std::vector<LabeledPoint> sample_query_points(const BinaryMask& mask, const Frame& frame,
                                              ObjectId object, const PipelineConfig& config,
                                              std::uint64_t seed);

}  // namespace ptseg
