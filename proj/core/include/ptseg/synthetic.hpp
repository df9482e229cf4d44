#pragma once

// Parametric test videos with exact ground truth, and oracle backends that
// answer from the scene geometry.

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ptseg/backend.hpp"

namespace ptseg {

enum class ShapeKind { disk, rect, polygon };
enum class MotionKind { constant, linear, sinusoidal };

/// Closed-form anchor position:
///   constant    origin
///   linear      origin + velocity * t
///   sinusoidal  origin + amplitude * sin(2 pi t / period + phase), per axis
struct Motion {
  MotionKind kind = MotionKind::constant;
  Point2 origin;
  Point2 velocity;
  Point2 amplitude;
  double period = 1.0;
  double phase = 0.0;

  Point2 at(double t) const;
};

struct ShapeSpec {
  /// Object id (>= 1) for tracked shapes; 0 for occluders.
  std::uint32_t id = 0;
  ShapeKind kind = ShapeKind::disk;
  /// Disk radius.
  double radius = 0.0;
  /// Rect width and height, centered on the anchor.
  double width = 0.0;
  double height = 0.0;
  /// Polygon vertices relative to the anchor.
  std::vector<Point2> vertices;
  Rgb color;
  Motion motion;
  /// Higher depth is closer to the camera. Depths are unique per scene.
  int depth = 0;
  /// Frames [visible_from, visible_until) in which the shape exists.
  int visible_from = 0;
  std::optional<int> visible_until;

  bool active(int t) const;
  /// Containment of a continuous point at frame t, ignoring other shapes.
  bool contains(Point2 p, int t) const;
};

struct NoiseSpec {
  double boundary_dilation_px = 0.0;
  double point_jitter_sigma = 0.0;
  double occlusion_flip_prob = 0.0;
  double mask_flip_prob = 0.0;

  bool is_zero() const;
};

struct SceneSpec {
  std::string name = "scene";
  int width = 64;
  int height = 64;
  int duration = 1;
  Rgb background{16, 16, 16};
  std::vector<ShapeSpec> shapes;
  std::vector<ShapeSpec> occluders;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  /// Throws invalid_input: bad canvas, zero-area or off-canvas shapes,
  /// duplicate ids or depths.
  void validate() const;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
SceneSpec load_scene(const std::string& path);
void save_scene(const SceneSpec& spec, const std::string& path);

/// Evaluated scene geometry: all shapes and occluders as depth-ordered layers.
class SceneGeometry {
 public:
  explicit SceneGeometry(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  /// Layers sorted by ascending depth.
  const std::vector<ShapeSpec>& layers() const { return layers_; }
  /// Shape pixels (centers inside), ignoring other layers; empty when inactive.
  BinaryMask raw_mask(std::size_t layer, int t) const;
  /// Raw mask minus every active layer of strictly greater depth.
  BinaryMask visible_mask(std::size_t layer, int t) const;
  /// Index of the topmost active layer containing `p`, if any.
  std::optional<std::size_t> topmost_at(Point2 p, int t) const;
  /// True when an active layer deeper-than-`depth` (closer) covers `p`.
  bool covered_above(Point2 p, int t, std::optional<int> depth) const;
  std::optional<std::size_t> layer_of_object(ObjectId id) const;

 private:
  SceneSpec spec_;
  std::vector<ShapeSpec> layers_;
};

/// Frames plus per-object visible masks for every frame.
VideoSequence render(const SceneSpec& spec);

/// Positions follow the closed-form motion of the shape a query lies on at
/// the query frame; background queries stay put. Adds independent Gaussian
/// jitter per frame and axis. Occlusion is 1 while the true point is covered
/// by a closer layer, outside the canvas or on a shape that no longer exists,
/// each score flipped with the configured probability.
class OracleTracker final : public TrackerBackend {
 public:
  explicit OracleTracker(SceneSpec spec, std::optional<int> window_size = std::nullopt);
  TrackerCapabilities capabilities() const override;
  TrajectoryBundle track(std::span<const LabeledPoint> queries,
                         std::span<const Frame> frames) override;

 private:
  SceneGeometry scene_;
  std::optional<int> window_size_;
};

/// Returns the visible mask of the layer most positive points fall on,
/// dilated, flipped and with the layers under negative points removed. Ties
/// go to the layer overlapping the prior mask most, then to the layer of the
/// earliest point. Noise depends only on (seed, frame, layer), so repeating
/// a request yields the same answer.
class OracleSegmenter final : public SegmenterBackend {
 public:
  explicit OracleSegmenter(SceneSpec spec);
  SegmenterCapabilities capabilities() const override;
  MaskPrediction segment(const Frame& frame, std::span<const LabeledPoint> points,
                         std::optional<PriorHandle> prior) override;
  /// Visible masks of the tracked shapes at the frame, normalized.
  std::vector<BinaryMask> propose_masks(const Frame& frame, int max_proposals) override;

  static constexpr std::size_t kMaxPriors = 4096;

 private:
  const std::vector<BinaryMask>& visible_at(int t);
  BinaryMask noisy_layer_mask(std::size_t layer, int t);

  SceneGeometry scene_;
  std::mutex mutex_;
  std::map<int, std::vector<BinaryMask>> visible_cache_;
  std::map<std::uint64_t, BinaryMask> priors_;
  std::deque<std::uint64_t> prior_order_;
  std::uint64_t next_prior_ = 1;
};

BackendPair oracle_backends(const SceneSpec& spec);

// Preset scenes.

/// Ten 128x128, 24-frame scenes with one to three objects. Bars sweep across
/// the canvas so every object centre is hidden for a few frames while at
/// least a quarter of its area stays visible.
std::vector<SceneSpec> synthetic_suite(const NoiseSpec& noise = {}, std::uint64_t seed = 0);
SceneSpec suite_scene(int index, const NoiseSpec& noise = {}, std::uint64_t seed = 0);
/// The right half of an object is hidden until frame 10; from frame 18 on
/// its left half is hidden instead.
SceneSpec reveal_scene(const NoiseSpec& noise = {}, std::uint64_t seed = 0);
/// An object that is fully covered from frame 12 to the end.
SceneSpec vanish_scene(const NoiseSpec& noise = {}, std::uint64_t seed = 0);
/// Static disk, rect and polygon without occluders.
SceneSpec three_shapes_scene();

}  // namespace ptseg
