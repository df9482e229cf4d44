#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ptseg/types.hpp"

namespace ptseg {

/// Intersection over union; 1 when both masks are empty.
double region_j(const BinaryMask& pred, const BinaryMask& gt);

/// Pixels whose value differs from the right, lower or lower-right
/// neighbour (the DAVIS boundary convention).
BinaryMask boundary_map(const BinaryMask& mask);

/// ceil(0.008 * image diagonal).
int default_boundary_tolerance(int width, int height);

struct ContourScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Boundary precision and recall, counting a boundary pixel as matched when
/// the other boundary has a pixel within `tolerance` (Euclidean). Both
/// boundaries empty scores 1; exactly one empty scores 0.
ContourScore contour_score(const BinaryMask& pred, const BinaryMask& gt, int tolerance);
double contour_f(const BinaryMask& pred, const BinaryMask& gt, int tolerance);
double contour_f(const BinaryMask& pred, const BinaryMask& gt);

enum class VisibilityBucket { short_span, medium_span, long_span };
std::string_view to_string(VisibilityBucket b);
/// short 1-5, medium 6-30, long 31+ frames with non-empty ground truth.
VisibilityBucket visibility_bucket(int visible_frames);

struct ObjectScore {
  ObjectId object;
  /// First frame with non-empty ground truth; it is not scored.
  int first_frame = 0;
  std::vector<int> frames;
  std::vector<double> j;
  std::vector<double> f;
  /// Scored frames without a prediction; they count as 0.
  std::vector<int> missing_frames;
  int visible_frames = 0;
  VisibilityBucket bucket = VisibilityBucket::short_span;
  double mean_j = 0.0;
  double mean_f = 0.0;
  double jf = 0.0;
  /// False when the object has no frame after its first one.
  bool scored() const { return !frames.empty(); }
};

struct SequenceScore {
  std::string sequence;
  std::vector<ObjectScore> objects;
  double mean_j = 0.0;
  double mean_f = 0.0;
  double jf = 0.0;
};

struct BucketScore {
  int objects = 0;
  double mean_j = 0.0;
  double mean_f = 0.0;
  double jf = 0.0;
};

struct DatasetScore {
  std::vector<SequenceScore> sequences;
  /// Means over every scored object in the dataset.
  double mean_j = 0.0;
  double mean_f = 0.0;
  double jf = 0.0;
  std::map<VisibilityBucket, BucketScore> buckets;
};

/// Scores `pred` against `gt`. Prediction frames may be missing (absent
/// object, short vector or a 0x0 mask). Objects absent from `gt` are ignored.
SequenceScore score_sequence(std::string sequence, const ObjectMasks& pred, const ObjectMasks& gt,
                             std::optional<int> tolerance = std::nullopt);

DatasetScore aggregate(std::vector<SequenceScore> sequences);

void to_json(nlohmann::json& j, const DatasetScore& s);

}  // namespace ptseg
