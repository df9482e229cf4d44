#pragma once

// DAVIS-style datasets on disk, MOTS conversion, and the semi-supervised and
// first-frame-proposal evaluation drivers.
//
// DAVIS layout:
//   <root>/JPEGImages/<seq>/<stem>.jpg|png    frames, sorted by file name
//   <root>/Annotations/<seq>/<stem>.png       indexed PNG, value = object id
//   <root>/Scenes/<seq>.json                  optional synthetic scene spec
//
// MOTS layout:
//   <root>/<seq>/instances/<stem>.png         indexed PNG, value = instance value
//   <root>/<seq>/tracks.json                  {"tracks": [{"value", "track_id",
//                                               "ignored", "crowd"}]}
//   <root>/<seq>/frames/<stem>.jpg|png        optional

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ptseg/backend.hpp"
#include "ptseg/config.hpp"
#include "ptseg/pipeline.hpp"

namespace ptseg {

struct VosObject {
  ObjectId id;
  int first_frame = 0;
  BinaryMask seed_mask;
};

struct VosDatapoint {
  std::string sequence;
  /// Frames and full ground truth.
  VideoSequence video;
  std::vector<std::string> frame_stems;
  /// Ordered by id.
  std::vector<VosObject> objects;
  std::optional<std::filesystem::path> scene_path;
};

/// Objects are the label values present anywhere in the sequence, seeded at
/// their first non-empty frame. Frames without an annotation file count as
/// unannotated background.
VosDatapoint load_davis_sequence(const std::filesystem::path& root, const std::string& sequence);
std::vector<VosDatapoint> load_davis_dir(const std::filesystem::path& root);
/// Objects seeded at their first non-empty ground-truth frame.
VosDatapoint datapoint_from_video(VideoSequence video);

/// Paints objects in ascending id order; later ids win on overlap.
LabelMap labels_from_masks(const ObjectMasks& masks, int frame, int width, int height);
ObjectMasks masks_from_labels(const std::vector<LabelMap>& labels);

/// Writes frames as PNG and ground truth as indexed PNG, named 00000, 00001...
void write_davis_sequence(const std::filesystem::path& root, const VideoSequence& video);

/// `<dir>/<stem>.png` per frame.
void write_label_pngs(const std::filesystem::path& dir, const ObjectMasks& masks,
                      const std::vector<std::string>& stems, int width, int height);
/// Reads `<dir>/<stem>.png` per stem; missing files yield 0x0 masks, which
/// scoring treats as missing predictions.
ObjectMasks read_label_pngs(const std::filesystem::path& dir, const std::vector<std::string>& stems);

std::vector<std::string> default_stems(int num_frames);

struct MotsTrack {
  std::uint8_t value = 0;
  std::uint32_t track_id = 0;
  bool ignored = false;
  bool crowd = false;
};

struct MotsObject {
  ObjectId id;
  std::uint32_t track_id = 0;
  int first_frame = 0;
};

struct MotsConversion {
  /// Renumbered 1..N by (first appearance, track id).
  ObjectMasks masks;
  std::vector<MotsObject> objects;
  int dropped_flagged = 0;
  int dropped_empty = 0;
  int dropped_overflow = 0;
  std::vector<std::string> warnings;
};

constexpr int kMaxObjectsPerVideo = 100;

MotsConversion convert_mots_sequence(const std::vector<LabelMap>& instances,
                                     const std::vector<MotsTrack>& tracks,
                                     int max_objects = kMaxObjectsPerVideo);

/// Converts every sequence under `input` into a DAVIS layout under `output`,
/// plus `<output>/Objects/<seq>.json` with the track mapping. Sequences
/// without frames get black frames of the annotation size.
std::vector<std::pair<std::string, MotsConversion>> convert_mots(const std::filesystem::path& input,
                                                                 const std::filesystem::path& output);

struct SequencePrediction {
  std::string sequence;
  /// Full length, original resolution; empty before each object's seed frame.
  ObjectMasks masks;
  std::optional<PipelineRun> run;
  std::optional<std::string> error;
};

using BackendFactory = std::function<BackendPair(const VosDatapoint&)>;

struct SemisupervisedOptions {
  /// Resize so the longest side equals this before running; masks are mapped
  /// back to the original resolution.
  std::optional<int> longest_side;
};

/// Samples query points from each seed mask and runs the pipeline on the
/// points alone. Errors are recorded per sequence.
std::vector<SequencePrediction> run_semisupervised(const std::vector<VosDatapoint>& dataset,
                                                   const PipelineConfig& config,
                                                   const BackendFactory& backends,
                                                   const SemisupervisedOptions& options = {});
SequencePrediction run_semisupervised_sequence(const VosDatapoint& datapoint,
                                               const PipelineConfig& config, BackendPair backends,
                                               const SemisupervisedOptions& options = {});

/// Seeds one object per first-frame mask proposal.
SequencePrediction run_first_frame_proposals(const VideoSequence& video, int max_proposals,
                                             const PipelineConfig& config, BackendPair backends);

}  // namespace ptseg
