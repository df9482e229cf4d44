#include "ptseg/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"
#include "ptseg/image_io.hpp"

namespace fs = std::filesystem;

namespace ptseg {

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> list_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::string> default_stems(int num_frames) {
  std::vector<std::string> out;
  char buf[16];
  for (int t = 0; t < num_frames; ++t) {
    std::snprintf(buf, sizeof(buf), "%05d", t);
    out.emplace_back(buf);
  }
  return out;
}

ObjectMasks masks_from_labels(const std::vector<LabelMap>& labels) {
  std::set<std::uint8_t> present;
  for (const auto& l : labels) {
    for (auto v : l.present_labels()) present.insert(v);
  }
  ObjectMasks out;
  for (auto v : present) {
    auto& masks = out[ObjectId{v}];
    for (const auto& l : labels) masks.push_back(l.mask_of(v));
  }
  return out;
}

LabelMap labels_from_masks(const ObjectMasks& masks, int frame, int width, int height) {
  LabelMap out(width, height);
  for (const auto& [id, v] : masks) {
    require(id.value >= 1 && id.value <= 255, ErrorKind::invalid_input,
            "object id " + std::to_string(id.value) + " does not fit an indexed PNG");
    if (frame >= static_cast<int>(v.size())) continue;
    const auto& m = v[frame];
    if (m.width() == 0 && m.height() == 0) continue;
    require(m.width() == width && m.height() == height, ErrorKind::invalid_input,
            "mask size does not match the frame");
    out.paint(m, static_cast<std::uint8_t>(id.value));
  }
  return out;
}

VosDatapoint datapoint_from_video(VideoSequence video) {
  VosDatapoint dp;
  dp.sequence = video.id;
  dp.frame_stems = default_stems(video.num_frames());
  for (const auto& [id, masks] : video.ground_truth) {
    for (int t = 0; t < static_cast<int>(masks.size()); ++t) {
      if (!masks[t].is_empty()) {
        dp.objects.push_back({id, t, masks[t]});
        break;
      }
    }
  }
  dp.video = std::move(video);
  return dp;
}

VosDatapoint load_davis_sequence(const fs::path& root, const std::string& sequence) {
  VosDatapoint dp;
  dp.sequence = sequence;
  dp.video.id = sequence;
  const auto frame_files = list_images(root / "JPEGImages" / sequence);
  require(!frame_files.empty(), ErrorKind::invalid_dataset,
          "sequence '" + sequence + "' has no frames");
  std::vector<LabelMap> labels;
  for (std::size_t t = 0; t < frame_files.size(); ++t) {
    dp.video.frames.push_back(read_image(frame_files[t].string(), static_cast<int>(t)));
    const auto& f = dp.video.frames.back();
    require(f.width() == dp.video.frames.front().width() &&
                f.height() == dp.video.frames.front().height(),
            ErrorKind::invalid_dataset, "frames of '" + sequence + "' differ in size");
    dp.frame_stems.push_back(frame_files[t].stem().string());
    const auto ann = root / "Annotations" / sequence / (dp.frame_stems.back() + ".png");
    if (fs::exists(ann)) {
      labels.push_back(read_indexed_png(ann.string()));
      require(labels.back().width() == f.width() && labels.back().height() == f.height(),
              ErrorKind::invalid_dataset, ann.string() + " does not match its frame size");
    } else {
      labels.emplace_back(f.width(), f.height());
    }
  }
  dp.video.ground_truth = masks_from_labels(labels);
  dp.objects = datapoint_from_video(dp.video).objects;
  const auto scene = root / "Scenes" / (sequence + ".json");
  if (fs::exists(scene)) dp.scene_path = scene;
  return dp;
}

std::vector<VosDatapoint> load_davis_dir(const fs::path& root) {
  const auto frames = root / "JPEGImages";
  require(fs::is_directory(frames), ErrorKind::invalid_dataset,
          root.string() + " has no JPEGImages directory");
  std::vector<VosDatapoint> out;
  for (const auto& dir : list_dirs(frames)) {
    out.push_back(load_davis_sequence(root, dir.filename().string()));
  }
  require(!out.empty(), ErrorKind::invalid_dataset, root.string() + " contains no sequences");
  return out;
}

void write_label_pngs(const fs::path& dir, const ObjectMasks& masks,
                      const std::vector<std::string>& stems, int width, int height) {
  fs::create_directories(dir);
  for (int t = 0; t < static_cast<int>(stems.size()); ++t) {
    write_indexed_png((dir / (stems[t] + ".png")).string(),
                      labels_from_masks(masks, t, width, height));
  }
}

ObjectMasks read_label_pngs(const fs::path& dir, const std::vector<std::string>& stems) {
  std::vector<LabelMap> labels;
  std::vector<bool> present;
  int w = 0;
  int h = 0;
  for (const auto& s : stems) {
    const auto p = dir / (s + ".png");
    if (fs::exists(p)) {
      labels.push_back(read_indexed_png(p.string()));
      w = labels.back().width();
      h = labels.back().height();
      present.push_back(true);
    } else {
      labels.emplace_back();
      present.push_back(false);
    }
  }
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!present[t] && w > 0) labels[t] = LabelMap(w, h);
  }
  auto out = masks_from_labels(labels);
  for (auto& [id, v] : out) {
    for (std::size_t t = 0; t < v.size(); ++t) {
      if (!present[t]) v[t] = BinaryMask();
    }
  }
  return out;
}

void write_davis_sequence(const fs::path& root, const VideoSequence& video) {
  require(!video.frames.empty(), ErrorKind::invalid_input, "cannot write an empty sequence");
  const auto stems = default_stems(video.num_frames());
  const auto frames_dir = root / "JPEGImages" / video.id;
  fs::create_directories(frames_dir);
  for (int t = 0; t < video.num_frames(); ++t) {
    write_png((frames_dir / (stems[t] + ".png")).string(), video.frames[t]);
  }
  write_label_pngs(root / "Annotations" / video.id, video.ground_truth, stems,
                   video.frames[0].width(), video.frames[0].height());
}

MotsConversion convert_mots_sequence(const std::vector<LabelMap>& instances,
                                     const std::vector<MotsTrack>& tracks, int max_objects) {
  require(!instances.empty(), ErrorKind::invalid_dataset, "MOTS sequence has no frames");
  require(max_objects >= 1, ErrorKind::invalid_input, "max_objects must be >= 1");
  for (const auto& l : instances) {
    require(l.width() == instances[0].width() && l.height() == instances[0].height(),
            ErrorKind::invalid_dataset, "MOTS instance maps differ in size");
  }
  MotsConversion out;
  std::set<std::uint8_t> values;
  for (const auto& tr : tracks) {
    require(tr.value != 0, ErrorKind::invalid_dataset, "instance value 0 is background");
    require(values.insert(tr.value).second, ErrorKind::invalid_dataset,
            "instance value " + std::to_string(tr.value) + " listed twice");
  }
  std::set<std::uint8_t> seen;
  for (const auto& l : instances) {
    for (auto v : l.present_labels()) seen.insert(v);
  }
  for (auto v : seen) {
    if (!values.count(v)) {
      out.warnings.push_back("instance value " + std::to_string(v) + " has no track entry");
    }
  }

  struct Candidate {
    const MotsTrack* track;
    int first;
  };
  std::vector<Candidate> candidates;
  for (const auto& tr : tracks) {
    if (tr.ignored || tr.crowd) {
      ++out.dropped_flagged;
      continue;
    }
    std::optional<int> first;
    for (int t = 0; t < static_cast<int>(instances.size()) && !first; ++t) {
      const auto& l = instances[t];
      const auto labels = l.labels();
      if (std::find(labels.begin(), labels.end(), tr.value) != labels.end()) first = t;
    }
    if (!first) {
      ++out.dropped_empty;
      out.warnings.push_back("track " + std::to_string(tr.track_id) + " has no pixels; dropped");
      continue;
    }
    candidates.push_back({&tr, *first});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.first != b.first ? a.first < b.first : a.track->track_id < b.track->track_id;
  });
  if (static_cast<int>(candidates.size()) > max_objects) {
    out.dropped_overflow = static_cast<int>(candidates.size()) - max_objects;
    candidates.resize(static_cast<std::size_t>(max_objects));
  }
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const ObjectId id{static_cast<std::uint32_t>(k + 1)};
    out.objects.push_back({id, candidates[k].track->track_id, candidates[k].first});
    auto& masks = out.masks[id];
    for (const auto& l : instances) masks.push_back(l.mask_of(candidates[k].track->value));
  }
  return out;
}

std::vector<std::pair<std::string, MotsConversion>> convert_mots(const fs::path& input,
                                                                 const fs::path& output) {
  require(fs::is_directory(input), ErrorKind::invalid_dataset,
          input.string() + " is not a directory");
  std::vector<std::pair<std::string, MotsConversion>> results;
  for (const auto& dir : list_dirs(input)) {
    const auto seq = dir.filename().string();
    const auto instance_files = list_images(dir / "instances");
    require(!instance_files.empty(), ErrorKind::invalid_dataset,
            "MOTS sequence '" + seq + "' has no instance maps");
    std::vector<LabelMap> instances;
    std::vector<std::string> stems;
    for (const auto& f : instance_files) {
      instances.push_back(read_indexed_png(f.string()));
      stems.push_back(f.stem().string());
    }
    std::vector<MotsTrack> tracks;
    {
      std::ifstream in(dir / "tracks.json");
      require(in.good(), ErrorKind::invalid_dataset, "MOTS sequence '" + seq + "' has no tracks.json");
      try {
        nlohmann::json j;
        in >> j;
        for (const auto& t : j.at("tracks")) {
          MotsTrack tr;
          const int value = t.at("value").get<int>();
          require(value >= 1 && value <= 255, ErrorKind::invalid_dataset,
                  "instance value out of range in tracks.json");
          tr.value = static_cast<std::uint8_t>(value);
          tr.track_id = t.at("track_id").get<std::uint32_t>();
          tr.ignored = t.value("ignored", false);
          tr.crowd = t.value("crowd", false);
          tracks.push_back(tr);
        }
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::invalid_dataset, "malformed tracks.json for '" + seq + "': " + e.what());
      }
    }
    auto conv = convert_mots_sequence(instances, tracks);

    const int w = instances[0].width();
    const int h = instances[0].height();
    const auto frames_out = output / "JPEGImages" / seq;
    fs::create_directories(frames_out);
    const auto frame_files = list_images(dir / "frames");
    for (std::size_t t = 0; t < stems.size(); ++t) {
      const auto match = std::find_if(frame_files.begin(), frame_files.end(),
                                      [&](const fs::path& p) { return p.stem() == stems[t]; });
      if (match != frame_files.end()) {
        fs::copy_file(*match, frames_out / match->filename(), fs::copy_options::overwrite_existing);
      } else {
        write_png((frames_out / (stems[t] + ".png")).string(),
                  Frame::filled(static_cast<int>(t), w, h, {0, 0, 0}));
      }
    }
    write_label_pngs(output / "Annotations" / seq, conv.masks, stems, w, h);

    auto objects = nlohmann::json::array();
    for (const auto& o : conv.objects) {
      objects.push_back({{"object", o.id.value}, {"track_id", o.track_id}, {"first_frame", o.first_frame}});
    }
    const nlohmann::json meta{{"objects", objects},
                              {"dropped_flagged", conv.dropped_flagged},
                              {"dropped_empty", conv.dropped_empty},
                              {"dropped_overflow", conv.dropped_overflow},
                              {"warnings", conv.warnings}};
    fs::create_directories(output / "Objects");
    std::ofstream(output / "Objects" / (seq + ".json")) << meta.dump(2) << '\n';
    results.emplace_back(seq, std::move(conv));
  }
  return results;
}

namespace {

Point2 clamp_into(Point2 p, int w, int h) {
  return {std::clamp(p.x, 0.0, std::nextafter(static_cast<double>(w), 0.0)),
          std::clamp(p.y, 0.0, std::nextafter(static_cast<double>(h), 0.0))};
}

}  // namespace

SequencePrediction run_semisupervised_sequence(const VosDatapoint& dp, const PipelineConfig& config,
                                               BackendPair backends,
                                               const SemisupervisedOptions& options) {
  require(backends.tracker && backends.segmenter, ErrorKind::unsupported_capability,
          "semi-supervised runs need a tracker and a segmenter");
  SequencePrediction out;
  out.sequence = dp.sequence;
  const auto& frames = dp.video.frames;
  require(!frames.empty(), ErrorKind::invalid_dataset, "sequence has no frames");
  const int w = frames[0].width();
  const int h = frames[0].height();
  if (dp.objects.empty()) return out;

  VideoSequence video;
  video.id = dp.sequence;
  ResizeScale scale;
  bool resized = false;
  if (options.longest_side && *options.longest_side != std::max(w, h)) {
    for (const auto& f : frames) {
      auto r = resize_longest_side(f, *options.longest_side);
      scale = r.scale;
      video.frames.push_back(std::move(r.frame));
    }
    resized = true;
  } else {
    video.frames = frames;
  }
  const int rw = video.frames[0].width();
  const int rh = video.frames[0].height();

  std::vector<ObjectPrompt> prompts;
  for (const auto& o : dp.objects) {
    ObjectPrompt p;
    p.object = o.id;
    p.frame = o.first_frame;
    // Only the sampled points leave this function; the seed mask does not.
    for (auto q : sample_query_points(o.seed_mask, frames[o.first_frame], o.id, config,
                                      query_seed(config.rng_seed, o.id, o.first_frame))) {
      const auto pos = clamp_into(scale.to_resized(q.position()), rw, rh);
      q.x = pos.x;
      q.y = pos.y;
      p.points.push_back(q);
    }
    prompts.push_back(std::move(p));
  }
  auto run = run_pipeline(video, prompts, config, *backends.tracker, *backends.segmenter);
  out.masks = run.masks(video.num_frames());
  if (resized) {
    for (auto& [id, v] : out.masks) {
      for (auto& m : v) m = resize_mask_nearest(m, w, h);
    }
  }
  out.run = std::move(run);
  return out;
}

std::vector<SequencePrediction> run_semisupervised(const std::vector<VosDatapoint>& dataset,
                                                   const PipelineConfig& config,
                                                   const BackendFactory& backends,
                                                   const SemisupervisedOptions& options) {
  std::vector<SequencePrediction> out;
  for (const auto& dp : dataset) {
    try {
      out.push_back(run_semisupervised_sequence(dp, config, backends(dp), options));
    } catch (const std::exception& e) {
      SequencePrediction failed;
      failed.sequence = dp.sequence;
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

SequencePrediction run_first_frame_proposals(const VideoSequence& video, int max_proposals,
                                             const PipelineConfig& config, BackendPair backends) {
  require(backends.tracker && backends.segmenter, ErrorKind::unsupported_capability,
          "proposal runs need a tracker and a segmenter");
  require(backends.segmenter->capabilities().proposes_masks, ErrorKind::unsupported_capability,
          "segmenter backend does not propose masks");
  require(!video.frames.empty(), ErrorKind::invalid_input, "video has no frames");
  SequencePrediction out;
  out.sequence = video.id;
  const auto proposals = backends.segmenter->propose_masks(video.frames[0], max_proposals);
  if (proposals.empty()) return out;
  std::vector<ObjectPrompt> prompts;
  for (std::size_t k = 0; k < proposals.size() && k < static_cast<std::size_t>(max_proposals); ++k) {
    const ObjectId id{static_cast<std::uint32_t>(k + 1)};
    ObjectPrompt p;
    p.object = id;
    p.frame = 0;
    p.points = sample_query_points(proposals[k], video.frames[0], id, config,
                                   query_seed(config.rng_seed, id, 0));
    prompts.push_back(std::move(p));
  }
  VideoSequence frames_only;
  frames_only.id = video.id;
  frames_only.frames = video.frames;
  auto run = run_pipeline(frames_only, prompts, config, *backends.tracker, *backends.segmenter);
  out.masks = run.masks(video.num_frames());
  out.run = std::move(run);
  return out;
}

}  // namespace ptseg
