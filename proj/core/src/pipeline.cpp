#include "ptseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "ptseg/error.hpp"
#include "ptseg/sampling.hpp"

namespace ptseg {

TwoPassResult two_pass_segment(SegmenterBackend& segmenter, const Frame& frame,
                               std::span<const LabeledPoint> points,
                               std::span<const double> occlusion, const PipelineConfig& config) {
  require(points.size() == occlusion.size(), ErrorKind::invalid_input,
          "points and occlusion scores differ in length");
  TwoPassResult out;
  std::vector<LabeledPoint> positives;
  std::vector<LabeledPoint> all;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (occlusion[i] >= config.occlusion_threshold || !frame.in_bounds(points[i].position())) {
      ++out.gated_points;
      continue;
    }
    if (points[i].positive()) positives.push_back(points[i]);
    all.push_back(points[i]);
  }
  out.prediction.frame = frame.index();
  if (!points.empty()) out.prediction.object = points.front().object;
  if (positives.empty()) {
    out.prediction.mask = BinaryMask(frame.width(), frame.height());
    out.flagged = true;
    return out;
  }
  const bool use_prior = segmenter.capabilities().accepts_dense_prior;
  auto pred = segmenter.segment(frame, positives, std::nullopt);
  ++out.segmenter_calls;
  for (int pass = 0; pass <= config.refinement_iterations; ++pass) {
    const auto prior = use_prior ? pred.dense_prior : std::nullopt;
    pred = segmenter.segment(frame, all, prior);
    ++out.segmenter_calls;
  }
  pred.frame = frame.index();
  pred.object = out.prediction.object;
  out.prediction = std::move(pred);
  return out;
}

double patch_difference(const Frame& a, Point2 pa, const Frame& b, Point2 pb) {
  constexpr int kRadius = 3;
  const auto ca = pixel_of(pa);
  const auto cb = pixel_of(pb);
  double sum = 0.0;
  for (int dy = -kRadius; dy <= kRadius; ++dy) {
    for (int dx = -kRadius; dx <= kRadius; ++dx) {
      const auto va = a.at(std::clamp(ca.x + dx, 0, a.width() - 1),
                           std::clamp(ca.y + dy, 0, a.height() - 1));
      const auto vb = b.at(std::clamp(cb.x + dx, 0, b.width() - 1),
                           std::clamp(cb.y + dy, 0, b.height() - 1));
      const double dr = (va.r - vb.r) / 255.0;
      const double dg = (va.g - vb.g) / 255.0;
      const double db = (va.b - vb.b) / 255.0;
      sum += dr * dr + dg * dg + db * db;
    }
  }
  return sum / (49.0 * 3.0);
}

TrajectoryBundle filter_by_patch_similarity(const TrajectoryBundle& bundle,
                                            std::span<const Frame> frames, double threshold) {
  require(threshold > 0, ErrorKind::invalid_input, "patch similarity threshold must be > 0");
  require(bundle.end_frame() < static_cast<int>(frames.size()), ErrorKind::invalid_input,
          "bundle extends past the video");
  TrajectoryBundle out = bundle;
  if (std::isinf(threshold)) return out;
  const Frame& query_frame = frames[bundle.start_frame()];
  for (int t = bundle.start_frame() + 1; t <= bundle.end_frame(); ++t) {
    for (int i = 0; i < bundle.num_points(); ++i) {
      const double d = patch_difference(query_frame, bundle.queries()[i].position(), frames[t],
                                        bundle.position(t, i));
      if (d > threshold) out.set_occlusion(t, i, 1.0);
    }
  }
  return out;
}

namespace {

bool similar_area(std::size_t area, std::size_t initial, double band) {
  if (area == 0 || initial == 0) return false;
  const double rel = std::abs(static_cast<double>(area) - static_cast<double>(initial)) /
                     static_cast<double>(initial);
  return rel <= band + 1e-12;
}

}  // namespace

std::optional<int> reinit_trigger(ReinitVariant variant, std::span<const std::size_t> window_areas,
                                  std::size_t initial_area, double band) {
  const bool any = std::any_of(window_areas.begin(), window_areas.end(),
                               [](std::size_t a) { return a > 0; });
  if (!any || variant == ReinitVariant::off) return std::nullopt;
  const int n = static_cast<int>(window_areas.size());
  switch (variant) {
    case ReinitVariant::off:
      return std::nullopt;
    case ReinitVariant::fixed_horizon:
      return n - 1;
    case ReinitVariant::mean_area: {
      double sum = 0.0;
      int count = 0;
      for (auto a : window_areas) {
        if (a > 0) {
          sum += static_cast<double>(a);
          ++count;
        }
      }
      const double mean = sum / count;
      std::optional<int> best;
      double best_gap = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (window_areas[i] == 0) continue;
        const double gap = std::abs(static_cast<double>(window_areas[i]) - mean);
        if (gap < best_gap) {
          best_gap = gap;
          best = i;
        }
      }
      return best;
    }
    case ReinitVariant::similar_area:
    case ReinitVariant::similar_area_synced:
      for (int i = 0; i < n; ++i) {
        if (similar_area(window_areas[i], initial_area, band)) return i;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<int> synced_reinit_trigger(std::span<const std::vector<std::size_t>> window_areas,
                                         std::span<const std::size_t> initial_areas, double band) {
  require(window_areas.size() == initial_areas.size(), ErrorKind::invalid_input,
          "one initial area per object required");
  if (window_areas.empty()) return std::nullopt;
  const std::size_t n = window_areas.front().size();
  for (const auto& w : window_areas) {
    require(w.size() == n, ErrorKind::invalid_input, "windows differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool all = true;
    for (std::size_t k = 0; k < window_areas.size() && all; ++k) {
      all = similar_area(window_areas[k][i], initial_areas[k], band);
    }
    if (all) return static_cast<int>(i);
  }
  return std::nullopt;
}

ObjectMasks PipelineRun::masks(int num_frames) const {
  ObjectMasks out;
  for (const auto& [id, r] : objects) {
    auto& v = out[id];
    const int w = r.masks.empty() ? 0 : r.masks.front().width();
    const int h = r.masks.empty() ? 0 : r.masks.front().height();
    v.assign(static_cast<std::size_t>(num_frames), BinaryMask(w, h));
    for (std::size_t k = 0; k < r.masks.size(); ++k) {
      const int t = r.first_frame + static_cast<int>(k);
      if (t < num_frames) v[t] = r.masks[k];
    }
  }
  return out;
}

std::uint64_t query_seed(std::uint64_t rng_seed, ObjectId object, int frame) {
  return derive_seed(derive_seed(rng_seed, object.value), static_cast<std::uint64_t>(frame));
}

std::vector<LabeledPoint> sample_query_points(const BinaryMask& mask, const Frame& frame,
                                              ObjectId object, const PipelineConfig& config,
                                              std::uint64_t seed) {
  std::vector<LabeledPoint> out;
  for (const auto& p : sample_points(config.psm, {mask, &frame, config.positive_per_mask, seed})) {
    out.push_back({p.x, p.y, PointLabel::positive, object});
  }
  if (config.negative_per_mask > 0) {
    const std::map<ObjectId, BinaryMask> masks{{object, mask}};
    auto negatives = sample_negative(object, masks, &frame, config.negative_per_mask,
                                     derive_seed(seed, 0x6e6567));
    out.insert(out.end(), negatives.begin(), negatives.end());
  }
  return out;
}

namespace {

struct ObjectState {
  ObjectId id;
  int first = 0;
  std::vector<LabeledPoint> queries;
  TrajectoryBundle bundle;
  std::size_t initial_area = 0;
  bool halted = false;
  ObjectResult* result = nullptr;
};

class Runner {
 public:
  Runner(const VideoSequence& video, const PipelineConfig& config, TrackerBackend& tracker,
         SegmenterBackend& segmenter, const RunOptions& options, PipelineRun& run)
      : video_(video),
        config_(config),
        tracker_(tracker),
        segmenter_(segmenter),
        options_(options),
        run_(run),
        last_(video.num_frames() - 1) {}

  void process(std::vector<ObjectState*> group) {
    for (auto* s : group) {
      retrack(*s, s->first);
      segment(*s, s->first);
      if (s->initial_area == 0) s->initial_area = s->result->masks.front().area();
    }
    const int ref = group.front()->first;
    int cursor = ref;
    const bool reinit = config_.reinit != ReinitVariant::off;
    while (cursor < last_) {
      check_stop();
      std::vector<ObjectState*> active;
      for (auto* s : group) {
        if (!s->halted) active.push_back(s);
      }
      if (active.empty()) break;
      const int end = reinit ? std::min(cursor + config_.horizon, last_) : last_;
      for (auto* s : active) {
        for (int t = cursor + 1; t <= end; ++t) segment(*s, t);
      }
      report(active, end);
      if (!reinit || end - cursor < config_.horizon) {
        cursor = end;
        continue;
      }
      const auto chosen = decide(active, cursor, end);
      if (!chosen) {
        cursor = end;
        continue;
      }
      std::vector<ObjectState*> survivors;
      for (auto* s : active) {
        if (!s->halted) survivors.push_back(s);
      }
      reinitialize(survivors, *chosen);
      cursor = *chosen;
    }
  }

 private:
  std::vector<std::size_t> window_areas(const ObjectState& s, int cursor, int end) const {
    std::vector<std::size_t> areas;
    for (int t = cursor + 1; t <= end; ++t) areas.push_back(mask_at(s, t).area());
    return areas;
  }

  bool all_empty(const std::vector<std::size_t>& areas) const {
    return std::all_of(areas.begin(), areas.end(), [](std::size_t a) { return a == 0; });
  }

  // Frame to reinitialize the surviving objects from; halts objects that
  // vanished.
  std::optional<int> decide(const std::vector<ObjectState*>& active, int cursor, int end) {
    switch (config_.reinit) {
      case ReinitVariant::off:
        return std::nullopt;
      case ReinitVariant::fixed_horizon: {
        bool any = false;
        for (auto* s : active) {
          if (mask_at(*s, end).is_empty()) {
            halt(*s, end);
          } else {
            any = true;
          }
        }
        return any ? std::optional<int>(end) : std::nullopt;
      }
      case ReinitVariant::mean_area:
      case ReinitVariant::similar_area: {
        auto& s = *active.front();
        const auto areas = window_areas(s, cursor, end);
        if (all_empty(areas)) {
          halt(s, end);
          return std::nullopt;
        }
        const auto offset = reinit_trigger(config_.reinit, areas, s.initial_area,
                                           config_.area_similarity_band);
        if (!offset) return std::nullopt;
        return cursor + 1 + *offset;
      }
      case ReinitVariant::similar_area_synced: {
        std::vector<std::vector<std::size_t>> windows;
        std::vector<std::size_t> initial;
        for (auto* s : active) {
          auto areas = window_areas(*s, cursor, end);
          if (all_empty(areas)) {
            halt(*s, end);
            continue;
          }
          windows.push_back(std::move(areas));
          initial.push_back(s->initial_area);
        }
        const auto offset =
            synced_reinit_trigger(windows, initial, config_.area_similarity_band);
        if (!offset) return std::nullopt;
        return cursor + 1 + *offset;
      }
    }
    return std::nullopt;
  }

  void reinitialize(const std::vector<ObjectState*>& group, int frame) {
    const Frame& f = video_.frames[frame];
    for (auto* s : group) {
      s->queries = sample_query_points(mask_at(*s, frame), f, s->id, config_,
                                       query_seed(config_.rng_seed, s->id, frame));
    }
    if (group.size() > 1 && config_.multi_object_negatives && config_.negative_per_mask >= 1) {
      std::vector<std::vector<LabeledPoint>> extra(group.size());
      for (std::size_t a = 0; a < group.size(); ++a) {
        for (std::size_t b = 0; b < group.size(); ++b) {
          if (a == b) continue;
          for (const auto& p : group[b]->queries) {
            if (p.positive() && p.object == group[b]->id) {
              extra[a].push_back({p.x, p.y, PointLabel::negative, group[a]->id});
            }
          }
        }
      }
      for (std::size_t a = 0; a < group.size(); ++a) {
        group[a]->queries.insert(group[a]->queries.end(), extra[a].begin(), extra[a].end());
      }
    }
    for (auto* s : group) {
      run_.diagnostics.reinit_events.push_back({s->id, frame});
      retrack(*s, frame);
    }
  }

  void halt(ObjectState& s, int frame) {
    s.halted = true;
    s.result->disappeared_at = frame;
  }

  const BinaryMask& mask_at(const ObjectState& s, int t) const {
    return s.result->masks[static_cast<std::size_t>(t - s.first)];
  }

  void retrack(ObjectState& s, int from) {
    const auto clip = std::span<const Frame>(video_.frames).subspan(static_cast<std::size_t>(from));
    s.bundle = track_points(tracker_, s.queries, clip);
    ++run_.diagnostics.tracker_calls;
    if (config_.patch_similarity_threshold) {
      s.bundle = filter_by_patch_similarity(s.bundle, video_.frames,
                                            *config_.patch_similarity_threshold);
    }
  }

  void segment(ObjectState& s, int t) {
    const auto points = s.bundle.points_at(t);
    const auto occlusion = s.bundle.occlusion_at(t);
    auto r = two_pass_segment(segmenter_, video_.frames[t], points, occlusion, config_);
    require(r.prediction.mask.width() == video_.frames[t].width() &&
                r.prediction.mask.height() == video_.frames[t].height(),
            ErrorKind::protocol, "segmenter returned a mask of the wrong size");
    s.result->masks[static_cast<std::size_t>(t - s.first)] = std::move(r.prediction.mask);
    auto& flagged = s.result->flagged_frames;
    flagged.erase(std::remove(flagged.begin(), flagged.end(), t), flagged.end());
    if (r.flagged) flagged.insert(std::upper_bound(flagged.begin(), flagged.end(), t), t);
    run_.diagnostics.segmenter_calls += static_cast<std::size_t>(r.segmenter_calls);
    run_.diagnostics.gated_points += static_cast<std::size_t>(r.gated_points);
  }

  void report(const std::vector<ObjectState*>& active, int end) {
    if (!options_.progress) return;
    for (auto* s : active) progress_[s->id] = end - s->first + 1;
    std::size_t done = 0;
    for (const auto& [id, n] : progress_) done += static_cast<std::size_t>(n);
    options_.progress(total_ == 0 ? 1.0 : std::min(1.0, static_cast<double>(done) / total_));
  }

  void check_stop() const {
    if (options_.stop.stop_requested()) fail(ErrorKind::precondition, "pipeline run cancelled");
  }

 public:
  std::size_t total_ = 0;
  std::map<ObjectId, int> progress_;

 private:
  const VideoSequence& video_;
  const PipelineConfig& config_;
  TrackerBackend& tracker_;
  SegmenterBackend& segmenter_;
  const RunOptions& options_;
  PipelineRun& run_;
  int last_;
};

void validate_prompts(const VideoSequence& video, std::span<const ObjectPrompt> prompts) {
  require(!video.frames.empty(), ErrorKind::invalid_input, "video has no frames");
  for (int t = 0; t < video.num_frames(); ++t) {
    require(video.frames[t].index() == t, ErrorKind::invalid_input,
            "video frames must be indexed 0..T-1");
    require(video.frames[t].width() == video.frames[0].width() &&
                video.frames[t].height() == video.frames[0].height(),
            ErrorKind::invalid_input, "video frames differ in size");
  }
  require(!prompts.empty(), ErrorKind::invalid_input, "no objects to segment");
  std::set<ObjectId> seen;
  for (const auto& p : prompts) {
    const auto name = "object " + std::to_string(p.object.value);
    require(seen.insert(p.object).second, ErrorKind::invalid_input, name + " prompted twice");
    require(p.frame >= 0 && p.frame < video.num_frames(), ErrorKind::invalid_input,
            name + " prompt frame outside the video");
    const Frame& f = video.frames[p.frame];
    if (p.mask.width() > 0 || p.mask.height() > 0) {
      require(p.mask.width() == f.width() && p.mask.height() == f.height(),
              ErrorKind::invalid_input, name + " mask does not match the frame size");
      require(!p.mask.is_empty(), ErrorKind::empty_mask, name + " has an empty initial mask");
    } else {
      require(std::any_of(p.points.begin(), p.points.end(),
                          [](const LabeledPoint& q) { return q.positive(); }),
              ErrorKind::invalid_input, name + " needs a mask or a positive point");
      for (const auto& q : p.points) {
        require(f.in_bounds(q.position()), ErrorKind::invalid_input,
                name + " has a point outside the frame");
      }
    }
  }
}

}  // namespace

PipelineRun run_pipeline(const VideoSequence& video, std::span<const ObjectPrompt> prompts,
                         const PipelineConfig& config, TrackerBackend& tracker,
                         SegmenterBackend& segmenter, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  validate_prompts(video, prompts);

  PipelineRun run;
  run.config = config;
  std::map<ObjectId, ObjectState> states;
  for (const auto& p : prompts) {
    auto& s = states[p.object];
    s.id = p.object;
    s.first = p.frame;
    if (p.mask.width() > 0) {
      s.queries = sample_query_points(p.mask, video.frames[p.frame], p.object, config,
                                      query_seed(config.rng_seed, p.object, p.frame));
      s.initial_area = p.mask.area();
    } else {
      for (auto q : p.points) {
        q.object = p.object;
        s.queries.push_back(q);
      }
    }
  }
  if (config.multi_object_negatives && config.negative_per_mask >= 1) {
    std::map<ObjectId, std::vector<LabeledPoint>> extra;
    for (const auto& [a, sa] : states) {
      for (const auto& [b, sb] : states) {
        if (a == b || sa.first != sb.first) continue;
        for (const auto& q : sb.queries) {
          if (q.positive()) extra[a].push_back({q.x, q.y, PointLabel::negative, a});
        }
      }
    }
    for (auto& [id, pts] : extra) {
      auto& q = states[id].queries;
      q.insert(q.end(), pts.begin(), pts.end());
    }
  }

  const Frame& f0 = video.frames[0];
  for (auto& [id, s] : states) {
    auto& r = run.objects[id];
    r.first_frame = s.first;
    r.initial_queries = {s.first, s.queries};
    r.masks.assign(static_cast<std::size_t>(video.num_frames() - s.first),
                   BinaryMask(f0.width(), f0.height()));
    s.result = &r;
  }

  // Fixed-horizon and synced-area reinitialization move objects that share a
  // reference frame together; everything else runs per object.
  const bool synced = config.reinit == ReinitVariant::fixed_horizon ||
                      config.reinit == ReinitVariant::similar_area_synced;
  std::vector<std::vector<ObjectState*>> groups;
  std::map<int, std::size_t> group_of_frame;
  for (auto& [id, s] : states) {
    if (synced) {
      auto [it, inserted] = group_of_frame.emplace(s.first, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(&s);
    } else {
      groups.push_back({&s});
    }
  }

  Runner runner(video, config, tracker, segmenter, options, run);
  for (const auto& [id, s] : states) runner.total_ += static_cast<std::size_t>(video.num_frames() - s.first);
  for (auto& g : groups) runner.process(g);
  if (options.progress) options.progress(1.0);

  run.diagnostics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

}  // namespace ptseg
