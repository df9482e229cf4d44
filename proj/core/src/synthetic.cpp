#include "ptseg/synthetic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"
#include "ptseg/sampling.hpp"

namespace ptseg {

namespace {

constexpr double kEps = 1e-9;

std::uint64_t mix(std::uint64_t seed, std::uint64_t v) { return derive_seed(seed, v); }

std::uint64_t bits_of(double v) { return std::bit_cast<std::uint64_t>(v); }

bool point_in_polygon(Point2 p, const std::vector<Point2>& v, Point2 offset) {
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const double xi = v[i].x + offset.x, yi = v[i].y + offset.y;
    const double xj = v[j].x + offset.x, yj = v[j].y + offset.y;
    if ((yi > p.y) != (yj > p.y) && p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

double polygon_area(const std::vector<Point2>& v) {
  double a = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    a += v[j].x * v[i].y - v[i].x * v[j].y;
  }
  return std::abs(a) / 2.0;
}

struct Box {
  double x0, y0, x1, y1;
};

Box bounds(const ShapeSpec& s, int t) {
  const auto c = s.motion.at(t);
  switch (s.kind) {
    case ShapeKind::disk:
      return {c.x - s.radius, c.y - s.radius, c.x + s.radius, c.y + s.radius};
    case ShapeKind::rect:
      return {c.x - s.width / 2, c.y - s.height / 2, c.x + s.width / 2, c.y + s.height / 2};
    case ShapeKind::polygon: {
      Box b{1e300, 1e300, -1e300, -1e300};
      for (const auto& v : s.vertices) {
        b.x0 = std::min(b.x0, c.x + v.x);
        b.y0 = std::min(b.y0, c.y + v.y);
        b.x1 = std::max(b.x1, c.x + v.x);
        b.y1 = std::max(b.y1, c.y + v.y);
      }
      return b;
    }
  }
  return {};
}

}  // namespace

Point2 Motion::at(double t) const {
  switch (kind) {
    case MotionKind::constant:
      return origin;
    case MotionKind::linear:
      return {origin.x + velocity.x * t, origin.y + velocity.y * t};
    case MotionKind::sinusoidal: {
      const double s = std::sin(2.0 * std::numbers::pi * t / period + phase);
      return {origin.x + amplitude.x * s, origin.y + amplitude.y * s};
    }
  }
  return origin;
}

bool ShapeSpec::active(int t) const {
  return t >= visible_from && (!visible_until || t < *visible_until);
}

bool ShapeSpec::contains(Point2 p, int t) const {
  if (!active(t)) return false;
  const auto c = motion.at(t);
  switch (kind) {
    case ShapeKind::disk: {
      const double dx = p.x - c.x, dy = p.y - c.y;
      return dx * dx + dy * dy <= radius * radius;
    }
    case ShapeKind::rect:
      return p.x >= c.x - width / 2 && p.x < c.x + width / 2 && p.y >= c.y - height / 2 &&
             p.y < c.y + height / 2;
    case ShapeKind::polygon:
      return point_in_polygon(p, vertices, c);
  }
  return false;
}

bool NoiseSpec::is_zero() const {
  return boundary_dilation_px == 0.0 && point_jitter_sigma == 0.0 && occlusion_flip_prob == 0.0 &&
         mask_flip_prob == 0.0;
}

void SceneSpec::validate() const {
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "scene canvas must be non-empty");
  require(duration >= 1, ErrorKind::invalid_input, "scene duration must be >= 1");
  require(noise.boundary_dilation_px >= 0 && noise.point_jitter_sigma >= 0 &&
              noise.occlusion_flip_prob >= 0 && noise.occlusion_flip_prob <= 1 &&
              noise.mask_flip_prob >= 0 && noise.mask_flip_prob <= 1,
          ErrorKind::invalid_input, "noise parameters out of range");
  std::set<std::uint32_t> ids;
  std::set<int> depths;
  auto check = [&](const ShapeSpec& s, bool tracked) {
    switch (s.kind) {
      case ShapeKind::disk:
        require(s.radius > 0, ErrorKind::invalid_input, "disk radius must be positive");
        break;
      case ShapeKind::rect:
        require(s.width > 0 && s.height > 0, ErrorKind::invalid_input,
                "rect size must be positive");
        break;
      case ShapeKind::polygon:
        require(s.vertices.size() >= 3 && polygon_area(s.vertices) > 0, ErrorKind::invalid_input,
                "polygon must have three or more vertices and positive area");
        break;
    }
    require(s.motion.kind != MotionKind::sinusoidal || s.motion.period > 0,
            ErrorKind::invalid_input, "sinusoidal motion needs a positive period");
    require(s.visible_from >= 0 && (!s.visible_until || *s.visible_until > s.visible_from),
            ErrorKind::invalid_input, "shape lifespan is empty");
    require(depths.insert(s.depth).second, ErrorKind::invalid_input,
            "shape depths must be unique");
    if (tracked) {
      require(s.id >= 1 && ids.insert(s.id).second, ErrorKind::invalid_input,
              "object ids must be unique and >= 1");
      const auto b = bounds(s, s.visible_from);
      require(b.x0 >= -kEps && b.y0 >= -kEps && b.x1 <= width + kEps && b.y1 <= height + kEps,
              ErrorKind::invalid_input,
              "object " + std::to_string(s.id) + " is not within the canvas when it appears");
    }
  };
  for (const auto& s : shapes) check(s, true);
  for (const auto& s : occluders) check(s, false);
}

namespace {

nlohmann::json point_json(Point2 p) { return nlohmann::json::array({p.x, p.y}); }

Point2 point_from(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 2, ErrorKind::invalid_input, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json shape_json(const ShapeSpec& s, bool tracked) {
  nlohmann::json j;
  if (tracked) j["id"] = s.id;
  switch (s.kind) {
    case ShapeKind::disk:
      j["kind"] = "disk";
      j["radius"] = s.radius;
      break;
    case ShapeKind::rect:
      j["kind"] = "rect";
      j["size"] = {s.width, s.height};
      break;
    case ShapeKind::polygon: {
      j["kind"] = "polygon";
      auto v = nlohmann::json::array();
      for (const auto& p : s.vertices) v.push_back(point_json(p));
      j["vertices"] = v;
      break;
    }
  }
  j["color"] = {s.color.r, s.color.g, s.color.b};
  j["depth"] = s.depth;
  nlohmann::json m;
  m["origin"] = point_json(s.motion.origin);
  switch (s.motion.kind) {
    case MotionKind::constant:
      m["type"] = "constant";
      break;
    case MotionKind::linear:
      m["type"] = "linear";
      m["velocity"] = point_json(s.motion.velocity);
      break;
    case MotionKind::sinusoidal:
      m["type"] = "sinusoidal";
      m["amplitude"] = point_json(s.motion.amplitude);
      m["period"] = s.motion.period;
      m["phase"] = s.motion.phase;
      break;
  }
  j["motion"] = m;
  j["visible_from"] = s.visible_from;
  j["visible_until"] = s.visible_until ? nlohmann::json(*s.visible_until) : nlohmann::json(nullptr);
  return j;
}

ShapeSpec shape_from(const nlohmann::json& j, bool tracked) {
  ShapeSpec s;
  if (tracked) s.id = j.at("id").get<std::uint32_t>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "disk") {
    s.kind = ShapeKind::disk;
    s.radius = j.at("radius").get<double>();
  } else if (kind == "rect") {
    s.kind = ShapeKind::rect;
    const auto size = point_from(j.at("size"));
    s.width = size.x;
    s.height = size.y;
  } else if (kind == "polygon") {
    s.kind = ShapeKind::polygon;
    for (const auto& v : j.at("vertices")) s.vertices.push_back(point_from(v));
  } else {
    fail(ErrorKind::invalid_input, "unknown shape kind '" + kind + "'");
  }
  const auto c = j.at("color").get<std::vector<int>>();
  require(c.size() == 3, ErrorKind::invalid_input, "color must be [r, g, b]");
  s.color = {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
             static_cast<std::uint8_t>(c[2])};
  s.depth = j.at("depth").get<int>();
  const auto& m = j.at("motion");
  s.motion.origin = point_from(m.at("origin"));
  const auto type = m.value("type", std::string("constant"));
  if (type == "constant") {
    s.motion.kind = MotionKind::constant;
  } else if (type == "linear") {
    s.motion.kind = MotionKind::linear;
    s.motion.velocity = point_from(m.at("velocity"));
  } else if (type == "sinusoidal") {
    s.motion.kind = MotionKind::sinusoidal;
    s.motion.amplitude = point_from(m.at("amplitude"));
    s.motion.period = m.at("period").get<double>();
    s.motion.phase = m.value("phase", 0.0);
  } else {
    fail(ErrorKind::invalid_input, "unknown motion type '" + type + "'");
  }
  s.visible_from = j.value("visible_from", 0);
  if (j.contains("visible_until") && !j["visible_until"].is_null()) {
    s.visible_until = j["visible_until"].get<int>();
  }
  return s;
}

}  // namespace

void to_json(nlohmann::json& j, const SceneSpec& s) {
  auto shapes = nlohmann::json::array();
  for (const auto& x : s.shapes) shapes.push_back(shape_json(x, true));
  auto occluders = nlohmann::json::array();
  for (const auto& x : s.occluders) occluders.push_back(shape_json(x, false));
  j = {{"name", s.name},
       {"width", s.width},
       {"height", s.height},
       {"duration", s.duration},
       {"background", {s.background.r, s.background.g, s.background.b}},
       {"shapes", shapes},
       {"occluders", occluders},
       {"noise",
        {{"boundary_dilation_px", s.noise.boundary_dilation_px},
         {"point_jitter_sigma", s.noise.point_jitter_sigma},
         {"occlusion_flip_prob", s.noise.occlusion_flip_prob},
         {"mask_flip_prob", s.noise.mask_flip_prob}}},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  require(j.is_object(), ErrorKind::invalid_input, "scene must be a JSON object");
  try {
    SceneSpec out;
    out.name = j.value("name", out.name);
    out.width = j.at("width").get<int>();
    out.height = j.at("height").get<int>();
    out.duration = j.at("duration").get<int>();
    if (j.contains("background")) {
      const auto c = j["background"].get<std::vector<int>>();
      require(c.size() == 3, ErrorKind::invalid_input, "background must be [r, g, b]");
      out.background = {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
                        static_cast<std::uint8_t>(c[2])};
    }
    for (const auto& x : j.value("shapes", nlohmann::json::array())) {
      out.shapes.push_back(shape_from(x, true));
    }
    for (const auto& x : j.value("occluders", nlohmann::json::array())) {
      out.occluders.push_back(shape_from(x, false));
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      out.noise.boundary_dilation_px = n.value("boundary_dilation_px", 0.0);
      out.noise.point_jitter_sigma = n.value("point_jitter_sigma", 0.0);
      out.noise.occlusion_flip_prob = n.value("occlusion_flip_prob", 0.0);
      out.noise.mask_flip_prob = n.value("mask_flip_prob", 0.0);
    }
    out.seed = j.value("seed", std::uint64_t{0});
    out.validate();
    s = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed scene: ") + e.what());
  }
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::not_found, "cannot open scene file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, "scene file " + path + " is not JSON: " + e.what());
  }
  return j.get<SceneSpec>();
}

void save_scene(const SceneSpec& spec, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::invalid_input, "cannot write scene file " + path);
  out << nlohmann::json(spec).dump(2) << '\n';
}

SceneGeometry::SceneGeometry(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  layers_ = spec_.shapes;
  layers_.insert(layers_.end(), spec_.occluders.begin(), spec_.occluders.end());
  std::sort(layers_.begin(), layers_.end(),
            [](const ShapeSpec& a, const ShapeSpec& b) { return a.depth < b.depth; });
}

BinaryMask SceneGeometry::raw_mask(std::size_t layer, int t) const {
  BinaryMask m(spec_.width, spec_.height);
  const auto& s = layers_.at(layer);
  if (!s.active(t)) return m;
  const auto b = bounds(s, t);
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x0)) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y0)) - 1);
  const int x1 = std::min(spec_.width - 1, static_cast<int>(std::ceil(b.x1)) + 1);
  const int y1 = std::min(spec_.height - 1, static_cast<int>(std::ceil(b.y1)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (s.contains(center_of({x, y}), t)) m.set(x, y);
    }
  }
  return m;
}

BinaryMask SceneGeometry::visible_mask(std::size_t layer, int t) const {
  auto m = raw_mask(layer, t);
  for (std::size_t k = layer + 1; k < layers_.size(); ++k) m = m.minus(raw_mask(k, t));
  return m;
}

std::optional<std::size_t> SceneGeometry::topmost_at(Point2 p, int t) const {
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (layers_[k].contains(p, t)) return k;
  }
  return std::nullopt;
}

bool SceneGeometry::covered_above(Point2 p, int t, std::optional<int> depth) const {
  for (const auto& s : layers_) {
    if ((!depth || s.depth > *depth) && s.contains(p, t)) return true;
  }
  return false;
}

std::optional<std::size_t> SceneGeometry::layer_of_object(ObjectId id) const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].id != 0 && layers_[k].id == id.value) return k;
  }
  return std::nullopt;
}

VideoSequence render(const SceneSpec& spec) {
  SceneGeometry scene(spec);
  VideoSequence video;
  video.id = spec.name;
  for (int t = 0; t < spec.duration; ++t) {
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(spec.width) * spec.height * 3);
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
      rgb[i] = spec.background.r;
      rgb[i + 1] = spec.background.g;
      rgb[i + 2] = spec.background.b;
    }
    for (std::size_t k = 0; k < scene.layers().size(); ++k) {
      const auto& s = scene.layers()[k];
      for (const auto p : scene.raw_mask(k, t).pixels()) {
        const std::size_t o = (static_cast<std::size_t>(p.y) * spec.width + p.x) * 3;
        rgb[o] = s.color.r;
        rgb[o + 1] = s.color.g;
        rgb[o + 2] = s.color.b;
      }
      if (s.id != 0) video.ground_truth[ObjectId{s.id}].push_back(scene.visible_mask(k, t));
    }
    video.frames.emplace_back(t, spec.width, spec.height, std::move(rgb));
  }
  return video;
}

OracleTracker::OracleTracker(SceneSpec spec, std::optional<int> window_size)
    : scene_(std::move(spec)), window_size_(window_size) {}

TrackerCapabilities OracleTracker::capabilities() const { return {true, window_size_}; }

TrajectoryBundle OracleTracker::track(std::span<const LabeledPoint> queries,
                                      std::span<const Frame> frames) {
  validate_track_request(queries, frames);
  const auto& spec = scene_.spec();
  require(frames[0].width() == spec.width && frames[0].height() == spec.height,
          ErrorKind::invalid_input, "frames do not match the scene canvas");
  require(frames.back().index() < spec.duration, ErrorKind::invalid_input,
          "frames extend past the scene duration");
  const int t0 = frames[0].index();
  TrajectoryBundle bundle(t0, static_cast<int>(frames.size()),
                          std::vector<LabeledPoint>(queries.begin(), queries.end()));
  const auto& noise = spec.noise;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Point2 q = queries[i].position();
    const auto carrier = scene_.topmost_at(q, t0);
    const Point2 c0 = carrier ? scene_.layers()[*carrier].motion.at(t0) : Point2{};
    std::uint64_t h = mix(mix(mix(spec.seed, 0x747261636bULL), static_cast<std::uint64_t>(t0)), i);
    h = mix(mix(h, bits_of(q.x)), bits_of(q.y));
    for (int t = t0 + 1; t < t0 + static_cast<int>(frames.size()); ++t) {
      Point2 truth = q;
      std::optional<int> depth;
      bool gone = false;
      if (carrier) {
        const auto& s = scene_.layers()[*carrier];
        const Point2 c = s.motion.at(t);
        truth = {q.x + c.x - c0.x, q.y + c.y - c0.y};
        depth = s.depth;
        gone = !s.active(t);
      }
      const bool outside = truth.x < 0 || truth.y < 0 || truth.x >= spec.width ||
                           truth.y >= spec.height;
      bool occluded = gone || outside || scene_.covered_above(truth, t, depth);

      std::mt19937_64 rng(mix(h, static_cast<std::uint64_t>(t)));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      const double zx = normal(rng);
      const double zy = normal(rng);
      if (uniform(rng) < noise.occlusion_flip_prob) occluded = !occluded;
      const Point2 pos{truth.x + noise.point_jitter_sigma * zx,
                       truth.y + noise.point_jitter_sigma * zy};
      bundle.set(t, static_cast<int>(i), pos, occluded ? 1.0 : 0.0);
    }
  }
  return bundle;
}

OracleSegmenter::OracleSegmenter(SceneSpec spec) : scene_(std::move(spec)) {}

SegmenterCapabilities OracleSegmenter::capabilities() const { return {true, true}; }

const std::vector<BinaryMask>& OracleSegmenter::visible_at(int t) {
  auto it = visible_cache_.find(t);
  if (it == visible_cache_.end()) {
    std::vector<BinaryMask> masks;
    for (std::size_t k = 0; k < scene_.layers().size(); ++k) {
      masks.push_back(scene_.visible_mask(k, t));
    }
    if (visible_cache_.size() >= 64) visible_cache_.erase(visible_cache_.begin());
    it = visible_cache_.emplace(t, std::move(masks)).first;
  }
  return it->second;
}

BinaryMask OracleSegmenter::noisy_layer_mask(std::size_t layer, int t) {
  const auto& noise = scene_.spec().noise;
  BinaryMask m = visible_at(t)[layer];
  if (noise.boundary_dilation_px > 0) m = dilate(m, noise.boundary_dilation_px);
  if (noise.mask_flip_prob > 0) {
    std::mt19937_64 rng(mix(mix(mix(scene_.spec().seed, 0x6d61736bULL), t), layer));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (uniform(rng) < noise.mask_flip_prob) m.set(x, y, !m.test(x, y));
      }
    }
  }
  return m;
}

MaskPrediction OracleSegmenter::segment(const Frame& frame, std::span<const LabeledPoint> points,
                                        std::optional<PriorHandle> prior) {
  std::lock_guard lock(mutex_);
  const auto& spec = scene_.spec();
  require(frame.width() == spec.width && frame.height() == spec.height, ErrorKind::invalid_input,
          "frame does not match the scene canvas");
  require(frame.index() < spec.duration, ErrorKind::invalid_input,
          "frame index past the scene duration");
  const BinaryMask* prior_mask = nullptr;
  if (prior) {
    auto it = priors_.find(prior->value);
    require(it != priors_.end(), ErrorKind::protocol,
            "unknown prior handle " + std::to_string(prior->value));
    prior_mask = &it->second;
  }
  const int t = frame.index();

  std::map<std::size_t, int> votes;
  std::map<std::size_t, std::size_t> first_vote;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].positive()) continue;
    if (const auto layer = scene_.topmost_at(points[i].position(), t)) {
      ++votes[*layer];
      first_vote.emplace(*layer, i);
    }
  }

  MaskPrediction pred;
  pred.frame = t;
  if (!points.empty()) pred.object = points.front().object;
  pred.mask = BinaryMask(spec.width, spec.height);
  if (!votes.empty()) {
    int best_votes = 0;
    for (const auto& [layer, n] : votes) best_votes = std::max(best_votes, n);
    std::vector<std::size_t> tied;
    for (const auto& [layer, n] : votes) {
      if (n == best_votes) tied.push_back(layer);
    }
    std::size_t winner = tied.front();
    if (tied.size() > 1) {
      std::size_t best_overlap = 0;
      bool have = false;
      for (auto layer : tied) {
        const std::size_t overlap =
            prior_mask && prior_mask->same_size(visible_at(t)[layer])
                ? intersection_area(*prior_mask, visible_at(t)[layer])
                : 0;
        const bool better = !have || overlap > best_overlap ||
                            (overlap == best_overlap && first_vote[layer] < first_vote[winner]);
        if (better) {
          winner = layer;
          best_overlap = overlap;
          have = true;
        }
      }
    }
    pred.mask = noisy_layer_mask(winner, t);
    for (const auto& p : points) {
      if (p.positive()) continue;
      const auto layer = scene_.topmost_at(p.position(), t);
      if (layer && *layer != winner) pred.mask = pred.mask.minus(visible_at(t)[*layer]);
    }
  }

  const std::uint64_t handle = next_prior_++;
  priors_.emplace(handle, pred.mask);
  prior_order_.push_back(handle);
  while (prior_order_.size() > kMaxPriors) {
    priors_.erase(prior_order_.front());
    prior_order_.pop_front();
  }
  pred.dense_prior = PriorHandle{handle};
  return pred;
}

std::vector<BinaryMask> OracleSegmenter::propose_masks(const Frame& frame, int max_proposals) {
  std::lock_guard lock(mutex_);
  const auto& spec = scene_.spec();
  require(frame.width() == spec.width && frame.height() == spec.height, ErrorKind::invalid_input,
          "frame does not match the scene canvas");
  require(frame.index() < spec.duration, ErrorKind::invalid_input,
          "frame index past the scene duration");
  std::vector<BinaryMask> masks;
  for (std::size_t k = 0; k < scene_.layers().size(); ++k) {
    if (scene_.layers()[k].id != 0) masks.push_back(visible_at(frame.index())[k]);
  }
  return normalize_proposals(std::move(masks), max_proposals);
}

BackendPair oracle_backends(const SceneSpec& spec) {
  return {std::make_shared<OracleTracker>(spec), std::make_shared<OracleSegmenter>(spec)};
}

namespace {

constexpr Rgb kPalette[] = {{220, 60, 50},  {50, 170, 80},  {60, 90, 220},
                            {230, 190, 40}, {180, 70, 200}, {40, 190, 200}};

std::vector<Point2> regular_polygon(int n, double r, double rotation) {
  std::vector<Point2> v;
  for (int k = 0; k < n; ++k) {
    const double a = rotation + 2.0 * std::numbers::pi * k / n;
    v.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return v;
}

ShapeSpec bar(bool vertical, double start, double velocity, double thickness, int depth) {
  ShapeSpec s;
  s.kind = ShapeKind::rect;
  s.width = vertical ? thickness : 128.0;
  s.height = vertical ? 128.0 : thickness;
  s.color = {128, 128, 128};
  s.depth = depth;
  s.motion.kind = MotionKind::linear;
  s.motion.origin = vertical ? Point2{start, 64.0} : Point2{64.0, start};
  s.motion.velocity = vertical ? Point2{velocity, 0.0} : Point2{0.0, velocity};
  return s;
}

}  // namespace

SceneSpec suite_scene(int index, const NoiseSpec& noise, std::uint64_t seed) {
  require(index >= 0 && index < 10, ErrorKind::invalid_input, "suite scene index must be 0..9");
  SceneSpec s;
  s.name = "suite" + std::to_string(index);
  s.width = 128;
  s.height = 128;
  s.duration = 24;
  s.background = {static_cast<std::uint8_t>(10 + 4 * index), 20, 30};
  s.noise = noise;
  s.seed = seed;

  const int n = 1 + index % 3;
  static const std::vector<std::vector<Point2>> layouts = {
      {{64, 64}}, {{40, 64}, {88, 64}}, {{36, 42}, {92, 42}, {64, 90}}};
  for (int j = 0; j < n; ++j) {
    ShapeSpec o;
    o.id = static_cast<std::uint32_t>(j + 1);
    o.color = kPalette[(index + j) % 6];
    o.depth = j + 1;
    const double r = 15.0 + 2.0 * ((index + j) % 3);
    switch ((index + j) % 3) {
      case 0:
        o.kind = ShapeKind::disk;
        o.radius = r;
        break;
      case 1:
        o.kind = ShapeKind::rect;
        o.width = 2 * r;
        o.height = 1.5 * r;
        break;
      default:
        o.kind = ShapeKind::polygon;
        o.vertices = regular_polygon(5 + index % 2, r + 1.0, 0.3 * index);
        break;
    }
    o.motion.origin = layouts[n - 1][j];
    if ((index + j) % 2 == 0) {
      o.motion.kind = MotionKind::sinusoidal;
      o.motion.amplitude = {5.0, 3.0};
      o.motion.period = 24.0;
      o.motion.phase = 0.7 * (index + j);
    } else {
      o.motion.kind = MotionKind::linear;
      o.motion.velocity = {0.4 * (index % 3 - 1), j % 2 == 0 ? 0.3 : -0.3};
    }
    s.shapes.push_back(std::move(o));
  }
  // One vertical bar crossing every object centre, sometimes a slower
  // horizontal one as well.
  s.occluders.push_back(bar(true, 20.0 + 2 * (index % 3), 3.6, 12.0, 10));
  if (index % 2 == 1) s.occluders.push_back(bar(false, 118.0, -4.4, 10.0, 11));
  s.validate();
  return s;
}

std::vector<SceneSpec> synthetic_suite(const NoiseSpec& noise, std::uint64_t seed) {
  std::vector<SceneSpec> out;
  for (int i = 0; i < 10; ++i) out.push_back(suite_scene(i, noise, seed));
  return out;
}

SceneSpec reveal_scene(const NoiseSpec& noise, std::uint64_t seed) {
  SceneSpec s;
  s.name = "reveal";
  s.width = 128;
  s.height = 128;
  s.duration = 24;
  s.noise = noise;
  s.seed = seed;
  ShapeSpec o;
  o.id = 1;
  o.kind = ShapeKind::rect;
  o.width = 48;
  o.height = 32;
  o.color = kPalette[0];
  o.depth = 1;
  o.motion.origin = {64, 64};
  s.shapes.push_back(o);

  ShapeSpec right;
  right.kind = ShapeKind::rect;
  right.width = 28;
  right.height = 40;
  right.color = {128, 128, 128};
  right.depth = 10;
  right.motion.origin = {78, 64};  // covers x in [64, 92)
  right.visible_until = 10;
  s.occluders.push_back(right);

  ShapeSpec left = right;
  left.depth = 11;
  left.motion.origin = {50, 64};  // covers x in [36, 64)
  left.visible_from = 18;
  left.visible_until.reset();
  s.occluders.push_back(left);
  s.validate();
  return s;
}

SceneSpec vanish_scene(const NoiseSpec& noise, std::uint64_t seed) {
  SceneSpec s;
  s.name = "vanish";
  s.width = 128;
  s.height = 128;
  s.duration = 24;
  s.noise = noise;
  s.seed = seed;
  ShapeSpec o;
  o.id = 1;
  o.kind = ShapeKind::disk;
  o.radius = 14;
  o.color = kPalette[2];
  o.depth = 1;
  o.motion.kind = MotionKind::linear;
  o.motion.origin = {56, 64};
  o.motion.velocity = {0.5, 0.0};
  s.shapes.push_back(o);

  ShapeSpec cover;
  cover.kind = ShapeKind::rect;
  cover.width = 64;
  cover.height = 48;
  cover.color = {128, 128, 128};
  cover.depth = 10;
  cover.motion.origin = {70, 64};
  cover.visible_from = 12;
  s.occluders.push_back(cover);
  s.validate();
  return s;
}

SceneSpec three_shapes_scene() {
  SceneSpec s;
  s.name = "three_shapes";
  s.width = 96;
  s.height = 96;
  s.duration = 8;
  ShapeSpec disk;
  disk.id = 1;
  disk.kind = ShapeKind::disk;
  disk.radius = 12;
  disk.color = kPalette[0];
  disk.depth = 1;
  disk.motion.origin = {24, 24};
  ShapeSpec rect;
  rect.id = 2;
  rect.kind = ShapeKind::rect;
  rect.width = 30;
  rect.height = 20;
  rect.color = kPalette[1];
  rect.depth = 2;
  rect.motion.origin = {68, 28};
  ShapeSpec poly;
  poly.id = 3;
  poly.kind = ShapeKind::polygon;
  poly.vertices = {{-16, 12}, {16, 12}, {0, -14}};
  poly.color = kPalette[2];
  poly.depth = 3;
  poly.motion.origin = {48, 70};
  s.shapes = {disk, rect, poly};
  s.validate();
  return s;
}

}  // namespace ptseg
