#include "ptseg/metrics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ptseg/error.hpp"

namespace ptseg {

namespace {

void require_same_size(const BinaryMask& a, const BinaryMask& b) {
  require(a.same_size(b), ErrorKind::invalid_input,
          "mask sizes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
              " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

}  // namespace

double region_j(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred, gt);
  const auto inter = intersection_area(pred, gt);
  const auto uni = pred.area() + gt.area() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask boundary_map(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask b(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool v = mask.test(x, y);
      const bool e = x + 1 < w && mask.test(x + 1, y);
      const bool s = y + 1 < h && mask.test(x, y + 1);
      const bool se = x + 1 < w && y + 1 < h && mask.test(x + 1, y + 1);
      bool edge;
      if (x == w - 1 && y == h - 1) {
        edge = false;
      } else if (y == h - 1) {
        edge = v != e;
      } else if (x == w - 1) {
        edge = v != s;
      } else {
        edge = v != e || v != s || v != se;
      }
      if (edge) b.set(x, y);
    }
  }
  return b;
}

int default_boundary_tolerance(int width, int height) {
  return static_cast<int>(std::ceil(0.008 * std::hypot(width, height)));
}

ContourScore contour_score(const BinaryMask& pred, const BinaryMask& gt, int tolerance) {
  require_same_size(pred, gt);
  require(tolerance >= 0, ErrorKind::invalid_input, "boundary tolerance must be >= 0");
  const auto pb = boundary_map(pred);
  const auto gb = boundary_map(gt);
  const auto np = pb.area();
  const auto ng = gb.area();
  ContourScore s;
  if (np == 0 && ng == 0) return {1.0, 1.0, 1.0};
  if (np == 0 || ng == 0) {
    s.precision = np == 0 ? 1.0 : 0.0;
    s.recall = ng == 0 ? 1.0 : 0.0;
    return s;
  }
  const auto pd = dilate(pb, tolerance);
  const auto gd = dilate(gb, tolerance);
  s.precision = static_cast<double>(intersection_area(pb, gd)) / static_cast<double>(np);
  s.recall = static_cast<double>(intersection_area(gb, pd)) / static_cast<double>(ng);
  if (s.precision + s.recall > 0) {
    s.f = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

double contour_f(const BinaryMask& pred, const BinaryMask& gt, int tolerance) {
  return contour_score(pred, gt, tolerance).f;
}

double contour_f(const BinaryMask& pred, const BinaryMask& gt) {
  return contour_f(pred, gt, default_boundary_tolerance(gt.width(), gt.height()));
}

std::string_view to_string(VisibilityBucket b) {
  switch (b) {
    case VisibilityBucket::short_span:
      return "short";
    case VisibilityBucket::medium_span:
      return "medium";
    case VisibilityBucket::long_span:
      return "long";
  }
  return "short";
}

VisibilityBucket visibility_bucket(int visible_frames) {
  if (visible_frames <= 5) return VisibilityBucket::short_span;
  if (visible_frames <= 30) return VisibilityBucket::medium_span;
  return VisibilityBucket::long_span;
}

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

SequenceScore score_sequence(std::string sequence, const ObjectMasks& pred, const ObjectMasks& gt,
                             std::optional<int> tolerance) {
  SequenceScore out;
  out.sequence = std::move(sequence);
  std::vector<double> js;
  std::vector<double> fs;
  for (const auto& [id, gmasks] : gt) {
    ObjectScore o;
    o.object = id;
    std::optional<int> first;
    for (int t = 0; t < static_cast<int>(gmasks.size()); ++t) {
      if (!gmasks[t].is_empty()) {
        ++o.visible_frames;
        if (!first) first = t;
      }
    }
    if (!first) continue;  // never visible, nothing to track
    o.first_frame = *first;
    o.bucket = visibility_bucket(o.visible_frames);
    const auto it = pred.find(id);
    for (int t = *first + 1; t < static_cast<int>(gmasks.size()); ++t) {
      const auto& g = gmasks[t];
      const BinaryMask* p = nullptr;
      if (it != pred.end() && t < static_cast<int>(it->second.size()) &&
          (it->second[t].width() > 0 || it->second[t].height() > 0)) {
        p = &it->second[t];
      }
      o.frames.push_back(t);
      if (p == nullptr) {
        o.missing_frames.push_back(t);
        o.j.push_back(0.0);
        o.f.push_back(0.0);
        continue;
      }
      o.j.push_back(region_j(*p, g));
      o.f.push_back(contour_f(*p, g, tolerance.value_or(default_boundary_tolerance(g.width(), g.height()))));
    }
    o.mean_j = mean(o.j);
    o.mean_f = mean(o.f);
    o.jf = (o.mean_j + o.mean_f) / 2.0;
    if (o.scored()) {
      js.push_back(o.mean_j);
      fs.push_back(o.mean_f);
    }
    out.objects.push_back(std::move(o));
  }
  out.mean_j = mean(js);
  out.mean_f = mean(fs);
  out.jf = (out.mean_j + out.mean_f) / 2.0;
  return out;
}

DatasetScore aggregate(std::vector<SequenceScore> sequences) {
  DatasetScore out;
  std::vector<double> js;
  std::vector<double> fs;
  std::map<VisibilityBucket, std::pair<std::vector<double>, std::vector<double>>> per_bucket;
  for (const auto& s : sequences) {
    for (const auto& o : s.objects) {
      if (!o.scored()) continue;
      js.push_back(o.mean_j);
      fs.push_back(o.mean_f);
      per_bucket[o.bucket].first.push_back(o.mean_j);
      per_bucket[o.bucket].second.push_back(o.mean_f);
    }
  }
  out.mean_j = mean(js);
  out.mean_f = mean(fs);
  out.jf = (out.mean_j + out.mean_f) / 2.0;
  for (const auto& [b, v] : per_bucket) {
    BucketScore bs;
    bs.objects = static_cast<int>(v.first.size());
    bs.mean_j = mean(v.first);
    bs.mean_f = mean(v.second);
    bs.jf = (bs.mean_j + bs.mean_f) / 2.0;
    out.buckets[b] = bs;
  }
  out.sequences = std::move(sequences);
  return out;
}

void to_json(nlohmann::json& j, const DatasetScore& s) {
  auto seqs = nlohmann::json::array();
  for (const auto& q : s.sequences) {
    auto objs = nlohmann::json::array();
    for (const auto& o : q.objects) {
      objs.push_back({{"object", o.object.value},
                      {"first_frame", o.first_frame},
                      {"frames", o.frames},
                      {"j", o.j},
                      {"f", o.f},
                      {"mean_j", o.mean_j},
                      {"mean_f", o.mean_f},
                      {"jf", o.jf},
                      {"visible_frames", o.visible_frames},
                      {"bucket", to_string(o.bucket)},
                      {"missing_frames", o.missing_frames}});
    }
    seqs.push_back({{"sequence", q.sequence},
                    {"mean_j", q.mean_j},
                    {"mean_f", q.mean_f},
                    {"jf", q.jf},
                    {"objects", objs}});
  }
  auto buckets = nlohmann::json::object();
  for (const auto& [b, v] : s.buckets) {
    buckets[std::string(to_string(b))] = {
        {"objects", v.objects}, {"mean_j", v.mean_j}, {"mean_f", v.mean_f}, {"jf", v.jf}};
  }
  j = {{"mean_j", s.mean_j},
       {"mean_f", s.mean_f},
       {"jf", s.jf},
       {"buckets", buckets},
       {"sequences", seqs}};
}

}  // namespace ptseg
