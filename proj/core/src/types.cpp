#include "ptseg/types.hpp"

#include <algorithm>
#include <string>

#include "ptseg/error.hpp"

namespace ptseg {

std::size_t QueryPointSet::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const auto& p) { return p.positive(); }));
}

std::size_t QueryPointSet::negative_count() const { return points.size() - positive_count(); }

TrajectoryBundle::TrajectoryBundle(int start_frame, int num_frames,
                                   std::vector<LabeledPoint> queries)
    : start_frame_(start_frame), num_frames_(num_frames), queries_(std::move(queries)) {
  require(start_frame >= 0, ErrorKind::invalid_input, "bundle start frame must be non-negative");
  require(num_frames >= 1, ErrorKind::invalid_input, "bundle must cover at least one frame");
  const std::size_t n = queries_.size();
  positions_.resize(n * num_frames);
  occlusion_.assign(n * num_frames, 0.0);
  for (int t = 0; t < num_frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) positions_[t * n + i] = queries_[i].position();
  }
}

std::size_t TrajectoryBundle::offset(int frame, int point) const {
  require(covers(frame), ErrorKind::invalid_input,
          "frame " + std::to_string(frame) + " outside trajectory bundle");
  require(point >= 0 && point < num_points(), ErrorKind::invalid_input,
          "point index outside trajectory bundle");
  return static_cast<std::size_t>(frame - start_frame_) * queries_.size() + point;
}

void TrajectoryBundle::set(int frame, int point, Point2 position, double occlusion) {
  require(frame != start_frame_, ErrorKind::invalid_input,
          "the query frame of a bundle is fixed to the queries");
  require(occlusion >= 0.0 && occlusion <= 1.0, ErrorKind::invalid_input,
          "occlusion score outside [0,1]");
  const auto o = offset(frame, point);
  positions_[o] = position;
  occlusion_[o] = occlusion;
}

void TrajectoryBundle::set_occlusion(int frame, int point, double occlusion) {
  require(frame != start_frame_, ErrorKind::invalid_input,
          "the query frame of a bundle is fixed to the queries");
  require(occlusion >= 0.0 && occlusion <= 1.0, ErrorKind::invalid_input,
          "occlusion score outside [0,1]");
  occlusion_[offset(frame, point)] = occlusion;
}

std::vector<LabeledPoint> TrajectoryBundle::points_at(int frame) const {
  std::vector<LabeledPoint> out = queries_;
  for (int i = 0; i < num_points(); ++i) {
    const auto p = position(frame, i);
    out[i].x = p.x;
    out[i].y = p.y;
  }
  return out;
}

std::vector<double> TrajectoryBundle::occlusion_at(int frame) const {
  std::vector<double> out(queries_.size());
  for (int i = 0; i < num_points(); ++i) out[i] = occlusion(frame, i);
  return out;
}

}  // namespace ptseg
