#include "ptseg/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ptseg/error.hpp"

namespace ptseg {

std::vector<BinaryMask> SegmenterBackend::propose_masks(const Frame&, int) {
  fail(ErrorKind::unsupported_capability, "segmenter backend does not propose masks");
}

void validate_track_request(std::span<const LabeledPoint> queries, std::span<const Frame> frames) {
  require(!queries.empty(), ErrorKind::invalid_input, "tracking needs at least one query point");
  require(!frames.empty(), ErrorKind::invalid_input, "tracking needs at least one frame");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    require(frames[i].index() == frames[0].index() + static_cast<int>(i),
            ErrorKind::invalid_input, "tracking frames must be contiguous");
    require(frames[i].width() == frames[0].width() && frames[i].height() == frames[0].height(),
            ErrorKind::invalid_input, "tracking frames differ in size");
  }
  for (const auto& q : queries) {
    require(frames[0].in_bounds(q.position()), ErrorKind::invalid_input,
            "query point outside the query frame");
  }
}

void validate_track_response(const TrajectoryBundle& bundle,
                             std::span<const LabeledPoint> queries,
                             std::span<const Frame> frames) {
  require(bundle.start_frame() == frames.front().index() &&
              bundle.num_frames() == static_cast<int>(frames.size()) &&
              bundle.num_points() == static_cast<int>(queries.size()),
          ErrorKind::protocol, "tracker returned a bundle of the wrong shape");
  for (int i = 0; i < bundle.num_points(); ++i) {
    require(bundle.queries()[i] == queries[i], ErrorKind::protocol,
            "tracker altered the query points");
  }
}

TrajectoryBundle track_points(TrackerBackend& backend, std::span<const LabeledPoint> queries,
                              std::span<const Frame> frames) {
  validate_track_request(queries, frames);
  const auto window = backend.capabilities().window_size;
  const int total = static_cast<int>(frames.size());
  if (!window || *window >= total || *window < 2) {
    auto bundle = backend.track(queries, frames);
    validate_track_response(bundle, queries, frames);
    return bundle;
  }

  TrajectoryBundle stitched(frames.front().index(), total,
                            std::vector<LabeledPoint>(queries.begin(), queries.end()));
  std::vector<LabeledPoint> chunk_queries(queries.begin(), queries.end());
  int begin = 0;
  for (;;) {
    const int end = std::min(begin + *window, total);  // exclusive
    const auto clip = frames.subspan(begin, end - begin);
    auto chunk = backend.track(chunk_queries, clip);
    validate_track_response(chunk, chunk_queries, clip);
    for (int t = begin + 1; t < end; ++t) {
      const int frame = frames[t].index();
      for (int i = 0; i < chunk.num_points(); ++i) {
        stitched.set(frame, i, chunk.position(frame, i), chunk.occlusion(frame, i));
      }
    }
    if (end == total) break;
    const int carry = frames[end - 1].index();
    for (int i = 0; i < chunk.num_points(); ++i) {
      // Points that left the image re-enter the next window at the border.
      const auto p = chunk.position(carry, i);
      chunk_queries[i].x = std::clamp(p.x, 0.0, std::nextafter(static_cast<double>(frames[0].width()), 0.0));
      chunk_queries[i].y = std::clamp(p.y, 0.0, std::nextafter(static_cast<double>(frames[0].height()), 0.0));
    }
    begin = end - 1;
  }
  return stitched;
}

std::vector<BinaryMask> normalize_proposals(std::vector<BinaryMask> masks, int max_proposals) {
  require(max_proposals >= 1, ErrorKind::invalid_input, "max_proposals must be >= 1");
  std::vector<std::size_t> areas(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) areas[i] = masks[i].area();
  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
  std::vector<BinaryMask> kept;
  std::vector<std::size_t> kept_areas;
  for (auto i : order) {
    if (kept.size() == static_cast<std::size_t>(max_proposals)) break;
    if (areas[i] == 0) continue;
    bool duplicate = false;
    for (std::size_t k = 0; k < kept.size() && !duplicate; ++k) {
      const auto inter = intersection_area(masks[i], kept[k]);
      const auto uni = areas[i] + kept_areas[k] - inter;
      duplicate = static_cast<double>(inter) > 0.9 * static_cast<double>(uni);
    }
    if (duplicate) continue;
    kept.push_back(std::move(masks[i]));
    kept_areas.push_back(areas[i]);
  }
  return kept;
}

}  // namespace ptseg
