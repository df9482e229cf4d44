#include "ptseg/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ptseg/error.hpp"

namespace ptseg {
namespace {

// Larger masks are subsampled before clustering; PAM is quadratic in pixels.
constexpr std::size_t kMaxMedoidCandidates = 1024;
constexpr double kCornerQuality = 0.01;
constexpr int kCornerRadius = 3;

using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Marks pixels already handed out by an earlier sampler in the same request.
class TakenSet {
 public:
  TakenSet(int width, int height) : width_(width), bits_(static_cast<std::size_t>(width) * height) {}
  bool has(PixelCoord p) const { return bits_[index(p)] != 0; }
  void add(PixelCoord p) { bits_[index(p)] = 1; }

 private:
  std::size_t index(PixelCoord p) const { return static_cast<std::size_t>(p.y) * width_ + p.x; }
  int width_;
  std::vector<std::uint8_t> bits_;
};

std::vector<PixelCoord> available(const std::vector<PixelCoord>& pool, const TakenSet* taken) {
  if (taken == nullptr) return pool;
  std::vector<PixelCoord> out;
  out.reserve(pool.size());
  for (const auto& p : pool) {
    if (!taken->has(p)) out.push_back(p);
  }
  // Reuse is allowed once everything is taken.
  return out.empty() ? pool : out;
}

/// Partial Fisher-Yates over `pool`; tops up with replacement past its size.
std::vector<PixelCoord> draw_pixels(std::vector<PixelCoord> pool, int count, Rng& rng) {
  std::vector<PixelCoord> out;
  if (pool.empty() || count <= 0) return out;
  const std::size_t n = pool.size();
  const std::size_t distinct = std::min<std::size_t>(n, static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < distinct; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  while (out.size() < static_cast<std::size_t>(count)) out.push_back(pool[uniform_index(rng, n)]);
  return out;
}

std::vector<Point2> to_centers(const std::vector<PixelCoord>& pixels) {
  std::vector<Point2> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) out.push_back(center_of(p));
  return out;
}

void check_request(const SamplingRequest& req) {
  require(req.count >= 1, ErrorKind::invalid_input, "sample count must be >= 1");
  require(!req.mask.is_empty(), ErrorKind::empty_mask, "cannot sample points from an empty mask");
}

std::vector<PixelCoord> random_impl(const SamplingRequest& req, const std::vector<PixelCoord>& pool,
                                    const TakenSet* taken) {
  Rng rng(req.seed);
  return draw_pixels(available(pool, taken), req.count, rng);
}

std::vector<PixelCoord> kmedoids_impl(const SamplingRequest& req,
                                      const std::vector<PixelCoord>& pool) {
  if (pool.size() <= static_cast<std::size_t>(req.count)) {
    Rng rng(req.seed);
    return draw_pixels(pool, req.count, rng);
  }
  std::vector<PixelCoord> candidates = pool;
  if (candidates.size() > kMaxMedoidCandidates) {
    Rng rng(derive_seed(req.seed, 0x6b6d));
    candidates = draw_pixels(std::move(candidates), static_cast<int>(kMaxMedoidCandidates), rng);
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });
  }
  auto result = kmedoids_cluster(candidates, req.count, req.seed);
  std::sort(result.medoids.begin(), result.medoids.end(),
            [](const auto& a, const auto& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  return result.medoids;
}

std::vector<PixelCoord> shi_tomasi_impl(const SamplingRequest& req,
                                        const std::vector<PixelCoord>& pool, TakenSet* taken) {
  require(req.frame != nullptr, ErrorKind::invalid_input, "Shi-Tomasi sampling needs a frame");
  require(req.frame->width() == req.mask.width() && req.frame->height() == req.mask.height(),
          ErrorKind::invalid_input, "frame and mask dimensions differ");
  std::vector<PixelCoord> out;
  for (const auto& c : shi_tomasi_corners(*req.frame, req.mask)) {
    if (out.size() == static_cast<std::size_t>(req.count)) break;
    if (taken != nullptr && taken->has(c)) continue;
    out.push_back(c);
  }
  if (out.size() < static_cast<std::size_t>(req.count)) {
    TakenSet local(req.mask.width(), req.mask.height());
    TakenSet& used = taken != nullptr ? *taken : local;
    for (const auto& c : out) used.add(c);
    Rng rng(derive_seed(req.seed, 0x7374));
    const auto pad = draw_pixels(available(pool, &used), req.count - static_cast<int>(out.size()), rng);
    out.insert(out.end(), pad.begin(), pad.end());
  }
  return out;
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(5);
  double sum = 0.0;
  for (int d = -2; d <= 2; ++d) {
    k[d + 2] = std::exp(-0.5 * d * d);
    sum += k[d + 2];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double kmedoids_cost(std::span<const PixelCoord> points, std::span<const PixelCoord> medoids) {
  double total = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : medoids) best = std::min(best, std::hypot(p.x - m.x, p.y - m.y));
    total += best;
  }
  return total;
}

KMedoidsResult kmedoids_cluster(std::span<const PixelCoord> points, int k, std::uint64_t seed) {
  const std::size_t n = points.size();
  require(k >= 1 && static_cast<std::size_t>(k) <= n, ErrorKind::invalid_input,
          "k-medoids needs 1 <= k <= number of points");
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double d = std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
  auto D = [&](std::size_t a, std::size_t b) { return dist[a * n + b]; };

  // Farthest-point initialization from a seeded first medoid.
  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  {
    Rng rng(seed);
    std::size_t first = uniform_index(rng, n);
    medoids.push_back(first);
    is_medoid[first] = 1;
    std::vector<double> mind(n);
    for (std::size_t o = 0; o < n; ++o) mind[o] = D(o, first);
    while (medoids.size() < static_cast<std::size_t>(k)) {
      std::size_t next = n;
      for (std::size_t o = 0; o < n; ++o) {
        if (is_medoid[o]) continue;
        if (next == n || mind[o] > mind[next]) next = o;
      }
      medoids.push_back(next);
      is_medoid[next] = 1;
      for (std::size_t o = 0; o < n; ++o) mind[o] = std::min(mind[o], D(o, next));
    }
  }

  std::vector<std::size_t> nearest(n);
  std::vector<double> d_near(n);
  std::vector<double> d_second(n);
  auto assign = [&] {
    for (std::size_t o = 0; o < n; ++o) {
      double best = std::numeric_limits<double>::infinity();
      double second = std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < medoids.size(); ++i) {
        const double d = D(o, medoids[i]);
        if (d < best) {
          second = best;
          best = d;
          best_i = i;
        } else if (d < second) {
          second = d;
        }
      }
      nearest[o] = best_i;
      d_near[o] = best;
      d_second[o] = second;
    }
  };
  assign();

  // Best-improvement swap, evaluating all medoids per candidate in one pass
  // over the data (FastPAM1 decomposition).
  int swaps = 0;
  std::vector<double> delta(medoids.size());
  for (;;) {
    double best_delta = -1e-9;
    std::size_t best_m = 0;
    std::size_t best_c = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      std::fill(delta.begin(), delta.end(), 0.0);
      double shared = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double doc = D(o, c);
        const double gain = std::min(doc - d_near[o], 0.0);
        shared += gain;
        delta[nearest[o]] += std::min(d_second[o], doc) - d_near[o] - gain;
      }
      for (std::size_t i = 0; i < medoids.size(); ++i) {
        const double total = shared + delta[i];
        if (total < best_delta) {
          best_delta = total;
          best_m = i;
          best_c = c;
        }
      }
    }
    if (best_c == n) break;
    is_medoid[medoids[best_m]] = 0;
    medoids[best_m] = best_c;
    is_medoid[best_c] = 1;
    ++swaps;
    assign();
  }

  KMedoidsResult result;
  result.swaps = swaps;
  for (auto m : medoids) result.medoids.push_back(points[m]);
  for (std::size_t o = 0; o < n; ++o) result.total_distance += d_near[o];
  return result;
}

std::vector<double> min_eigenvalue_map(const Frame& frame) {
  const int w = frame.width();
  const int h = frame.height();
  std::vector<double> gray(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto c = frame.at(x, y);
      gray[static_cast<std::size_t>(y) * w + x] = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
    }
  }
  auto g = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return gray[static_cast<std::size_t>(y) * w + x];
  };
  const std::size_t n = gray.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
      const double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      xx[i] = gx * gx;
      yy[i] = gy * gy;
      xy[i] = gx * gy;
    }
  }
  const auto kernel = gaussian_kernel();
  auto blur = [&](std::vector<double>& img) {
    std::vector<double> tmp(n);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int d = -2; d <= 2; ++d) {
          s += kernel[d + 2] * img[static_cast<std::size_t>(y) * w + std::clamp(x + d, 0, w - 1)];
        }
        tmp[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int d = -2; d <= 2; ++d) {
          s += kernel[d + 2] * tmp[static_cast<std::size_t>(std::clamp(y + d, 0, h - 1)) * w + x];
        }
        img[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
  };
  blur(xx);
  blur(yy);
  blur(xy);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double half_trace = 0.5 * (xx[i] + yy[i]);
    const double half_diff = 0.5 * (xx[i] - yy[i]);
    out[i] = std::max(0.0, half_trace - std::sqrt(half_diff * half_diff + xy[i] * xy[i]));
  }
  return out;
}

std::vector<PixelCoord> shi_tomasi_corners(const Frame& frame, const BinaryMask& mask) {
  require(frame.width() == mask.width() && frame.height() == mask.height(),
          ErrorKind::invalid_input, "frame and mask dimensions differ");
  const int w = frame.width();
  const int h = frame.height();
  const auto score = min_eigenvalue_map(frame);
  auto at = [&](int x, int y) { return score[static_cast<std::size_t>(y) * w + x]; };

  double peak = 0.0;
  const auto pixels = mask.pixels();
  for (const auto& p : pixels) peak = std::max(peak, at(p.x, p.y));
  std::vector<PixelCoord> corners;
  if (peak <= 1e-9) return corners;
  const double floor = kCornerQuality * peak;
  constexpr int r2 = kCornerRadius * kCornerRadius;

  struct Candidate {
    double score;
    PixelCoord p;
  };
  std::vector<Candidate> candidates;
  for (const auto& p : pixels) {
    const double s = at(p.x, p.y);
    if (s < floor) continue;
    bool is_max = true;
    for (int dy = -kCornerRadius; dy <= kCornerRadius && is_max; ++dy) {
      for (int dx = -kCornerRadius; dx <= kCornerRadius; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int x = p.x + dx;
        const int y = p.y + dy;
        if (x < 0 || y < 0 || x >= w || y >= h || !mask.test(x, y)) continue;
        if (at(x, y) > s) {
          is_max = false;
          break;
        }
      }
    }
    if (is_max) candidates.push_back({s, p});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  for (const auto& c : candidates) {
    const bool clear = std::none_of(corners.begin(), corners.end(), [&](const PixelCoord& q) {
      const int dx = q.x - c.p.x;
      const int dy = q.y - c.p.y;
      return dx * dx + dy * dy <= r2;
    });
    if (clear) corners.push_back(c.p);
  }
  return corners;
}

std::vector<Point2> sample_random(const SamplingRequest& req) {
  check_request(req);
  return to_centers(random_impl(req, req.mask.pixels(), nullptr));
}

std::vector<Point2> sample_kmedoids(const SamplingRequest& req) {
  check_request(req);
  return to_centers(kmedoids_impl(req, req.mask.pixels()));
}

std::vector<Point2> sample_shi_tomasi(const SamplingRequest& req) {
  check_request(req);
  return to_centers(shi_tomasi_impl(req, req.mask.pixels(), nullptr));
}

MixedSplit mixed_split(int count) {
  const int base = count / 3;
  const int rem = count % 3;
  return {base + (rem >= 1 ? 1 : 0), base + (rem >= 2 ? 1 : 0), base};
}

std::vector<Point2> sample_mixed(const SamplingRequest& req) {
  check_request(req);
  require(req.frame != nullptr, ErrorKind::invalid_input, "mixed sampling needs a frame");
  const auto split = mixed_split(req.count);
  const auto pool = req.mask.pixels();
  TakenSet taken(req.mask.width(), req.mask.height());
  std::vector<PixelCoord> out;

  if (split.kmedoids > 0) {
    SamplingRequest sub{req.mask, req.frame, split.kmedoids, derive_seed(req.seed, 1)};
    for (const auto& p : kmedoids_impl(sub, pool)) {
      out.push_back(p);
      taken.add(p);
    }
  }
  if (split.shi_tomasi > 0) {
    SamplingRequest sub{req.mask, req.frame, split.shi_tomasi, derive_seed(req.seed, 2)};
    for (const auto& p : shi_tomasi_impl(sub, pool, &taken)) {
      out.push_back(p);
      taken.add(p);
    }
  }
  if (split.random > 0) {
    SamplingRequest sub{req.mask, req.frame, split.random, derive_seed(req.seed, 3)};
    for (const auto& p : random_impl(sub, pool, &taken)) out.push_back(p);
  }
  return to_centers(out);
}

std::vector<Point2> sample_points(PointSelection method, const SamplingRequest& req) {
  switch (method) {
    case PointSelection::random: return sample_random(req);
    case PointSelection::kmedoids: return sample_kmedoids(req);
    case PointSelection::shi_tomasi: return sample_shi_tomasi(req);
    case PointSelection::mixed: return sample_mixed(req);
  }
  fail(ErrorKind::invalid_input, "unknown point selection method");
}

std::vector<LabeledPoint> sample_negative(ObjectId target,
                                          const std::map<ObjectId, BinaryMask>& masks,
                                          const Frame* frame, int count, std::uint64_t seed,
                                          std::span<const LabeledPoint> other_positives) {
  const auto it = masks.find(target);
  require(it != masks.end(), ErrorKind::invalid_input,
          "no mask for object " + std::to_string(target.value));
  require(count >= 0, ErrorKind::invalid_input, "negative count must be >= 0");
  std::vector<LabeledPoint> out;
  if (count > 0) {
    const BinaryMask background = it->second.complement();
    require(!background.is_empty(), ErrorKind::empty_mask,
            "object " + std::to_string(target.value) + " covers the whole frame");
    SamplingRequest req{background, frame, count, seed};
    for (const auto& p : sample_mixed(req)) {
      out.push_back({p.x, p.y, PointLabel::negative, target});
    }
  }
  for (const auto& p : other_positives) {
    if (p.object == target || !p.positive()) continue;
    out.push_back({p.x, p.y, PointLabel::negative, target});
  }
  return out;
}

}  // namespace ptseg
