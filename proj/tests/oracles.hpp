#pragma once

// Slow reference implementations shared by the unit tests and the acceptance
// binary. They follow the textbook definitions directly and share no code
// with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ptseg/image.hpp"

namespace ptseg::oracle {

using Grid = std::vector<std::vector<int>>;

inline Grid to_grid(const BinaryMask& m) {
  Grid g(m.height(), std::vector<int>(m.width(), 0));
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) g[y][x] = m.test(x, y) ? 1 : 0;
  }
  return g;
}

/// Boundary by shifted copies: east, south and south-east neighbours padded
/// with zeros, then the last row and column recomputed from one neighbour
/// and the corner cleared.
inline Grid seg2bmap(const Grid& seg) {
  const int h = static_cast<int>(seg.size());
  const int w = h == 0 ? 0 : static_cast<int>(seg[0].size());
  Grid e(h, std::vector<int>(w, 0));
  Grid s = e;
  Grid se = e;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) e[y][x] = seg[y][x + 1];
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) s[y][x] = seg[y + 1][x];
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) se[y][x] = seg[y + 1][x + 1];
  }
  Grid b(h, std::vector<int>(w, 0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      b[y][x] = (seg[y][x] ^ e[y][x]) | (seg[y][x] ^ s[y][x]) | (seg[y][x] ^ se[y][x]);
    }
  }
  if (h > 0 && w > 0) {
    for (int x = 0; x < w; ++x) b[h - 1][x] = seg[h - 1][x] ^ e[h - 1][x];
    for (int y = 0; y < h; ++y) b[y][w - 1] = seg[y][w - 1] ^ s[y][w - 1];
    b[h - 1][w - 1] = 0;
  }
  return b;
}

struct Pix {
  int x;
  int y;
};

inline std::vector<Pix> ones(const Grid& g) {
  std::vector<Pix> out;
  for (int y = 0; y < static_cast<int>(g.size()); ++y) {
    for (int x = 0; x < static_cast<int>(g[y].size()); ++x) {
      if (g[y][x]) out.push_back({x, y});
    }
  }
  return out;
}

/// Fraction of `from` pixels with some `to` pixel within `tol`, by checking
/// every pair.
inline double matched_fraction(const std::vector<Pix>& from, const std::vector<Pix>& to, int tol) {
  std::size_t hit = 0;
  for (const auto& a : from) {
    for (const auto& b : to) {
      const double d = std::hypot(a.x - b.x, a.y - b.y);
      if (d <= tol + 1e-12) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

struct Contour {
  double precision;
  double recall;
  double f;
};

inline Contour contour(const BinaryMask& pred, const BinaryMask& gt, int tol) {
  const auto pb = ones(seg2bmap(to_grid(pred)));
  const auto gb = ones(seg2bmap(to_grid(gt)));
  if (pb.empty() && gb.empty()) return {1.0, 1.0, 1.0};
  if (pb.empty() || gb.empty()) return {pb.empty() ? 1.0 : 0.0, gb.empty() ? 1.0 : 0.0, 0.0};
  const double p = matched_fraction(pb, gb, tol);
  const double r = matched_fraction(gb, pb, tol);
  const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  return {p, r, f};
}

/// IoU from explicit set counts.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  long inter = 0;
  long uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.test(x, y);
      const bool pb = b.test(x, y);
      inter += pa && pb;
      uni += pa || pb;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline int tolerance(int w, int h) {
  return static_cast<int>(std::ceil(0.008 * std::sqrt(static_cast<double>(w) * w + static_cast<double>(h) * h)));
}

}  // namespace ptseg::oracle
