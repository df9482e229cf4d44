#include "ptseg/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ptseg/error.hpp"

namespace ptseg {

Frame::Frame(int index, int width, int height, std::vector<std::uint8_t> rgb)
    : index_(index), width_(width), height_(height), rgb_(std::move(rgb)) {
  require(index >= 0, ErrorKind::invalid_input, "frame index must be non-negative");
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "frame has a zero dimension");
  require(rgb_.size() == static_cast<std::size_t>(width) * height * 3, ErrorKind::invalid_input,
          "frame pixel buffer length does not match width*height*3");
}

Frame Frame::filled(int index, int width, int height, Rgb color) {
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "frame has a zero dimension");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = color.r;
    rgb[i + 1] = color.g;
    rgb[i + 2] = color.b;
  }
  return Frame(index, width, height, std::move(rgb));
}

bool Frame::in_bounds(Point2 p) const {
  return p.x >= 0.0 && p.y >= 0.0 && p.x < width_ && p.y < height_;
}

Frame Frame::with_index(int index) const {
  Frame f = *this;
  require(index >= 0, ErrorKind::invalid_input, "frame index must be non-negative");
  f.index_ = index;
  return f;
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0) {
  require(width >= 0 && height >= 0, ErrorKind::invalid_input, "negative mask dimension");
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require(width >= 0 && height >= 0, ErrorKind::invalid_input, "negative mask dimension");
  require(bits_.size() == static_cast<std::size_t>(width) * height, ErrorKind::invalid_input,
          "mask bit count does not match width*height");
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

bool BinaryMask::contains(Point2 p) const {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < width_ && p.y < height_)) return false;
  return test(pixel_of(p));
}

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<PixelCoord> BinaryMask::pixels() const {
  std::vector<PixelCoord> out;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (test(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits_) b ^= 1;
  return out;
}

namespace {

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  require(a.same_size(b), ErrorKind::invalid_input, "mask dimension mismatch");
  std::vector<std::uint8_t> bits(a.bits().size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = op(a.bits()[i], b.bits()[i]);
  return BinaryMask(a.width(), a.height(), std::move(bits));
}

}  // namespace

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  return combine(*this, other, [](auto a, auto b) { return static_cast<std::uint8_t>(a & b); });
}

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  return combine(*this, other, [](auto a, auto b) { return static_cast<std::uint8_t>(a | b); });
}

BinaryMask BinaryMask::minus(const BinaryMask& other) const {
  return combine(*this, other,
                 [](auto a, auto b) { return static_cast<std::uint8_t>(a & (b ^ 1)); });
}

std::size_t mask_area(const BinaryMask& mask) { return mask.area(); }

std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require(a.same_size(b), ErrorKind::invalid_input, "mask dimension mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.bits().size(); ++i) n += a.bits()[i] & b.bits()[i];
  return n;
}

LabelMap::LabelMap(int width, int height)
    : width_(width), height_(height), labels_(static_cast<std::size_t>(width) * height, 0) {
  require(width >= 0 && height >= 0, ErrorKind::invalid_input, "negative label map dimension");
}

LabelMap::LabelMap(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  require(labels_.size() == static_cast<std::size_t>(width) * height, ErrorKind::invalid_input,
          "label count does not match width*height");
}

BinaryMask LabelMap::mask_of(std::uint8_t label) const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels_[i] == label ? 1 : 0;
  return BinaryMask(width_, height_, std::move(bits));
}

std::vector<std::uint8_t> LabelMap::present_labels() const {
  std::array<bool, 256> seen{};
  for (auto v : labels_) seen[v] = true;
  std::vector<std::uint8_t> out;
  for (int v = 1; v < 256; ++v) {
    if (seen[v]) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

void LabelMap::paint(const BinaryMask& mask, std::uint8_t label) {
  require(mask.width() == width_ && mask.height() == height_, ErrorKind::invalid_input,
          "mask and label map dimension mismatch");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (mask.bits()[i]) labels_[i] = label;
  }
}

PixelCoord longest_side_extent(int width, int height, int target) {
  require(target >= 1, ErrorKind::invalid_input, "resize target must be >= 1");
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "cannot resize a zero-dimension image");
  const int longest = std::max(width, height);
  const int shortest = std::min(width, height);
  const int scaled = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(shortest) * target / longest)));
  return width >= height ? PixelCoord{target, scaled} : PixelCoord{scaled, target};
}

Frame resize_frame(const Frame& frame, int width, int height) {
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "resize to a zero dimension");
  if (width == frame.width() && height == frame.height()) return frame;
  const double sx = static_cast<double>(frame.width()) / width;
  const double sy = static_cast<double>(frame.height()) / height;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height * 3);
  const auto src = frame.pixels();
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, frame.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, frame.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, frame.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, frame.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int xx, int yy) {
          return static_cast<double>(src[(static_cast<std::size_t>(yy) * frame.width() + xx) * 3 + c]);
        };
        const double top = px(x0, y0) * (1 - wx) + px(x1, y0) * wx;
        const double bottom = px(x0, y1) * (1 - wx) + px(x1, y1) * wx;
        const double v = top * (1 - wy) + bottom * wy;
        out[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return Frame(frame.index(), width, height, std::move(out));
}

ResizedFrame resize_longest_side(const Frame& frame, int target) {
  const auto extent = longest_side_extent(frame.width(), frame.height(), target);
  ResizeScale scale{static_cast<double>(extent.x) / frame.width(),
                    static_cast<double>(extent.y) / frame.height()};
  return {resize_frame(frame, extent.x, extent.y), scale};
}

BinaryMask resize_mask_nearest(const BinaryMask& mask, int width, int height) {
  require(width >= 1 && height >= 1, ErrorKind::invalid_input, "resize to a zero dimension");
  require(mask.width() >= 1 && mask.height() >= 1, ErrorKind::invalid_input,
          "cannot resize a zero-dimension mask");
  if (width == mask.width() && height == mask.height()) return mask;
  BinaryMask out(width, height);
  const double sx = static_cast<double>(mask.width()) / width;
  const double sy = static_cast<double>(mask.height()) / height;
  for (int y = 0; y < height; ++y) {
    const int syi = std::min(static_cast<int>((y + 0.5) * sy), mask.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sxi = std::min(static_cast<int>((x + 0.5) * sx), mask.width() - 1);
      if (mask.test(sxi, syi)) out.set(x, y);
    }
  }
  return out;
}

namespace {

std::vector<PixelCoord> disk_offsets(double radius) {
  std::vector<PixelCoord> offsets;
  const int r = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r2) offsets.push_back({dx, dy});
    }
  }
  return offsets;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, double radius) {
  if (radius < 1.0) return mask;
  const auto offsets = disk_offsets(radius);
  BinaryMask out(mask.width(), mask.height());
  for (const auto& p : mask.pixels()) {
    for (const auto& o : offsets) {
      const int x = p.x + o.x;
      const int y = p.y + o.y;
      if (x >= 0 && y >= 0 && x < mask.width() && y < mask.height()) out.set(x, y);
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, double radius) {
  // Outside the image counts as unset.
  if (radius < 1.0) return mask;
  const auto offsets = disk_offsets(radius);
  BinaryMask out(mask.width(), mask.height());
  for (const auto& p : mask.pixels()) {
    bool keep = true;
    for (const auto& o : offsets) {
      const int x = p.x + o.x;
      const int y = p.y + o.y;
      if (x < 0 || y < 0 || x >= mask.width() || y >= mask.height() || !mask.test(x, y)) {
        keep = false;
        break;
      }
    }
    if (keep) out.set(p.x, p.y);
  }
  return out;
}

namespace {

// Felzenszwalb-Huttenlocher 1D squared distance transform.
constexpr double kFar = 1e20;

void squared_edt_1d(std::span<const double> f, std::span<double> d, std::vector<int>& v,
                    std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
           (2.0 * q - 2.0 * p);
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_to_outside(const BinaryMask& mask) {
  // Pad by one unset pixel on every side so the image border counts as outside.
  const int w = mask.width() + 2;
  const int h = mask.height() + 2;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) grid[static_cast<std::size_t>(y + 1) * w + x + 1] = kFar;
    }
  }
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(std::max(w, h));
  std::vector<double> d(std::max(w, h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    squared_edt_1d(std::span(f.data(), h), std::span(d.data(), h), v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * w, w, f.begin());
    squared_edt_1d(std::span(f.data(), w), std::span(d.data(), w), v, z);
    std::copy_n(d.begin(), w, grid.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  std::vector<double> out(static_cast<std::size_t>(mask.width()) * mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      out[static_cast<std::size_t>(y) * mask.width() + x] =
          std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + x + 1]);
    }
  }
  return out;
}

std::optional<PixelCoord> pole_of_inaccessibility(const BinaryMask& mask) {
  if (mask.is_empty()) return std::nullopt;
  const auto dist = distance_to_outside(mask);
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return PixelCoord{static_cast<int>(best % mask.width()), static_cast<int>(best / mask.width())};
}

}  // namespace ptseg
