#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ptseg {

/// Continuous image coordinates. Pixel (i, j) covers [i, i+1) x [j, j+1), so
/// its center sits at (i + 0.5, j + 0.5).
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

inline PixelCoord pixel_of(Point2 p) {
  return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}
inline Point2 center_of(PixelCoord p) { return {p.x + 0.5, p.y + 0.5}; }

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// One RGB video frame, row-major, 8 bits per channel.
class Frame {
 public:
  Frame(int index, int width, int height, std::vector<std::uint8_t> rgb);
  static Frame filled(int index, int width, int height, Rgb color);

  int index() const { return index_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(Point2 p) const;

  Rgb at(int x, int y) const {
    const std::size_t o = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {rgb_[o], rgb_[o + 1], rgb_[o + 2]};
  }
  std::span<const std::uint8_t> pixels() const { return rgb_; }

  Frame with_index(int index) const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int index_;
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  /// Any non-zero byte counts as a set bit.
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }

  bool test(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool test(PixelCoord p) const { return test(p.x, p.y); }
  /// False for points outside the mask extent.
  bool contains(Point2 p) const;
  void set(int x, int y, bool value = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }

  std::size_t area() const;
  bool is_empty() const { return area() == 0; }
  bool same_size(const BinaryMask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Set pixels in row-major order.
  std::vector<PixelCoord> pixels() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

  BinaryMask complement() const;
  BinaryMask operator&(const BinaryMask& other) const;
  BinaryMask operator|(const BinaryMask& other) const;
  /// this AND NOT other
  BinaryMask minus(const BinaryMask& other) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

std::size_t mask_area(const BinaryMask& mask);
std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

/// Per-pixel object labels (0 = background), the in-memory form of an
/// indexed-PNG annotation.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height);
  LabelMap(int width, int height, std::vector<std::uint8_t> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t at(int x, int y) const {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, std::uint8_t v) {
    labels_[static_cast<std::size_t>(y) * width_ + x] = v;
  }
  std::span<const std::uint8_t> labels() const { return labels_; }

  BinaryMask mask_of(std::uint8_t label) const;
  /// Non-zero labels present, ascending.
  std::vector<std::uint8_t> present_labels() const;
  /// Paints `mask` with `label`, overwriting earlier labels.
  void paint(const BinaryMask& mask, std::uint8_t label);

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Scale factors from original to resized coordinates.
struct ResizeScale {
  double x = 1.0;
  double y = 1.0;

  Point2 to_resized(Point2 p) const { return {p.x * x, p.y * y}; }
  Point2 to_original(Point2 p) const { return {p.x / x, p.y / y}; }
};

struct ResizedFrame {
  Frame frame;
  ResizeScale scale;
};

/// Output extent when scaling (width, height) so the longer side equals
/// `target`: the short side is round(short * target / long), at least 1.
PixelCoord longest_side_extent(int width, int height, int target);

/// Bilinear, pixel-center aligned.
ResizedFrame resize_longest_side(const Frame& frame, int target);
Frame resize_frame(const Frame& frame, int width, int height);
BinaryMask resize_mask_nearest(const BinaryMask& mask, int width, int height);

/// Dilation with a Euclidean disk of the given radius (offsets with
/// dx^2 + dy^2 <= radius^2).
BinaryMask dilate(const BinaryMask& mask, double radius);
BinaryMask erode(const BinaryMask& mask, double radius);

/// Euclidean distance from each set pixel to the nearest unset pixel,
/// treating everything outside the image as unset. Unset pixels get 0.
std::vector<double> distance_to_outside(const BinaryMask& mask);

/// Set pixel farthest from the region's complement; first in row-major order
/// on ties. Empty masks have none.
std::optional<PixelCoord> pole_of_inaccessibility(const BinaryMask& mask);

}  // namespace ptseg
