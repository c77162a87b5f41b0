#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coin/geometry.hpp"

namespace coin {

class BinaryMask {
public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator()(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t count() const;
  bool any() const;
  // Tight box around set pixel centers, nullopt when empty.
  std::optional<Rect> bounding_box() const;

  bool operator==(const BinaryMask&) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b);

// Both empty gives 1, exactly one empty gives 0.
double iou(const BinaryMask& a, const BinaryMask& b);

// Maximal 8-connected pieces, largest first, ties by first pixel in scanline
// order.
std::vector<BinaryMask> connected_components(const BinaryMask& m);

// Per-pixel component id (-1 for unset) in the same ordering as
// connected_components.
struct ComponentLabels {
  std::vector<int> ids;
  std::vector<std::size_t> sizes;
};
ComponentLabels label_components(const BinaryMask& m);

// Unset pixels not reachable from the image border through unset pixels
// (8-connectivity).
BinaryMask holes(const BinaryMask& m);

// Euclidean distance to the nearest boundary pixel (a set pixel with an unset
// 4-neighbour). All entries are +infinity unless the mask has both set and
// unset pixels.
struct DistanceMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};
DistanceMap boundary_distance(const BinaryMask& m);

struct RotatedRect {
  Point2 center;
  double side_a = 0.0;  // side_a >= side_b
  double side_b = 0.0;
  double angle = 0.0;  // direction of side_a, radians in [0, pi)
  double area() const noexcept { return side_a * side_b; }
};

// Minimum-area rectangle around the set pixel centers.
RotatedRect min_rotated_rect(const BinaryMask& m);

double aspect_ratio(const RotatedRect& r);
double aspect_ratio_change(const RotatedRect& a, const RotatedRect& b);

}  // namespace coin
