#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "coin/random.hpp"

namespace coin {

class BinaryMask;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// Axis-aligned box in pixel-center coordinates, inclusive corners.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const noexcept { return x1 - x0; }
  double height() const noexcept { return y1 - y0; }
  Point2 center() const noexcept { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  // Top-left, top-right, bottom-right, bottom-left.
  std::array<Point2, 4> corners() const noexcept {
    return {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}};
  }
};

inline constexpr double kDeterminantEpsilon = 1e-12;
inline constexpr double kProjectiveEpsilon = 1e-12;
inline constexpr int kPerturbationRetries = 16;

// Projective map of the plane. Always stored normalized: bottom-right entry 1
// when it is nonzero, unit Frobenius norm otherwise.
class Homography {
public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  // Normalizes; throws SingularMatrix when |det| falls below the epsilon.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography translation(double tx, double ty);
  // Rotation by angle about the origin, then scale, then translation.
  static Homography similarity(double scale, double angle, double tx, double ty);
  static Homography from_array(std::span<const double, 9> row_major);

  const Eigen::Matrix3d& matrix() const noexcept { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  // Exact element-wise equality.
  bool operator==(const Homography& o) const { return m_ == o.m_; }
  std::array<double, 9> to_array() const;

private:
  Eigen::Matrix3d m_;
};

// Exactly four (source, target) pairs.
struct CorrespondenceSet {
  std::array<Point2, 4> source;
  std::array<Point2, 4> target;
};

Homography homography_from_correspondences(const CorrespondenceSet& c);

// warp_point(compose(a, b), p) == warp_point(a, warp_point(b, p))
Homography compose(const Homography& a, const Homography& b);
Homography invert(const Homography& h);

Point2 warp_point(const Homography& h, Point2 p);

// Inverse warping with nearest-neighbour lookup of pixel centers.
BinaryMask warp_mask(const Homography& h, const BinaryMask& m, int target_width, int target_height);

// True when the four box corners map to finite points forming a strictly
// convex quadrilateral with consistent orientation (no fold-over).
bool is_valid_quad(const Homography& h, const Rect& box);

// Maps the box corners onto copies displaced by iid N(0, sigma^2) per axis.
// Degenerate draws are retried up to kPerturbationRetries times.
Homography perturb_control_points(const Rect& box, double sigma, RandomSource& rng);

}  // namespace coin
