#include "coin/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "coin/errors.hpp"
#include "coin/mask.hpp"

namespace coin {

namespace {

Eigen::Matrix3d normalize(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw Error(ErrorCode::SingularMatrix, "non-finite homography");
  if (std::abs(m(2, 2)) > kProjectiveEpsilon) return m / m(2, 2);
  const double n = m.norm();
  if (n == 0.0) throw Error(ErrorCode::SingularMatrix, "zero matrix");
  Eigen::Matrix3d out = m / n;
  // Fix the sign so that equal maps compare equal.
  for (int i = 0; i < 9; ++i) {
    const double v = out.data()[i];
    if (std::abs(v) > kProjectiveEpsilon) {
      if (v < 0) out = -out;
      break;
    }
  }
  return out;
}

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d conditioner(const std::array<Point2, 4>& pts) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) cx += p.x, cy += p.y;
  cx /= 4.0, cy /= 4.0;
  double d = 0;
  for (const auto& p : pts) d += std::hypot(p.x - cx, p.y - cy);
  d /= 4.0;
  if (d <= 0.0) throw Error(ErrorCode::DegenerateConfiguration, "coincident points");
  const double s = std::sqrt(2.0) / d;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

std::array<Point2, 4> apply(const Eigen::Matrix3d& t, const std::array<Point2, 4>& pts) {
  std::array<Point2, 4> out;
  for (int i = 0; i < 4; ++i)
    out[i] = {t(0, 0) * pts[i].x + t(0, 2), t(1, 1) * pts[i].y + t(1, 2)};
  return out;
}

void check_not_collinear(const std::array<Point2, 4>& pts, const char* which) {
  // Points are conditioned (mean radius sqrt 2), so an absolute bound works.
  constexpr double kAreaEpsilon = 1e-9;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (std::abs(cross(pts[i], pts[j], pts[k])) < kAreaEpsilon)
          throw Error(ErrorCode::DegenerateConfiguration, std::string("collinear ") + which + " points");
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) : m_(normalize(m)) {
  if (std::abs(m_.determinant()) < kDeterminantEpsilon)
    throw Error(ErrorCode::SingularMatrix, "determinant below epsilon");
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::similarity(double scale, double angle, double tx, double ty) {
  const double c = std::cos(angle) * scale, s = std::sin(angle) * scale;
  Eigen::Matrix3d m;
  m << c, -s, tx, s, c, ty, 0, 0, 1;
  return Homography(m);
}

Homography Homography::from_array(std::span<const double, 9> v) {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return Homography(m);
}

std::array<double, 9> Homography::to_array() const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = m_(r, c);
  return out;
}

Homography homography_from_correspondences(const CorrespondenceSet& c) {
  const Eigen::Matrix3d ts = conditioner(c.source);
  const Eigen::Matrix3d td = conditioner(c.target);
  const auto src = apply(ts, c.source);
  const auto dst = apply(td, c.target);
  check_not_collinear(src, "source");
  check_not_collinear(dst, "target");

  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> n = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << n(0), n(1), n(2), n(3), n(4), n(5), n(6), n(7), n(8);
  return Homography(td.inverse() * hn * ts);
}

Homography compose(const Homography& a, const Homography& b) {
  return Homography(a.matrix() * b.matrix());
}

Homography invert(const Homography& h) {
  return Homography(h.matrix().inverse());
}

Point2 warp_point(const Homography& h, Point2 p) {
  const auto& m = h.matrix();
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (std::abs(w) < kProjectiveEpsilon) throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
  return {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w, (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

BinaryMask warp_mask(const Homography& h, const BinaryMask& src, int target_width, int target_height) {
  BinaryMask out(target_width, target_height);
  const auto box = src.bounding_box();
  if (!box) return out;

  const Eigen::Matrix3d inv = invert(h).matrix();
  const auto& fwd = h.matrix();

  // The image of the (half-pixel padded) source box bounds every pixel that
  // can be set, provided the whole box stays on the positive side of w.
  int tx0 = 0, ty0 = 0, tx1 = target_width - 1, ty1 = target_height - 1;
  const Rect padded{box->x0 - 0.5, box->y0 - 0.5, box->x1 + 0.5, box->y1 + 0.5};
  bool bounded = true;
  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  for (const auto& p : padded.corners()) {
    const double w = fwd(2, 0) * p.x + fwd(2, 1) * p.y + fwd(2, 2);
    if (w <= kProjectiveEpsilon) {
      bounded = false;
      break;
    }
    const double x = (fwd(0, 0) * p.x + fwd(0, 1) * p.y + fwd(0, 2)) / w;
    const double y = (fwd(1, 0) * p.x + fwd(1, 1) * p.y + fwd(1, 2)) / w;
    minx = std::min(minx, x), maxx = std::max(maxx, x);
    miny = std::min(miny, y), maxy = std::max(maxy, y);
  }
  if (bounded) {
    if (maxx < -1.0 || maxy < -1.0 || minx > target_width || miny > target_height) return out;
    tx0 = std::max(0, static_cast<int>(std::floor(minx)) - 1);
    ty0 = std::max(0, static_cast<int>(std::floor(miny)) - 1);
    tx1 = std::min(target_width - 1, static_cast<int>(std::ceil(maxx)) + 1);
    ty1 = std::min(target_height - 1, static_cast<int>(std::ceil(maxy)) + 1);
  }

  const int sw = src.width(), sh = src.height();
  // Row terms are hoisted; the fast scorer repeats exactly this arithmetic.
  for (int y = ty0; y <= ty1; ++y) {
    const double rx = inv(0, 1) * y + inv(0, 2);
    const double ry = inv(1, 1) * y + inv(1, 2);
    const double rw = inv(2, 1) * y + inv(2, 2);
    for (int x = tx0; x <= tx1; ++x) {
      const double w = inv(2, 0) * x + rw;
      if (std::abs(w) < kProjectiveEpsilon) continue;
      const double iw = 1.0 / w;
      const double sx = (inv(0, 0) * x + rx) * iw;
      const double sy = (inv(1, 0) * x + ry) * iw;
      const double fx = std::floor(sx + 0.5), fy = std::floor(sy + 0.5);
      if (fx < 0 || fy < 0 || fx >= sw || fy >= sh) continue;
      if (src(static_cast<int>(fx), static_cast<int>(fy))) out.set(x, y);
    }
  }
  return out;
}

bool is_valid_quad(const Homography& h, const Rect& box) {
  const auto& m = h.matrix();
  std::array<Point2, 4> q;
  const auto corners = box.corners();
  for (int i = 0; i < 4; ++i) {
    const auto& p = corners[i];
    const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
    if (w <= kProjectiveEpsilon) return false;
    q[i] = {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w, (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
  }
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
    if (c == 0.0 || !std::isfinite(c)) return false;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

Homography perturb_control_points(const Rect& box, double sigma, RandomSource& rng) {
  if (!(box.width() > 0.0) || !(box.height() > 0.0))
    throw Error(ErrorCode::DegenerateConfiguration, "degenerate control box");
  if (sigma < 0.0) throw Error(ErrorCode::DegenerateConfiguration, "negative sigma");
  const auto corners = box.corners();
  if (sigma == 0.0) return Homography();
  for (int attempt = 0; attempt < kPerturbationRetries; ++attempt) {
    CorrespondenceSet c{corners, corners};
    for (auto& p : c.target) {
      p.x += rng.normal(0.0, sigma);
      p.y += rng.normal(0.0, sigma);
    }
    try {
      Homography h = homography_from_correspondences(c);
      if (is_valid_quad(h, box)) return h;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::DegenerateConfiguration, "perturbation retries exhausted");
}

}  // namespace coin
