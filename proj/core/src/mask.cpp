#include "coin/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coin/errors.hpp"

namespace coin {

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ");
}

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  require_same_dims(a, b);
  BinaryMask out(a.width(), a.height());
  auto o = out.bits();
  auto x = a.bits(), y = b.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]) ? 1 : 0;
  return out;
}

constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::any() const {
  return std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

std::optional<Rect> BinaryMask::bounding_box() const {
  int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
  for (int y = 0; y < height_; ++y) {
    const auto* row = bits_.data() + static_cast<std::size_t>(y) * width_;
    for (int x = 0; x < width_; ++x)
      if (row[x]) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  }
  if (x1 < 0) return std::nullopt;
  return Rect{double(x0), double(y0), double(x1), double(y1)};
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto p, auto q) { return p && q; });
}
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto p, auto q) { return p || q; });
}
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto p, auto q) { return p && !q; });
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  std::size_t inter = 0, uni = 0;
  auto x = a.bits(), y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += (x[i] & y[i]);
    uni += (x[i] | y[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ComponentLabels label_components(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  std::vector<int> raw(m.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(m.size()); ++start) {
    if (!m.bits()[start] || raw[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t n = 0;
    raw[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++n;
      const int px = p % w, py = p / w;
      for (int k = 0; k < 8; ++k) {
        const int nx = px + kDx[k], ny = py + kDy[k];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int q = ny * w + nx;
        if (m.bits()[q] && raw[q] < 0) {
          raw[q] = id;
          stack.push_back(q);
        }
      }
    }
    sizes.push_back(n);
  }
  // Discovery order is scanline order of first pixels; stable sort by size.
  std::vector<int> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<int> rank(sizes.size());
  for (int i = 0; i < static_cast<int>(order.size()); ++i) rank[order[i]] = i;

  ComponentLabels out;
  out.ids.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.ids[i] = raw[i] < 0 ? -1 : rank[raw[i]];
  out.sizes.resize(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) out.sizes[rank[i]] = sizes[i];
  return out;
}

std::vector<BinaryMask> connected_components(const BinaryMask& m) {
  const auto labels = label_components(m);
  std::vector<BinaryMask> out(labels.sizes.size(), BinaryMask(m.width(), m.height()));
  for (std::size_t i = 0; i < labels.ids.size(); ++i)
    if (labels.ids[i] >= 0) out[labels.ids[i]].bits()[i] = 1;
  return out;
}

BinaryMask holes(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  std::vector<std::uint8_t> reached(m.size(), 0);
  std::vector<int> stack;
  auto seed = [&](int x, int y) {
    const int i = y * w + x;
    if (!m.bits()[i] && !reached[i]) {
      reached[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) seed(x, 0), seed(x, h - 1);
  for (int y = 0; y < h; ++y) seed(0, y), seed(w - 1, y);
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int px = p % w, py = p / w;
    for (int k = 0; k < 8; ++k) {
      const int nx = px + kDx[k], ny = py + kDy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      seed(nx, ny);
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) out.bits()[i] = (!m.bits()[i] && !reached[i]) ? 1 : 0;
  return out;
}

namespace {

// Exact 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto meet = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
  };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = meet(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

DistanceMap boundary_distance(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  DistanceMap out{w, h, std::vector<float>(m.size(), std::numeric_limits<float>::infinity())};
  const std::size_t n_set = m.count();
  if (n_set == 0 || n_set == m.size()) return out;

  std::vector<double> grid(m.size(), inf);
  bool any_boundary = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      const bool edge = (x > 0 && !m(x - 1, y)) || (x + 1 < w && !m(x + 1, y)) ||
                        (y > 0 && !m(x, y - 1)) || (y + 1 < h && !m(x, y + 1));
      if (edge) {
        grid[static_cast<std::size_t>(y) * w + x] = 0.0;
        any_boundary = true;
      }
    }
  if (!any_boundary) return out;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * w;
    std::copy_n(row, w, f.begin());
    edt_1d(f.data(), d.data(), w, v, z);
    for (int x = 0; x < w; ++x) out.values[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::sqrt(d[x]));
  }
  return out;
}

namespace {

struct IPoint {
  long long x, y;
  bool operator<(const IPoint& o) const { return x < o.x || (x == o.x && y < o.y); }
  bool operator==(const IPoint&) const = default;
};

long long cross(const IPoint& o, const IPoint& a, const IPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; counter-clockwise, no collinear points.
std::vector<IPoint> convex_hull(std::vector<IPoint> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<IPoint> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

double wrap_angle(double a) {
  a = std::fmod(a, M_PI);
  if (a < 0) a += M_PI;
  if (a >= M_PI - 1e-12) a = 0.0;
  return a;
}

}  // namespace

RotatedRect min_rotated_rect(const BinaryMask& m) {
  std::vector<IPoint> pts;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) pts.push_back({x, y});
  if (pts.empty()) throw Error(ErrorCode::EmptyMask, "min_rotated_rect of empty mask");

  const auto hull = convex_hull(std::move(pts));
  if (hull.size() == 1) return {Point2{double(hull[0].x), double(hull[0].y)}, 0.0, 0.0, 0.0};
  if (hull.size() == 2) {
    const double dx = double(hull[1].x - hull[0].x), dy = double(hull[1].y - hull[0].y);
    return {Point2{(hull[0].x + hull[1].x) / 2.0, (hull[0].y + hull[1].y) / 2.0}, std::hypot(dx, dy), 0.0,
            wrap_angle(std::atan2(dy, dx))};
  }

  // One side of the optimal rectangle is collinear with a hull edge.
  RotatedRect best;
  double best_area = std::numeric_limits<double>::infinity();
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % n];
    const double len = std::hypot(double(q.x - p.x), double(q.y - p.y));
    const double ux = (q.x - p.x) / len, uy = (q.y - p.y) / len;
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const auto& h : hull) {
      const double su = h.x * ux + h.y * uy;
      const double sv = -h.x * uy + h.y * ux;
      lo_u = std::min(lo_u, su), hi_u = std::max(hi_u, su);
      lo_v = std::min(lo_v, sv), hi_v = std::max(hi_v, sv);
    }
    const double wu = hi_u - lo_u, wv = hi_v - lo_v;
    const double area = wu * wv;
    if (area < best_area - 1e-9) {
      best_area = area;
      const double cu = (lo_u + hi_u) / 2.0, cv = (lo_v + hi_v) / 2.0;
      best.center = {cu * ux - cv * uy, cu * uy + cv * ux};
      if (wu >= wv) {
        best.side_a = wu, best.side_b = wv;
        best.angle = wrap_angle(std::atan2(uy, ux));
      } else {
        best.side_a = wv, best.side_b = wu;
        best.angle = wrap_angle(std::atan2(ux, -uy));
      }
    }
  }
  return best;
}

double aspect_ratio(const RotatedRect& r) {
  if (!(r.side_a > 0.0) || !(r.side_b > 0.0)) throw Error(ErrorCode::DegenerateRect, "rectangle side is zero");
  return std::max(r.side_a / r.side_b, r.side_b / r.side_a);
}

double aspect_ratio_change(const RotatedRect& a, const RotatedRect& b) {
  const double ra = aspect_ratio(a), rb = aspect_ratio(b);
  return std::max(ra / rb, rb / ra);
}

}  // namespace coin
