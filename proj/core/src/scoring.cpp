#include "coin/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "coin/errors.hpp"

namespace coin {

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Two-pass ZNCC mapped to [0, 1].
double zncc_score(const std::vector<double>& cur, const std::vector<double>& tmpl, const AppearanceOptions& opts) {
  const std::size_t n = cur.size();
  if (n < opts.min_pixels || n == 0) return kNeutralAppearance;
  double mc = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < n; ++i) mc += cur[i], mt += tmpl[i];
  mc /= double(n);
  mt /= double(n);
  double num = 0.0, vc = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = cur[i] - mc, b = tmpl[i] - mt;
    num += a * b;
    vc += a * a;
    vt += b * b;
  }
  if (vc / double(n) < opts.variance_epsilon || vt / double(n) < opts.variance_epsilon) return kNeutralAppearance;
  return clamp01(0.5 + num / (2.0 * std::sqrt(vc * vt)));
}

struct Projector {
  double m[9];
  explicit Projector(const Eigen::Matrix3d& h) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m[r * 3 + c] = h(r, c);
  }
};

// Nearest source pixel of a target center, with the arithmetic of warp_mask.
struct RowLookup {
  const Projector& p;
  const std::uint8_t* bits;
  int sw, sh;
  double rx, ry, rw;

  RowLookup(const Projector& p, const BinaryMask& src) : p(p), bits(src.bits().data()), sw(src.width()), sh(src.height()) {}
  void set_row(int y) {
    rx = p.m[1] * y + p.m[2];
    ry = p.m[4] * y + p.m[5];
    rw = p.m[7] * y + p.m[8];
  }
  bool operator()(int x) const {
    const double w = p.m[6] * x + rw;
    if (std::abs(w) < kProjectiveEpsilon) return false;
    const double iw = 1.0 / w;
    const double sx = (p.m[0] * x + rx) * iw;
    const double sy = (p.m[3] * x + ry) * iw;
    const double fx = std::floor(sx + 0.5), fy = std::floor(sy + 0.5);
    if (fx < 0 || fy < 0 || fx >= sw || fy >= sh) return false;
    return bits[static_cast<std::size_t>(fy) * sw + static_cast<std::size_t>(fx)] != 0;
  }
};

// Support membership and current-frame sample position for canonical pixel
// (x, y).
inline bool support_sample(const Eigen::Matrix3d& h, const BinaryMask& seg, int x, int y, double& qx, double& qy) {
  const double w = h(2, 0) * x + h(2, 1) * y + h(2, 2);
  if (w <= kProjectiveEpsilon) return false;
  qx = (h(0, 0) * x + h(0, 1) * y + h(0, 2)) / w;
  qy = (h(1, 0) * x + h(1, 1) * y + h(1, 2)) / w;
  const double fx = std::floor(qx + 0.5), fy = std::floor(qy + 0.5);
  if (fx < 0 || fy < 0 || fx >= seg.width() || fy >= seg.height()) return false;
  return seg(static_cast<int>(fx), static_cast<int>(fy));
}

// Image of a half-pixel padded box. Per row it yields a conservative pixel
// span (one pixel of slack all around) outside which no target pixel maps
// into the box. Maps sending part of the box across the line at infinity
// cover every row entirely.
class QuadSpans {
public:
  QuadSpans(const Homography& h, const std::optional<Rect>& box, int w, int hgt) : w_(w) {
    if (!box) return;
    const Rect padded{box->x0 - 0.5, box->y0 - 0.5, box->x1 + 0.5, box->y1 + 0.5};
    const auto& m = h.matrix();
    const auto corners = padded.corners();
    double miny = 1e300, maxy = -1e300;
    bounded_ = true;
    for (int i = 0; i < 4; ++i) {
      const auto& p = corners[i];
      const double ww = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
      if (ww <= kProjectiveEpsilon) {
        bounded_ = false;
        break;
      }
      q_[i] = {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / ww, (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / ww};
      miny = std::min(miny, q_[i].y), maxy = std::max(maxy, q_[i].y);
    }
    if (!bounded_) {
      y0_ = 0, y1_ = hgt - 1;
      return;
    }
    y0_ = std::max(0, static_cast<int>(std::floor(miny)) - 1);
    y1_ = std::min(hgt - 1, static_cast<int>(std::ceil(maxy)) + 1);
  }

  int y0() const { return y0_; }
  int y1() const { return y1_; }

  // Pixel span of row y; false when the row misses the quad.
  bool row(int y, int& xl, int& xr) const {
    if (y < y0_ || y > y1_) return false;
    if (!bounded_) {
      xl = 0, xr = w_ - 1;
      return true;
    }
    // Extent of the quad within the strip [y - 1, y + 1].
    const double lo = y - 1.0, hi = y + 1.0;
    double minx = 1e300, maxx = -1e300;
    for (int i = 0; i < 4; ++i) {
      const Point2 a = q_[i], b = q_[(i + 1) % 4];
      if (a.y >= lo && a.y <= hi) minx = std::min(minx, a.x), maxx = std::max(maxx, a.x);
      for (const double yy : {lo, hi}) {
        if ((a.y - yy) * (b.y - yy) < 0.0) {
          const double x = a.x + (yy - a.y) * (b.x - a.x) / (b.y - a.y);
          minx = std::min(minx, x), maxx = std::max(maxx, x);
        }
      }
    }
    if (minx > maxx) return false;
    xl = std::max(0, static_cast<int>(std::floor(minx)) - 1);
    xr = std::min(w_ - 1, static_cast<int>(std::ceil(maxx)) + 1);
    return xl <= xr;
  }

private:
  int w_;
  bool bounded_ = false;
  std::array<Point2, 4> q_{};
  int y0_ = 0, y1_ = -1;
};

}  // namespace

ScoreBreakdown combine_scores(double obj, double cover, double occl, double appearance) {
  ScoreBreakdown s{clamp01(obj), clamp01(cover), clamp01(occl), clamp01(appearance), 0.0};
  s.total = s.s_obj * s.s_cover * s.s_occl * s.s_appearance;
  return s;
}

double s_obj(const BinaryMask& seg, const BinaryMask& warped_template) {
  require_same_dims(seg, warped_template);
  const std::size_t n = seg.count();
  if (n == 0) return 0.0;
  return double(mask_and(seg, warped_template).count()) / double(n);
}

double s_cover(const BinaryMask& seg, const BinaryMask& warped_template) {
  require_same_dims(seg, warped_template);
  const std::size_t n = warped_template.count();
  if (n == 0) return 0.0;
  return double(mask_and(seg, warped_template).count()) / double(n);
}

BinaryMask visibility_mask(const BinaryMask& seg, const BinaryMask& warped_template) {
  return mask_and(seg, warped_template);
}

double s_occl(const BinaryMask& current_vis, const BinaryMask& prev_vis, const Homography& h_inter) {
  return iou(current_vis, warp_mask(h_inter, prev_vis, current_vis.width(), current_vis.height()));
}

BinaryMask appearance_support(const BinaryMask& template_mask, const BinaryMask& seg, const Homography& h) {
  BinaryMask out(template_mask.width(), template_mask.height());
  const auto& m = h.matrix();
  for (int y = 0; y < template_mask.height(); ++y)
    for (int x = 0; x < template_mask.width(); ++x) {
      double qx, qy;
      if (template_mask(x, y) && support_sample(m, seg, x, y, qx, qy)) out.set(x, y);
    }
  return out;
}

double s_appearance(const Image& frame_gray, const Image& template_gray, const Homography& h, const BinaryMask& support,
                    const AppearanceOptions& opts) {
  if (support.width() != template_gray.width() || support.height() != template_gray.height())
    throw Error(ErrorCode::DimensionMismatch, "support does not match template");
  std::vector<double> cur, tmpl;
  for (int y = 0; y < support.height(); ++y)
    for (int x = 0; x < support.width(); ++x) {
      if (!support(x, y)) continue;
      const Point2 q = warp_point(h, {double(x), double(y)});
      tmpl.push_back(template_gray.at(x, y));
      cur.push_back(sample_bilinear(frame_gray, q.x, q.y));
    }
  return zncc_score(cur, tmpl, opts);
}

ScoreBreakdown score(const ScoringContext& ctx, const Homography& h) {
  const auto& seg = *ctx.segmentation;
  const BinaryMask warped = warp_mask(h, *ctx.template_mask, seg.width(), seg.height());
  const BinaryMask vis = visibility_mask(seg, warped);
  const Homography h_inter = compose(h, invert(ctx.prev_pose));
  const double occl = s_occl(vis, *ctx.prev_visibility, h_inter);
  const BinaryMask support = appearance_support(*ctx.template_mask, seg, h);
  const double app = s_appearance(*ctx.frame_gray, *ctx.template_gray, h, support, ctx.appearance);
  return combine_scores(s_obj(seg, warped), s_cover(seg, warped), occl, app);
}

Scorer::Scorer(const ScoringContext& ctx) : ctx_(ctx), prev_pose_inverse_(invert(ctx.prev_pose)) {
  seg_count_ = ctx_.segmentation->count();
  template_box_ = ctx_.template_mask->bounding_box();
  prev_box_ = ctx_.prev_visibility->bounding_box();
  const auto& tm = *ctx_.template_mask;
  for (int y = 0; y < tm.height(); ++y)
    for (int x = 0; x < tm.width(); ++x)
      if (tm(x, y)) template_pixels_.push_back({x, y, ctx_.template_gray->at(x, y)});
}

ScoreBreakdown Scorer::operator()(const Homography& h) const {
  const auto& seg = *ctx_.segmentation;
  const int w = seg.width(), hgt = seg.height();
  const Homography h_inter = compose(h, prev_pose_inverse_);
  const Projector to_template(invert(h).matrix());
  const Projector to_prev(invert(h_inter).matrix());

  const QuadSpans template_spans(h, template_box_, w, hgt);
  const QuadSpans prev_spans(h_inter, prev_box_, w, hgt);
  std::size_t n_wt = 0, n_int = 0, n_prev = 0, n_vis_prev = 0;
  RowLookup in_template(to_template, *ctx_.template_mask);
  RowLookup in_prev(to_prev, *ctx_.prev_visibility);
  const std::uint8_t* seg_bits = seg.bits().data();
  const int y0 = std::min(template_spans.y0(), prev_spans.y0());
  const int y1 = std::max(template_spans.y1(), prev_spans.y1());
  for (int y = y0; y <= y1; ++y) {
    in_template.set_row(y);
    in_prev.set_row(y);
    const std::uint8_t* seg_row = seg_bits + static_cast<std::size_t>(y) * w;
    int xl, xr;
    if (template_spans.row(y, xl, xr)) {
      for (int x = xl; x <= xr; ++x) {
        if (!in_template(x)) continue;
        ++n_wt;
        if (!seg_row[x]) continue;
        ++n_int;
        n_vis_prev += in_prev(x);
      }
    }
    if (prev_spans.row(y, xl, xr))
      for (int x = xl; x <= xr; ++x) n_prev += in_prev(x);
  }
  const double obj = seg_count_ == 0 ? 0.0 : double(n_int) / double(seg_count_);
  const double cover = n_wt == 0 ? 0.0 : double(n_int) / double(n_wt);
  const std::size_t uni = n_int + n_prev - n_vis_prev;
  const double occl = uni == 0 ? 1.0 : double(n_vis_prev) / double(uni);

  thread_local std::vector<double> cur, tmpl;
  cur.clear();
  tmpl.clear();
  const auto& m = h.matrix();
  const Image& frame = *ctx_.frame_gray;
  for (const auto& p : template_pixels_) {
    double qx, qy;
    if (!support_sample(m, seg, p.x, p.y, qx, qy)) continue;
    tmpl.push_back(p.gray);
    cur.push_back(sample_bilinear(frame, qx, qy));
  }
  return combine_scores(obj, cover, occl, zncc_score(cur, tmpl, ctx_.appearance));
}

}  // namespace coin
