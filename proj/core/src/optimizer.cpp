#include "coin/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "coin/errors.hpp"

namespace coin {

void AnnealSchedule::validate() const {
  if (iterations < 1) throw Error(ErrorCode::Config, "anneal iterations must be >= 1");
  if (!(t_decay > 0.0 && t_decay <= 1.0)) throw Error(ErrorCode::Config, "t_decay must be in (0, 1]");
  if (!(sigma_decay > 0.0 && sigma_decay <= 1.0)) throw Error(ErrorCode::Config, "sigma_decay must be in (0, 1]");
  if (!(t0 > 0.0)) throw Error(ErrorCode::Config, "t0 must be positive");
  if (!(sigma0 > 0.0)) throw Error(ErrorCode::Config, "sigma0 must be positive");
}

double AnnealSchedule::temperature(int step) const { return t0 * std::pow(t_decay, step); }
double AnnealSchedule::sigma(int step) const { return sigma0 * std::pow(sigma_decay, step); }

double default_sigma0(const Rect& box, double fraction) {
  return fraction * std::max(box.width(), box.height());
}

double acceptance_probability(double s, double s_star, double temperature) {
  if (s > s_star) return 1.0;
  return std::exp(-(s_star - s) / temperature);
}

bool accept_move(double s, double s_star, double temperature, RandomSource& rng) {
  if (s > s_star) return true;
  return rng.uniform() < acceptance_probability(s, s_star, temperature);
}

OptimizationResult init_hypotheses(const HypothesisRequest& req, const ScoreFunction& score, RandomSource& rng) {
  const bool have_flow = req.flow && req.prev_region && req.prev_region->any();
  if (!req.prev_pose && !have_flow) throw Error(ErrorCode::NoInitializationSource, "neither previous pose nor flow");

  OptimizationResult best;
  best.seed = rng.seed();
  bool have_best = false;
  auto consider = [&](const Homography& h) {
    const ScoreBreakdown s = score(h);
    ++best.evaluation_count;
    if (!have_best || s.total > best.breakdown.total) {
      best.h = h;
      best.breakdown = s;
      have_best = true;
    }
  };

  int produced = 0;
  if (req.prev_pose) {
    consider(*req.prev_pose);
    ++produced;
  }
  if (have_flow) {
    const Homography base = req.prev_pose.value_or(Homography());
    std::vector<int> pixels;
    const auto& region = *req.prev_region;
    for (int i = 0; i < static_cast<int>(region.size()); ++i)
      if (region.bits()[i]) pixels.push_back(i);
    const int w = region.width();
    const auto& flow = *req.flow;
    for (; produced < req.samples; ++produced) {
      CorrespondenceSet c;
      for (int k = 0; k < 4; ++k) {
        const int p = pixels[rng.uniform_int(0, static_cast<int>(pixels.size()) - 1)];
        const int x = p % w, y = p / w;
        c.source[k] = {double(x), double(y)};
        c.target[k] = (x < flow.width() && y < flow.height()) ? flow.advect(x, y) : c.source[k];
      }
      try {
        const Homography cand = compose(homography_from_correspondences(c), base);
        if (!is_valid_quad(cand, req.control_box)) {
          ++best.rejected_count;
          ++best.evaluation_count;
          continue;
        }
        consider(cand);
      } catch (const Error&) {
        ++best.rejected_count;
        ++best.evaluation_count;
      }
    }
  }
  return best;
}

OptimizationResult anneal(const Homography& h0, const AnnealSchedule& schedule, const Rect& control_box,
                          const ScoreFunction& score, RandomSource& rng, std::optional<ScoreBreakdown> h0_score) {
  schedule.validate();
  OptimizationResult out;
  out.seed = rng.seed();
  Homography current = h0;
  ScoreBreakdown current_score = h0_score ? *h0_score : score(h0);
  if (!h0_score) ++out.evaluation_count;
  out.h = current;
  out.breakdown = current_score;

  for (int step = 0; step < schedule.iterations; ++step) {
    const double temperature = schedule.temperature(step);
    const double sigma = schedule.sigma(step);
    std::optional<Homography> candidate;
    for (int attempt = 0; attempt < kPerturbationRetries && !candidate; ++attempt) {
      try {
        Homography h = compose(current, perturb_control_points(control_box, sigma, rng));
        if (is_valid_quad(h, control_box)) candidate = h;
      } catch (const Error&) {
      }
      if (!candidate) {
        ++out.rejected_count;
        ++out.evaluation_count;
      }
    }
    if (!candidate) continue;
    const ScoreBreakdown s = score(*candidate);
    ++out.evaluation_count;
    if (accept_move(s.total, current_score.total, temperature, rng)) {
      ++out.accepted_count;
      current = *candidate;
      current_score = s;
      if (s.total > out.breakdown.total) {
        out.h = current;
        out.breakdown = s;
      }
    }
  }
  return out;
}

OptimizationResult redetect(const RedetectRequest& req, const AnnealSchedule& schedule, const ScoreFunction& score,
                            RandomSource& rng) {
  OptimizationResult out;
  out.seed = rng.seed();
  const auto& seg = *req.segmentation;
  const auto& tmpl = *req.template_mask;
  const auto comps = label_components(seg);
  const std::size_t tmpl_area = tmpl.count();
  if (comps.sizes.empty() || tmpl_area == 0) return out;

  // Per-component centroid, second moments and extent.
  struct Blob {
    double cx = 0, cy = 0, sxx = 0, sxy = 0, syy = 0;
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    std::size_t n = 0;
  };
  std::vector<Blob> blobs(comps.sizes.size());
  for (int i = 0; i < static_cast<int>(comps.ids.size()); ++i) {
    const int id = comps.ids[i];
    if (id < 0) continue;
    const double x = i % seg.width(), y = i / seg.width();
    auto& b = blobs[id];
    b.cx += x, b.cy += y, ++b.n;
    b.sxx += x * x, b.sxy += x * y, b.syy += y * y;
    b.x0 = std::min(b.x0, x), b.x1 = std::max(b.x1, x);
    b.y0 = std::min(b.y0, y), b.y1 = std::max(b.y1, y);
  }
  Blob t;
  for (int i = 0; i < static_cast<int>(tmpl.size()); ++i) {
    if (!tmpl.bits()[i]) continue;
    const double x = i % tmpl.width(), y = i / tmpl.width();
    t.cx += x, t.cy += y, ++t.n;
    t.sxx += x * x, t.sxy += x * y, t.syy += y * y;
  }
  // Covariance square root; the 1/12 floor is the variance of a unit pixel.
  auto finish = [](Blob& b, Eigen::Matrix2d& root) {
    const double n = double(b.n);
    b.cx /= n, b.cy /= n;
    Eigen::Matrix2d c;
    c << b.sxx / n - b.cx * b.cx + 1.0 / 12.0, b.sxy / n - b.cx * b.cy, b.sxy / n - b.cx * b.cy,
        b.syy / n - b.cy * b.cy + 1.0 / 12.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(c);
    root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(1.0 / 12.0).cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
  };
  std::vector<Eigen::Matrix2d> roots(blobs.size());
  for (std::size_t i = 0; i < blobs.size(); ++i) finish(blobs[i], roots[i]);
  Eigen::Matrix2d t_root;
  finish(t, t_root);
  const Eigen::Matrix2d t_root_inv = t_root.inverse();
  const double tcx = t.cx, tcy = t.cy;

  // Components are drawn with probability proportional to their area.
  std::discrete_distribution<std::size_t> pick(comps.sizes.begin(), comps.sizes.end());
  bool have_best = false;
  const double log_lo = std::log(req.min_scale), log_hi = std::log(req.max_scale);
  for (int i = 0; i < req.samples; ++i) {
    const std::size_t id = pick(rng.engine());
    const auto& b = blobs[id];
    Homography place;
    if (rng.uniform() < req.affine_fraction) {
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const Eigen::Matrix2d rot = Eigen::Rotation2Dd(angle).toRotationMatrix();
      const Eigen::Matrix2d a = roots[id] * rot * t_root_inv;
      Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
      m.topLeftCorner<2, 2>() = a;
      m(0, 2) = b.cx - (a(0, 0) * tcx + a(0, 1) * tcy);
      m(1, 2) = b.cy - (a(1, 0) * tcx + a(1, 1) * tcy);
      place = Homography(m);
    } else {
      const double base = std::sqrt(double(b.n) / double(tmpl_area));
      const double scale = base * std::exp(rng.uniform(log_lo, log_hi));
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double jx = rng.uniform(-req.jitter, req.jitter) * (b.x1 - b.x0 + 1.0);
      const double jy = rng.uniform(-req.jitter, req.jitter) * (b.y1 - b.y0 + 1.0);
      place = compose(Homography::similarity(scale, angle, b.cx + jx, b.cy + jy), Homography::translation(-tcx, -tcy));
    }
    if (!is_valid_quad(place, req.control_box)) {
      ++out.rejected_count;
      ++out.evaluation_count;
      continue;
    }
    const ScoreBreakdown s = score(place);
    ++out.evaluation_count;
    if (!have_best || s.total > out.breakdown.total) {
      out.h = place;
      out.breakdown = s;
      have_best = true;
    }
  }
  if (!have_best) return out;

  OptimizationResult refined = anneal(out.h, schedule, req.control_box, score, rng, out.breakdown);
  refined.evaluation_count += out.evaluation_count;
  refined.rejected_count += out.rejected_count;
  return refined;
}

}  // namespace coin
