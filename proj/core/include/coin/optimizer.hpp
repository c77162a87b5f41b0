#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "coin/flow.hpp"
#include "coin/geometry.hpp"
#include "coin/mask.hpp"
#include "coin/random.hpp"
#include "coin/scoring.hpp"

namespace coin {

// Temperature and control-point spread both decay geometrically per step.
struct AnnealSchedule {
  int iterations = 350;
  double t0 = 0.01;
  double t_decay = 0.99;
  double sigma0 = 8.0;  // pixels, canonical frame
  double sigma_decay = 0.99;

  void validate() const;
  double temperature(int step) const;
  double sigma(int step) const;
};

// sigma0 proportional to the larger side of the control box.
double default_sigma0(const Rect& control_box, double fraction = 0.05);

// 1 when s beats the incumbent, exp(-(s* - s) / T) otherwise.
double acceptance_probability(double s, double s_star, double temperature);
bool accept_move(double s, double s_star, double temperature, RandomSource& rng);

using ScoreFunction = std::function<ScoreBreakdown(const Homography&)>;

struct OptimizationResult {
  Homography h;
  ScoreBreakdown breakdown;
  int accepted_count = 0;
  int evaluation_count = 0;  // scored hypotheses plus rejected degenerate draws
  int rejected_count = 0;
  std::uint64_t seed = 0;
};

struct HypothesisRequest {
  std::optional<Homography> prev_pose;
  const FlowField* flow = nullptr;
  // Object pixels of frame t-1 to draw flow correspondences from.
  const BinaryMask* prev_region = nullptr;
  Rect control_box;
  int samples = 50;
};

// Scores prev_pose and flow-propagated candidates (four random object points
// moved by the flow give an inter-frame homography composed onto
// prev_pose) and returns the best; ties keep the earliest candidate.
OptimizationResult init_hypotheses(const HypothesisRequest& req, const ScoreFunction& score, RandomSource& rng);

// Simulated annealing from h0. Each step perturbs the control box in the
// canonical frame and composes the perturbation onto the current estimate.
// Returns the best accepted estimate (never worse than h0).
OptimizationResult anneal(const Homography& h0, const AnnealSchedule& schedule, const Rect& control_box,
                          const ScoreFunction& score, RandomSource& rng,
                          std::optional<ScoreBreakdown> h0_score = std::nullopt);

struct RedetectRequest {
  const BinaryMask* template_mask = nullptr;
  Rect control_box;
  const BinaryMask* segmentation = nullptr;
  int samples = 400;
  double min_scale = 0.5;
  double max_scale = 2.0;
  double jitter = 0.25;
  // Share of samples that map the template's second-moment ellipse onto the
  // component's (random in-plane rotation) instead of a similarity.
  double affine_fraction = 0.5;
};

// Global search ignoring the previous frame: poses dropping the template onto
// random segmentation components, then annealing from the best one.
OptimizationResult redetect(const RedetectRequest& req, const AnnealSchedule& schedule, const ScoreFunction& score,
                            RandomSource& rng);

}  // namespace coin
