#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "coin/optimizer.hpp"
#include "coin/synth.hpp"
#include "support/oracles.hpp"

namespace coin {
namespace {

double corner_error(const Homography& a, const Homography& b, const Rect& box) {
  double e = 0.0;
  for (const auto& c : box.corners()) {
    const Point2 p = warp_point(a, c), q = warp_point(b, c);
    e = std::max(e, std::hypot(p.x - q.x, p.y - q.y));
  }
  return e;
}

// Small rendered scene: template from frame 0, scored frames later on.
struct Scene {
  SceneRenderer renderer;
  Image template_gray;
  BinaryMask template_mask;
  Rect box;

  explicit Scene(const SceneSpec& spec) : renderer(spec) {
    const SynthFrame f0 = renderer.render(0);
    template_gray = to_gray(f0.image);
    template_mask = object_mask(f0.labels);
    const auto b = template_mask.bounding_box();
    box = *b;
  }
};

SceneSpec small_spec() {
  SceneSpec spec;
  spec.width = 240;
  spec.height = 180;
  spec.frames = 20;
  spec.outline.rx = 40.0;
  spec.outline.ry = 32.0;
  spec.keyframes = {{0, {0, 0, 0}, {0, 0, 800}}, {19, {0.25, -0.3, 0.9}, {20, 10, 780}}};
  spec.seed = 5;
  return spec;
}

struct FrameTarget {
  Image gray;
  BinaryMask seg;
  Homography gt;
};

FrameTarget target(const Scene& s, int t) {
  const SynthFrame f = s.renderer.render(t);
  return {to_gray(f.image), object_mask(f.labels), s.renderer.inter_frame(0, t)};
}

ScoringContext context(const Scene& s, const FrameTarget& f) {
  ScoringContext ctx;
  ctx.frame_gray = &f.gray;
  ctx.segmentation = &f.seg;
  ctx.template_gray = &s.template_gray;
  ctx.template_mask = &s.template_mask;
  ctx.prev_visibility = &s.template_mask;
  return ctx;
}

AnnealSchedule schedule_for(const Rect& box) {
  AnnealSchedule sched;
  sched.sigma0 = default_sigma0(box);
  return sched;
}

TEST(Schedule, StrictlyDecreasing) {
  AnnealSchedule s;
  for (int i = 1; i < s.iterations; ++i) {
    EXPECT_LT(s.temperature(i), s.temperature(i - 1));
    EXPECT_LT(s.sigma(i), s.sigma(i - 1));
  }
  EXPECT_DOUBLE_EQ(s.temperature(0), s.t0);
  EXPECT_DOUBLE_EQ(s.sigma(0), s.sigma0);
}

TEST(Schedule, Validation) {
  for (auto mutate : std::vector<void (*)(AnnealSchedule&)>{
           [](AnnealSchedule& s) { s.iterations = 0; }, [](AnnealSchedule& s) { s.t_decay = 0.0; },
           [](AnnealSchedule& s) { s.t_decay = 1.5; }, [](AnnealSchedule& s) { s.sigma_decay = -0.1; },
           [](AnnealSchedule& s) { s.t0 = 0.0; }, [](AnnealSchedule& s) { s.sigma0 = 0.0; }}) {
    AnnealSchedule s;
    mutate(s);
    EXPECT_EQ(oracle::error_of([&] { s.validate(); }), ErrorCode::Config);
  }
}

TEST(Schedule, DefaultSigmaFromBox) {
  EXPECT_DOUBLE_EQ(default_sigma0({0, 0, 80, 40}), 4.0);
  EXPECT_DOUBLE_EQ(default_sigma0({0, 0, 10, 60}, 0.1), 6.0);
}

TEST(Acceptance, ClosedForm) {
  EXPECT_DOUBLE_EQ(acceptance_probability(0.6, 0.5, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(acceptance_probability(0.5, 0.5, 0.1), 1.0);
  EXPECT_NEAR(acceptance_probability(0.4, 0.5, 0.1), std::exp(-1.0), 1e-15);
}

TEST(Acceptance, EmpiricalFrequencyWithinBinomialBounds) {
  RandomSource rng(1);
  const int n = 100000;
  for (double ratio : {0.25, 1.0, 4.0}) {
    const double temperature = 0.05, s_star = 0.8, s = s_star - ratio * temperature;
    const double p = std::exp(-ratio);
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += accept_move(s, s_star, temperature, rng);
    const double freq = double(hits) / n;
    EXPECT_NEAR(freq, p, 3.0 * std::sqrt(p * (1 - p) / n)) << "ratio " << ratio;
    if (ratio == 1.0) {
      EXPECT_NEAR(freq, 0.3679, 0.01);
    }
  }
}

TEST(Anneal, ConstantScoreAcceptsEverything) {
  const Rect box{0, 0, 50, 40};
  RandomSource rng(2);
  Homography last;
  auto constant = [&](const Homography& h) {
    last = h;
    return combine_scores(0.7, 1.0, 1.0, 1.0);
  };
  AnnealSchedule sched;
  sched.sigma0 = 2.0;
  const auto r = anneal(Homography(), sched, box, constant, rng);
  EXPECT_EQ(r.accepted_count, sched.iterations);
  EXPECT_DOUBLE_EQ(r.breakdown.total, 0.7);
  // The chain wandered away from the start.
  EXPECT_GT(corner_error(last, Homography(), box), 0.1);
}

TEST(Anneal, NeverWorseThanStart) {
  const Scene s(small_spec());
  const auto f = target(s, 10);
  const Scorer scorer(context(s, f));
  RandomSource rng(3);
  for (int run = 0; run < 10; ++run) {
    const Homography h0 = compose(f.gt, perturb_control_points(s.box, 6.0, rng));
    const double start = scorer(h0).total;
    AnnealSchedule sched = schedule_for(s.box);
    sched.iterations = 60;
    const auto r = anneal(h0, sched, s.box, std::cref(scorer), rng);
    EXPECT_GE(r.breakdown.total, start);
    EXPECT_EQ(r.breakdown, scorer(r.h));
  }
}

TEST(Anneal, Deterministic) {
  const Scene s(small_spec());
  const auto f = target(s, 8);
  const Scorer scorer(context(s, f));
  const Homography h0 = compose(Homography::translation(4, -3), f.gt);
  AnnealSchedule sched = schedule_for(s.box);
  sched.iterations = 80;
  RandomSource a(44), b(44);
  const auto ra = anneal(h0, sched, s.box, std::cref(scorer), a);
  const auto rb = anneal(h0, sched, s.box, std::cref(scorer), b);
  EXPECT_EQ(ra.h.matrix(), rb.h.matrix());
  EXPECT_EQ(ra.breakdown, rb.breakdown);
  EXPECT_EQ(ra.accepted_count, rb.accepted_count);
  EXPECT_EQ(ra.evaluation_count, rb.evaluation_count);
  EXPECT_EQ(ra.seed, 44u);
}

// Start 8 px of corner displacement away from the true pose.
TEST(Anneal, RecoversEightPixelOffset) {
  const Scene s(small_spec());
  const auto f = target(s, 12);
  const Scorer scorer(context(s, f));
  RandomSource rng(4);
  int good = 0;
  const int runs = 100;
  for (int run = 0; run < runs; ++run) {
    CorrespondenceSet c;
    const auto corners = s.box.corners();
    for (int k = 0; k < 4; ++k) {
      const double a = rng.uniform(0.0, 2.0 * M_PI);
      c.source[k] = corners[k];
      const Point2 p = warp_point(f.gt, corners[k]);
      c.target[k] = {p.x + 8.0 * std::cos(a), p.y + 8.0 * std::sin(a)};
    }
    const Homography h0 = homography_from_correspondences(c);
    ASSERT_NEAR(corner_error(h0, f.gt, s.box), 8.0, 1e-6);
    RandomSource run_rng(1000 + run);
    const auto r = anneal(h0, schedule_for(s.box), s.box, std::cref(scorer), run_rng);
    good += corner_error(r.h, f.gt, s.box) < 2.0;
  }
  EXPECT_GE(good, 95);
}

TEST(InitHypotheses, RequiresASource) {
  RandomSource rng(5);
  HypothesisRequest req;
  req.control_box = {0, 0, 10, 10};
  auto zero = [](const Homography&) { return ScoreBreakdown{}; };
  EXPECT_EQ(oracle::error_of([&] { init_hypotheses(req, zero, rng); }), ErrorCode::NoInitializationSource);
  const BinaryMask empty(20, 20);
  const FlowField flow(20, 20);
  req.flow = &flow;
  req.prev_region = &empty;
  EXPECT_EQ(oracle::error_of([&] { init_hypotheses(req, zero, rng); }), ErrorCode::NoInitializationSource);
}

TEST(InitHypotheses, SingleSampleWithoutFlowReturnsPrevious) {
  RandomSource rng(6);
  HypothesisRequest req;
  req.prev_pose = Homography::similarity(1.1, 0.2, 5, 7);
  req.control_box = {0, 0, 30, 20};
  req.samples = 1;
  int calls = 0;
  const auto r = init_hypotheses(
      req,
      [&](const Homography&) {
        ++calls;
        return combine_scores(0.5, 1, 1, 1);
      },
      rng);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.h.matrix(), req.prev_pose->matrix());
}

TEST(InitHypotheses, IdentityFlowKeepsPrevious) {
  const Scene s(small_spec());
  const auto f = target(s, 6);
  const Scorer scorer(context(s, f));
  const BinaryMask region = warp_mask(f.gt, s.template_mask, f.seg.width(), f.seg.height());
  const FlowField flow(f.seg.width(), f.seg.height());
  HypothesisRequest req;
  req.prev_pose = f.gt;
  req.flow = &flow;
  req.prev_region = &region;
  req.control_box = s.box;
  RandomSource rng(7);
  const auto r = init_hypotheses(req, std::cref(scorer), rng);
  EXPECT_LT(corner_error(r.h, f.gt, s.box), 1e-6);
  EXPECT_EQ(r.breakdown, scorer(f.gt));
  EXPECT_EQ(r.evaluation_count, 50);
}

TEST(InitHypotheses, UniformTranslationFlow) {
  const Scene s(small_spec());
  const auto f = target(s, 7);
  const Scorer scorer(context(s, f));
  // The object moved 5 px right since the previous frame.
  const Homography prev = compose(Homography::translation(-5, 0), f.gt);
  const BinaryMask region = warp_mask(prev, s.template_mask, f.seg.width(), f.seg.height());
  const FlowField flow = FlowField::uniform(f.seg.width(), f.seg.height(), 5.0f, 0.0f);
  HypothesisRequest req;
  req.prev_pose = prev;
  req.flow = &flow;
  req.prev_region = &region;
  req.control_box = s.box;
  RandomSource rng(8);
  const auto r = init_hypotheses(req, std::cref(scorer), rng);
  EXPECT_LT(corner_error(r.h, compose(Homography::translation(5, 0), prev), s.box), 0.5);
  EXPECT_GT(r.breakdown.total, scorer(prev).total);
}

TEST(Redetect, EmptySegmentationScoresZero) {
  const Scene s(small_spec());
  const auto f = target(s, 5);
  const BinaryMask empty(f.seg.width(), f.seg.height());
  ScoringContext ctx = context(s, f);
  ctx.segmentation = &empty;
  const Scorer scorer(ctx);
  RedetectRequest req;
  req.template_mask = &s.template_mask;
  req.control_box = s.box;
  req.segmentation = &empty;
  RandomSource rng(9);
  const auto r = redetect(req, schedule_for(s.box), std::cref(scorer), rng);
  EXPECT_EQ(r.breakdown.total, 0.0);
}

TEST(Redetect, SelfDetection) {
  const Scene s(small_spec());
  const auto f = target(s, 0);
  const Scorer scorer(context(s, f));
  RedetectRequest req;
  req.template_mask = &s.template_mask;
  req.control_box = s.box;
  req.segmentation = &f.seg;
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    RandomSource rng(seed);
    const auto r = redetect(req, schedule_for(s.box), std::cref(scorer), rng);
    EXPECT_GE(r.breakdown.total, 0.95);
  }
}

TEST(Redetect, ReappearanceAtKnownPose) {
  SceneSpec spec = small_spec();
  // Far from the template pose: large in-plane rotation, tilt and shift.
  spec.keyframes = {{0, {0, 0, 0}, {0, 0, 800}}, {19, {0.2, -0.25, 2.2}, {-30, 15, 760}}};
  const Scene s(spec);
  const auto f = target(s, 19);
  const Scorer scorer(context(s, f));
  RedetectRequest req;
  req.template_mask = &s.template_mask;
  req.control_box = s.box;
  req.segmentation = &f.seg;
  int good = 0;
  const int runs = 20;
  for (int run = 0; run < runs; ++run) {
    RandomSource rng(200 + run);
    const auto r = redetect(req, schedule_for(s.box), std::cref(scorer), rng);
    good += corner_error(r.h, f.gt, s.box) < 3.0;
  }
  EXPECT_GE(good, 16);
}

}  // namespace
}  // namespace coin
