#include <gtest/gtest.h>

#include <cmath>

#include "coin/scoring.hpp"
#include "coin/synth.hpp"
#include "support/oracles.hpp"

namespace coin {
namespace {

BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.set(x, y);
  return m;
}

BinaryMask first_n(const BinaryMask& m, std::size_t n) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t i = 0, k = 0; i < m.size() && k < n; ++i)
    if (m.bits()[i]) out.bits()[i] = 1, ++k;
  return out;
}

TEST(SObj, SegmentationInsideContourIsOne) {
  const auto contour = rect_mask(20, 20, 2, 2, 15, 15);
  EXPECT_DOUBLE_EQ(s_obj(rect_mask(20, 20, 4, 4, 8, 8), contour), 1.0);
}

TEST(SObj, SegmentationOutsideContourIsZero) {
  const auto contour = rect_mask(20, 20, 0, 0, 5, 5);
  EXPECT_DOUBLE_EQ(s_obj(rect_mask(20, 20, 10, 10, 15, 15), contour), 0.0);
}

TEST(SObj, SixOfTenInside) {
  // 10 pixels on one row, the first 6 inside the contour.
  const auto seg = rect_mask(20, 5, 0, 2, 9, 2);
  const auto contour = rect_mask(20, 5, 0, 0, 5, 4);
  EXPECT_DOUBLE_EQ(s_obj(seg, contour), 0.6);
}

TEST(SObj, EmptySegmentationIsZero) {
  EXPECT_DOUBLE_EQ(s_obj(BinaryMask(8, 8), rect_mask(8, 8, 0, 0, 3, 3)), 0.0);
}

TEST(SObj, DimensionMismatchThrows) {
  EXPECT_EQ(oracle::error_of([] { s_obj(BinaryMask(8, 8), BinaryMask(9, 8)); }), ErrorCode::DimensionMismatch);
}

TEST(SCover, CoveredContourIsOne) {
  const auto contour = rect_mask(20, 20, 5, 5, 9, 9);
  EXPECT_DOUBLE_EQ(s_cover(rect_mask(20, 20, 0, 0, 19, 19), contour), 1.0);
}

TEST(SCover, DisjointIsZero) {
  EXPECT_DOUBLE_EQ(s_cover(rect_mask(20, 20, 0, 0, 3, 3), rect_mask(20, 20, 10, 10, 12, 12)), 0.0);
}

TEST(SCover, ThirtyOfForty) {
  const auto contour = rect_mask(20, 20, 0, 0, 9, 3);  // 40 pixels
  const auto seg = first_n(contour, 30);
  EXPECT_DOUBLE_EQ(s_cover(seg, contour), 0.75);
}

TEST(SCover, EmptyContourIsZero) {
  EXPECT_DOUBLE_EQ(s_cover(rect_mask(8, 8, 0, 0, 3, 3), BinaryMask(8, 8)), 0.0);
}

TEST(Visibility, FullOverlapIsTemplate) {
  const auto contour = rect_mask(16, 16, 3, 3, 9, 9);
  EXPECT_EQ(visibility_mask(BinaryMask(16, 16, true), contour), contour);
}

TEST(Visibility, NoOverlapIsEmpty) {
  EXPECT_FALSE(visibility_mask(rect_mask(16, 16, 0, 0, 2, 2), rect_mask(16, 16, 8, 8, 12, 12)).any());
}

TEST(Visibility, PartialOcclusionIsExactIntersection) {
  const auto contour = rect_mask(32, 32, 4, 4, 20, 20);
  auto seg = contour;
  for (int y = 0; y < 32; ++y)
    for (int x = 12; x < 32; ++x) seg.set(x, y, false);  // occluder on the right
  const auto vis = visibility_mask(seg, contour);
  std::size_t expected = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool both = seg(x, y) && contour(x, y);
      EXPECT_EQ(vis(x, y), both);
      expected += both;
    }
  EXPECT_EQ(vis.count(), expected);
  EXPECT_EQ(expected, 17u * 8u);
}

TEST(SOccl, IdenticalUnderIdentityIsOne) {
  const auto vis = rect_mask(30, 30, 5, 5, 14, 14);
  EXPECT_DOUBLE_EQ(s_occl(vis, vis, Homography()), 1.0);
}

TEST(SOccl, EmptyPreviousIsZero) {
  EXPECT_DOUBLE_EQ(s_occl(rect_mask(30, 30, 5, 5, 14, 14), BinaryMask(30, 30), Homography()), 0.0);
}

TEST(SOccl, BothEmptyIsOne) {
  EXPECT_DOUBLE_EQ(s_occl(BinaryMask(30, 30), BinaryMask(30, 30), Homography()), 1.0);
}

TEST(SOccl, ShiftedPreviousUnderMatchingTranslationIsOne) {
  const auto prev = rect_mask(40, 40, 10, 10, 19, 19);
  const auto cur = rect_mask(40, 40, 13, 10, 22, 19);
  EXPECT_DOUBLE_EQ(s_occl(cur, prev, Homography::translation(3, 0)), 1.0);
  // Without the motion model the overlap is 70 / 130.
  EXPECT_DOUBLE_EQ(s_occl(cur, prev, Homography()), 70.0 / 130.0);
}

class Appearance : public ::testing::Test {
protected:
  void SetUp() override {
    RandomSource rng(11);
    tmpl = oracle::textured_gray(48, 40, rng);
    support = rect_mask(48, 40, 4, 4, 43, 35);
  }
  Image transformed(double a, double b) const {
    Image out = tmpl;
    for (auto& v : out.data()) v = static_cast<float>(a * v + b);
    return out;
  }
  Image tmpl;
  BinaryMask support;
};

TEST_F(Appearance, SelfUnderIdentityIsOne) {
  EXPECT_NEAR(s_appearance(tmpl, tmpl, Homography(), support), 1.0, 1e-12);
}

TEST_F(Appearance, InvertedIntensitiesAreZero) {
  EXPECT_NEAR(s_appearance(transformed(-1.0, 255.0), tmpl, Homography(), support), 0.0, 1e-12);
}

TEST_F(Appearance, PositiveAffineIntensityIsInvariant) {
  for (double a : {0.5, 2.0, 3.7})
    for (double b : {-20.0, 0.0, 30.0}) {
      EXPECT_NEAR(s_appearance(transformed(a, b), tmpl, Homography(), support), 1.0, 1e-9) << a << " " << b;
      // Either image may be transformed.
      EXPECT_NEAR(s_appearance(tmpl, transformed(a, b), Homography(), support), 1.0, 1e-9) << a << " " << b;
    }
}

TEST_F(Appearance, MatchesDirectZncc) {
  RandomSource rng(5);
  const Image frame = oracle::textured_gray(48, 40, rng);
  const Homography h = Homography::translation(1.5, -0.25);
  std::vector<double> a, b;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 48; ++x) {
      if (!support(x, y)) continue;
      const Point2 q = warp_point(h, {double(x), double(y)});
      a.push_back(sample_bilinear(frame, q.x, q.y));
      b.push_back(tmpl.at(x, y));
    }
  EXPECT_NEAR(s_appearance(frame, tmpl, h, support), 0.5 + oracle::zncc(a, b) / 2.0, 1e-12);
}

TEST_F(Appearance, SmallSupportIsNeutral) {
  const auto tiny = rect_mask(48, 40, 10, 10, 12, 12);  // 9 pixels
  EXPECT_DOUBLE_EQ(s_appearance(transformed(-1.0, 255.0), tmpl, Homography(), tiny), kNeutralAppearance);
}

TEST_F(Appearance, FlatImageIsNeutral) {
  EXPECT_DOUBLE_EQ(s_appearance(Image(48, 40, 1, 100.0f), tmpl, Homography(), support), kNeutralAppearance);
}

TEST(AppearanceSupport, IsTemplateAndBackWarpedSegmentation) {
  RandomSource rng(3);
  const auto tm = oracle::random_blob_mask(40, 40, rng);
  const auto seg = oracle::random_blob_mask(50, 45, rng);
  const Homography h = Homography::similarity(1.1, 0.3, 4.0, -2.0);
  const auto support = appearance_support(tm, seg, h);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const Point2 q = warp_point(h, {double(x), double(y)});
      const int qx = int(std::floor(q.x + 0.5)), qy = int(std::floor(q.y + 0.5));
      const bool expected = tm(x, y) && seg.contains(qx, qy) && seg(qx, qy);
      EXPECT_EQ(support(x, y), expected) << x << "," << y;
    }
}

TEST(CombineScores, AllOnesIsOne) { EXPECT_DOUBLE_EQ(combine_scores(1, 1, 1, 1).total, 1.0); }

TEST(CombineScores, AnyZeroAnnihilates) { EXPECT_DOUBLE_EQ(combine_scores(1, 1, 1, 0).total, 0.0); }

TEST(CombineScores, Arithmetic) { EXPECT_NEAR(combine_scores(0.9, 0.8, 1.0, 0.5).total, 0.36, 1e-15); }

TEST(CombineScores, TotalIsExactProductOfStoredComponents) {
  RandomSource rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto s = combine_scores(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
    EXPECT_EQ(s.total, s.s_obj * s.s_cover * s.s_occl * s.s_appearance);
  }
}

TEST(CombineScores, ProductBelowMinimumUnlessOthersAreOne) {
  RandomSource rng(9);
  for (int i = 0; i < 200; ++i) {
    const double c[4] = {rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99),
                         rng.uniform(0.01, 0.99)};
    const auto s = combine_scores(c[0], c[1], c[2], c[3]);
    EXPECT_LT(s.total, std::min({c[0], c[1], c[2], c[3]}));
  }
  EXPECT_DOUBLE_EQ(combine_scores(1, 0.4, 1, 1).total, 0.4);
}

TEST(ScoreProperties, ObjCoverDuality) {
  RandomSource rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto a = oracle::random_blob_mask(32, 32, rng);
    const auto b = oracle::random_blob_mask(32, 32, rng);
    EXPECT_DOUBLE_EQ(s_obj(a, b), s_cover(b, a));
  }
}

// Random scoring scenario: segmentation, template and previous visibility of
// assorted sizes, plus a plausible previous pose.
struct Scenario {
  Image frame, tmpl;
  BinaryMask seg, tmask, prev;
  Homography prev_pose;
  ScoringContext ctx() const {
    ScoringContext c;
    c.frame_gray = &frame;
    c.segmentation = &seg;
    c.template_gray = &tmpl;
    c.template_mask = &tmask;
    c.prev_visibility = &prev;
    c.prev_pose = prev_pose;
    return c;
  }
};

Scenario random_scenario(RandomSource& rng) {
  Scenario s;
  s.frame = oracle::textured_gray(80, 64, rng);
  s.tmpl = oracle::textured_gray(70, 60, rng);
  s.seg = oracle::random_blob_mask(80, 64, rng);
  s.tmask = oracle::random_blob_mask(70, 60, rng);
  s.prev = rng.uniform() < 0.2 ? BinaryMask(80, 64) : oracle::random_blob_mask(80, 64, rng);
  s.prev_pose = Homography::similarity(rng.uniform(0.8, 1.2), rng.uniform(-0.5, 0.5), rng.uniform(-5, 5),
                                       rng.uniform(-5, 5));
  return s;
}

Homography random_hypothesis(RandomSource& rng) {
  Eigen::Matrix3d m = Homography::similarity(rng.uniform(0.5, 1.6), rng.uniform(-3.2, 3.2), rng.uniform(-30, 60),
                                             rng.uniform(-30, 50))
                          .matrix();
  m(2, 0) = rng.uniform(-0.004, 0.004);
  m(2, 1) = rng.uniform(-0.004, 0.004);
  m(0, 1) += rng.uniform(-0.2, 0.2);
  return Homography(m);
}

TEST(Scorer, EqualsReferenceScoreExactly) {
  RandomSource rng(1234);
  int checked = 0;
  for (int s = 0; s < 20; ++s) {
    const Scenario sc = random_scenario(rng);
    const auto ctx = sc.ctx();
    const Scorer fast(ctx);
    for (int i = 0; i < 40; ++i) {
      const Homography h = i == 0 ? Homography() : i == 1 ? sc.prev_pose : random_hypothesis(rng);
      const ScoreBreakdown a = fast(h);
      const ScoreBreakdown b = score(ctx, h);
      EXPECT_EQ(a, b) << "scenario " << s << " hypothesis " << i;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 800);
}

TEST(Scorer, EqualsReferenceForMapsCrossingInfinity) {
  RandomSource rng(77);
  const Scenario sc = random_scenario(rng);
  const auto ctx = sc.ctx();
  const Scorer fast(ctx);
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 0) = -0.03;  // w changes sign inside the template box
  for (double tx : {0.0, 10.0, 25.0}) {
    m(0, 2) = tx;
    EXPECT_EQ(fast(Homography(m)), score(ctx, Homography(m)));
  }
}

TEST(ScoreProperties, ComponentsInUnitInterval) {
  RandomSource rng(55);
  for (int s = 0; s < 10; ++s) {
    const Scenario sc = random_scenario(rng);
    const Scorer fast(sc.ctx());
    for (int i = 0; i < 20; ++i) {
      const auto b = fast(random_hypothesis(rng));
      for (double v : {b.s_obj, b.s_cover, b.s_occl, b.s_appearance, b.total}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(ScoreProperties, PerfectSyntheticFrameScoresHigh) {
  SceneSpec spec;
  spec.width = 320;
  spec.height = 240;
  spec.frames = 10;
  spec.outline.rx = spec.outline.ry = 50.0;
  spec.keyframes = {{0, {0, 0, 0}, {0, 0, 800}}, {9, {0.3, 0.4, 0.2}, {15, -10, 820}}};
  const SceneRenderer r(spec);
  const SynthFrame f0 = r.render(0), f9 = r.render(9);
  const Image g0 = to_gray(f0.image), g9 = to_gray(f9.image);
  const BinaryMask m0 = object_mask(f0.labels), m9 = object_mask(f9.labels);
  ScoringContext ctx;
  ctx.frame_gray = &g9;
  ctx.segmentation = &m9;
  ctx.template_gray = &g0;
  ctx.template_mask = &m0;
  ctx.prev_visibility = &m0;
  const Homography gt = r.inter_frame(0, 9);
  const auto s = score(ctx, gt);
  EXPECT_GE(s.total, 0.98);
  // A displaced pose scores lower.
  EXPECT_LT(score(ctx, compose(Homography::translation(6, 0), gt)).total, s.total);
}

}  // namespace
}  // namespace coin
