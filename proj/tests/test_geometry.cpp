#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "coin/geometry.hpp"
#include "coin/mask.hpp"
#include "support/oracles.hpp"

namespace coin {
namespace {

double max_abs_diff(const Homography& a, const Homography& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

// Similarity with a mild projective part, well conditioned on [0, 200]^2.
Homography random_homography(RandomSource& rng) {
  Eigen::Matrix3d m = Homography::similarity(rng.uniform(0.5, 2.0), rng.uniform(-std::numbers::pi, std::numbers::pi),
                                             rng.uniform(-100, 100), rng.uniform(-100, 100))
                          .matrix();
  m(0, 1) += rng.uniform(-0.3, 0.3);
  m(1, 0) += rng.uniform(-0.3, 0.3);
  m(2, 0) = rng.uniform(-1e-3, 1e-3);
  m(2, 1) = rng.uniform(-1e-3, 1e-3);
  return Homography(m);
}

CorrespondenceSet square_to(std::array<Point2, 4> target, double side = 1.0) {
  CorrespondenceSet c;
  c.source = {Point2{0, 0}, Point2{side, 0}, Point2{side, side}, Point2{0, side}};
  c.target = target;
  return c;
}

TEST(Homography, NormalizedBottomRightIsOne) {
  Eigen::Matrix3d m;
  m << 2, 0, 4, 0, 2, 6, 0, 0, 2;
  const Homography h(m);
  EXPECT_DOUBLE_EQ(h(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(h(0, 2), 2.0);
}

TEST(Homography, FrobeniusFallbackWhenBottomRightIsZero) {
  Eigen::Matrix3d m;
  m << 0, 1, 0, 1, 0, 1, 1, 0, 0;
  const Homography h(m);
  EXPECT_NEAR(h.matrix().norm(), 1.0, 1e-12);
}

TEST(Homography, SingularMatrixRejected) {
  EXPECT_EQ(oracle::error_of([] { Homography(Eigen::Matrix3d::Zero()); }), ErrorCode::SingularMatrix);
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  EXPECT_EQ(oracle::error_of([&] { Homography{m}; }), ErrorCode::SingularMatrix);
}

TEST(Homography, ArrayRoundTrip) {
  RandomSource rng(4);
  const Homography h = random_homography(rng);
  const auto a = h.to_array();
  EXPECT_EQ(Homography::from_array(a).matrix(), h.matrix());
  EXPECT_DOUBLE_EQ(a[8], 1.0);
}

TEST(FromCorrespondences, IdentityOnUnitSquare) {
  const auto h = homography_from_correspondences(square_to({Point2{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  EXPECT_LT(max_abs_diff(h, Homography()), 1e-12);
}

TEST(FromCorrespondences, PureTranslation) {
  const auto h = homography_from_correspondences(square_to({Point2{5, 3}, {6, 3}, {6, 4}, {5, 4}}));
  EXPECT_LT(max_abs_diff(h, Homography::translation(5, 3)), 1e-12);
}

TEST(FromCorrespondences, RecoversRandomHomographies) {
  RandomSource rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const Homography truth = random_homography(rng);
    CorrespondenceSet c;
    c.source = {Point2{rng.uniform(0, 60), rng.uniform(0, 60)}, Point2{rng.uniform(140, 200), rng.uniform(0, 60)},
                Point2{rng.uniform(140, 200), rng.uniform(140, 200)}, Point2{rng.uniform(0, 60), rng.uniform(140, 200)}};
    for (int k = 0; k < 4; ++k) c.target[k] = warp_point(truth, c.source[k]);
    const Homography est = homography_from_correspondences(c);
    for (int k = 0; k < 4; ++k) {
      const Point2 q = warp_point(est, c.source[k]);
      ASSERT_LT(std::hypot(q.x - c.target[k].x, q.y - c.target[k].y), 1e-6) << "case " << i;
    }
    EXPECT_DOUBLE_EQ(est(2, 2), 1.0);
    EXPECT_LT(max_abs_diff(est, truth), 1e-6);
  }
}

TEST(FromCorrespondences, CollinearSourceRejected) {
  CorrespondenceSet c;
  c.source = {Point2{0, 0}, {1, 1}, {2, 2}, {0, 5}};
  c.target = {Point2{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_EQ(oracle::error_of([&] { homography_from_correspondences(c); }), ErrorCode::DegenerateConfiguration);
}

TEST(FromCorrespondences, CollinearTargetRejected) {
  const auto c = square_to({Point2{0, 0}, {1, 0}, {2, 0}, {0, 1}});
  EXPECT_EQ(oracle::error_of([&] { homography_from_correspondences(c); }), ErrorCode::DegenerateConfiguration);
}

TEST(Compose, WithIdentityIsSame) {
  RandomSource rng(1);
  const Homography h = random_homography(rng);
  EXPECT_LT(max_abs_diff(compose(h, Homography()), h), 1e-12);
  EXPECT_LT(max_abs_diff(compose(Homography(), h), h), 1e-12);
}

TEST(Compose, WithInverseIsIdentity) {
  RandomSource rng(2);
  for (int i = 0; i < 50; ++i) {
    const Homography h = random_homography(rng);
    EXPECT_LT(max_abs_diff(compose(h, invert(h)), Homography()), 1e-6);
  }
}

TEST(Compose, TranslationsAdd) {
  EXPECT_LT(max_abs_diff(compose(Homography::translation(1, 2), Homography::translation(-4, 7)),
                         Homography::translation(-3, 9)),
            1e-15);
}

TEST(Compose, MatchesSequentialWarp) {
  RandomSource rng(3);
  for (int i = 0; i < 100; ++i) {
    const Homography a = random_homography(rng), b = random_homography(rng);
    const Point2 p{rng.uniform(0, 200), rng.uniform(0, 200)};
    const Point2 lhs = warp_point(compose(a, b), p);
    const Point2 rhs = warp_point(a, warp_point(b, p));
    EXPECT_NEAR(lhs.x, rhs.x, 1e-6);
    EXPECT_NEAR(lhs.y, rhs.y, 1e-6);
  }
}

TEST(Compose, Associative) {
  RandomSource rng(5);
  for (int i = 0; i < 100; ++i) {
    const Homography a = random_homography(rng), b = random_homography(rng), c = random_homography(rng);
    EXPECT_LT(max_abs_diff(compose(compose(a, b), c), compose(a, compose(b, c))), 1e-9);
  }
}

TEST(Invert, IdentityIsIdentity) { EXPECT_LT(max_abs_diff(invert(Homography()), Homography()), 1e-15); }

TEST(Invert, Translation) {
  EXPECT_LT(max_abs_diff(invert(Homography::translation(5, 3)), Homography::translation(-5, -3)), 1e-15);
}

TEST(Invert, RandomVerifiedByComposition) {
  RandomSource rng(6);
  for (int i = 0; i < 100; ++i) {
    const Homography h = random_homography(rng);
    EXPECT_LT(max_abs_diff(compose(invert(h), h), Homography()), 1e-6);
  }
}

TEST(WarpPoint, Examples) {
  const Point2 a = warp_point(Homography(), {7, 2});
  EXPECT_DOUBLE_EQ(a.x, 7);
  EXPECT_DOUBLE_EQ(a.y, 2);
  const Point2 b = warp_point(Homography::translation(1, 1), {0, 0});
  EXPECT_DOUBLE_EQ(b.x, 1);
  EXPECT_DOUBLE_EQ(b.y, 1);
  const Point2 c = warp_point(Homography::similarity(2, 0, 0, 0), {3, 4});
  EXPECT_DOUBLE_EQ(c.x, 6);
  EXPECT_DOUBLE_EQ(c.y, 8);
}

TEST(WarpPoint, PointAtInfinity) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 0) = -1.0;
  const Homography h(m);
  EXPECT_EQ(oracle::error_of([&] { warp_point(h, {1.0, 0.0}); }), ErrorCode::PointAtInfinity);
}

BinaryMask square_blob(int w, int h, int x0, int y0, int side) {
  BinaryMask m(w, h);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x)
      if (m.contains(x, y)) m.set(x, y);
  return m;
}

TEST(WarpMask, IdentityIsBitIdentical) {
  RandomSource rng(7);
  const auto m = oracle::random_blob_mask(64, 48, rng);
  EXPECT_EQ(warp_mask(Homography(), m, 64, 48), m);
}

TEST(WarpMask, TranslationShiftsAndClips) {
  const auto m = square_blob(40, 30, 15, 5, 20);  // x 15..34
  const auto out = warp_mask(Homography::translation(10, 0), m, 40, 30);
  EXPECT_EQ(out, square_blob(40, 30, 25, 5, 20));
  EXPECT_EQ(out.count(), 15u * 20u);  // columns 25..39 survive
}

TEST(WarpMask, IntegerTranslationPreservesCount) {
  RandomSource rng(8);
  for (int i = 0; i < 20; ++i) {
    BinaryMask m(80, 80);
    const auto inner = oracle::random_blob_mask(40, 40, rng);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (inner(x, y)) m.set(x + 20, y + 20);
    const int tx = rng.uniform_int(-20, 20), ty = rng.uniform_int(-20, 20);
    EXPECT_EQ(warp_mask(Homography::translation(tx, ty), m, 80, 80).count(), m.count());
  }
}

TEST(WarpMask, RotatedLShapeMatchesForwardRasterization) {
  BinaryMask l(64, 64);
  for (int y = 10; y < 40; ++y)
    for (int x = 12; x < 20; ++x) l.set(x, y);
  for (int y = 32; y < 40; ++y)
    for (int x = 12; x < 34; ++x) l.set(x, y);
  const Homography h = compose(Homography::translation(40, 8), Homography::similarity(1.0, std::numbers::pi / 2, 0, 0));
  const auto fast = warp_mask(h, l, 64, 64);
  const auto brute = oracle::forward_rasterize(h, l, 64, 64);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < fast.size(); ++i) diff += fast.bits()[i] != brute.bits()[i];
  EXPECT_EQ(fast.count(), l.count());
  EXPECT_LE(double(diff), 0.01 * double(l.count()));
}

TEST(WarpMask, GeneralHomographyMatchesForwardRasterization) {
  RandomSource rng(9);
  for (int i = 0; i < 10; ++i) {
    const auto m = oracle::random_blob_mask(60, 60, rng);
    Eigen::Matrix3d hm = Homography::similarity(rng.uniform(0.8, 1.3), rng.uniform(-1, 1), 10, 5).matrix();
    hm(2, 0) = rng.uniform(-1e-3, 1e-3);
    const Homography h(hm);
    const auto fast = warp_mask(h, m, 90, 90);
    const auto brute = oracle::forward_rasterize(h, m, 90, 90);
    std::size_t diff = 0;
    for (std::size_t k = 0; k < fast.size(); ++k) diff += fast.bits()[k] != brute.bits()[k];
    // Disagreement only along boundaries.
    EXPECT_LE(double(diff), 0.15 * double(brute.count()) + 2.0) << i;
  }
}

TEST(WarpMask, PixelsMappingOutsideSourceAreUnset) {
  const BinaryMask full(10, 10, true);
  const auto out = warp_mask(Homography::translation(50, 50), full, 100, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) EXPECT_EQ(out(x, y), x >= 50 && x < 60 && y >= 50 && y < 60);
}

TEST(PerturbControlPoints, ZeroSigmaIsIdentity) {
  RandomSource rng(10);
  const Rect box{10, 20, 110, 90};
  const Homography h = perturb_control_points(box, 0.0, rng);
  for (const auto& c : box.corners()) {
    const Point2 q = warp_point(h, c);
    EXPECT_NEAR(q.x, c.x, 1e-9);
    EXPECT_NEAR(q.y, c.y, 1e-9);
  }
}

TEST(PerturbControlPoints, SeedReproducible) {
  const Rect box{0, 0, 50, 40};
  RandomSource a(99), b(99);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(perturb_control_points(box, 2.0, a).matrix(), perturb_control_points(box, 2.0, b).matrix());
}

TEST(PerturbControlPoints, DisplacementStatistics) {
  const Rect box{0, 0, 100, 80};
  const int n = 10000;
  for (int corner = 0; corner < 4; ++corner) {
    double sx = 0, sxx = 0, sy = 0, syy = 0;
    RandomSource local(RandomSource::derive(12345, corner));
    for (int i = 0; i < n; ++i) {
      const Homography h = perturb_control_points(box, 3.0, local);
      const Point2 c = box.corners()[corner];
      const Point2 q = warp_point(h, c);
      const double dx = q.x - c.x, dy = q.y - c.y;
      sx += dx, sxx += dx * dx, sy += dy, syy += dy * dy;
    }
    const double stdx = std::sqrt(sxx / n - (sx / n) * (sx / n));
    const double stdy = std::sqrt(syy / n - (sy / n) * (sy / n));
    EXPECT_GE(stdx, 2.9);
    EXPECT_LE(stdx, 3.1);
    EXPECT_GE(stdy, 2.9);
    EXPECT_LE(stdy, 3.1);
    EXPECT_NEAR(sx / n, 0.0, 0.15);
    EXPECT_NEAR(sy / n, 0.0, 0.15);
  }
}

TEST(PerturbControlPoints, DegenerateBoxThrows) {
  RandomSource rng(1);
  EXPECT_EQ(oracle::error_of([&] { perturb_control_points(Rect{5, 5, 5, 5}, 1.0, rng); }),
            ErrorCode::DegenerateConfiguration);
}

TEST(PerturbControlPoints, ResultsAreValidQuads) {
  RandomSource rng(13);
  const Rect box{0, 0, 40, 40};
  for (int i = 0; i < 2000; ++i) EXPECT_TRUE(is_valid_quad(perturb_control_points(box, 12.0, rng), box));
}

TEST(IsValidQuad, RejectsFoldOver) {
  const Rect box{0, 0, 10, 10};
  CorrespondenceSet c;
  c.source = box.corners();
  c.target = {Point2{0, 0}, {10, 0}, {0, 10}, {10, 10}};  // bow-tie
  // Such targets may not even yield a homography; if they do it must be flagged.
  try {
    EXPECT_FALSE(is_valid_quad(homography_from_correspondences(c), box));
  } catch (const Error&) {
  }
  EXPECT_TRUE(is_valid_quad(Homography(), box));
}

TEST(Geometry, RoundTripRuntime) {
  RandomSource rng(77);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    const Homography truth = random_homography(rng);
    CorrespondenceSet c;
    c.source = Rect{0, 0, 200, 200}.corners();
    for (int k = 0; k < 4; ++k) c.target[k] = warp_point(truth, c.source[k]);
    (void)homography_from_correspondences(c);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

}  // namespace
}  // namespace coin
