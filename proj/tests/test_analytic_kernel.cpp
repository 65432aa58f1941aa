#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "towerlab/analytic_kernel.hpp"

using namespace towerlab;

namespace {

Point pt(std::initializer_list<double> v) {
  Point x(v.size());
  int i = 0;
  for (double c : v) x(i++) = c;
  return x;
}

Point axis_point(int n, double z) {
  Point x = Point::Zero(n);
  x(n - 1) = z;
  return x;
}

}  // namespace

TEST(Dims, FourAndSix) {
  const auto d4 = dims_constants(4);
  EXPECT_NEAR(d4.alpha, 2.0 * std::sqrt(2.0), 1e-14);
  EXPECT_DOUBLE_EQ(d4.p, 3.0);
  EXPECT_NEAR(d4.ball_vol, std::numbers::pi * std::numbers::pi / 2, 1e-14);
  const auto d6 = dims_constants(6);
  EXPECT_NEAR(d6.alpha, 24.0, 1e-12);
  EXPECT_DOUBLE_EQ(d6.p, 2.0);
}

TEST(Dims, RejectsThree) { EXPECT_THROW(dims_constants(3), DimensionError); }

TEST(Bubble, Values) {
  const auto d = dims_constants(4);
  Bubble b{1.0, Point::Zero(4)};
  EXPECT_NEAR(eval_bubble(d, b, Point::Zero(4)), 2 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(eval_bubble(d, b, pt({1, 0, 0, 0})), std::sqrt(2.0), 1e-14);
  b.delta = 0.1;
  // 2 sqrt 2 * 0.1 / 1.01
  EXPECT_NEAR(eval_bubble(d, b, pt({0, 0, 0, 1})), 2 * std::sqrt(2.0) * 0.1 / 1.01, 1e-14);
  EXPECT_NEAR(eval_bubble(d, b, pt({0, 0, 0, 1})), 0.28004, 1e-5);
}

TEST(Psi, ZerosAndCentre) {
  const auto d = dims_constants(4);
  Bubble b{1.0, Point::Zero(4)};
  EXPECT_NEAR(eval_psi(d, b, 0, pt({1, 0, 0, 0})), 0.0, 1e-15);
  EXPECT_NEAR(eval_psi(d, b, 4, Point::Zero(4)), 0.0, 1e-15);
  EXPECT_NEAR(eval_psi(d, b, 0, Point::Zero(4)), -2 * std::sqrt(2.0), 1e-14);
  EXPECT_THROW(eval_psi(d, b, 2, Point::Zero(4)), IndexError);
}

TEST(Psi, MatchesFiniteDifferences) {
  const auto d = dims_constants(5);
  const Point x = pt({0.3, -0.2, 0.1, 0.4, 0.7});
  Bubble b{0.6, pt({0, 0, 0, 0, 0.2})};
  const double h = 1e-6;
  Bubble bp = b, bm = b;
  bp.delta += h;
  bm.delta -= h;
  EXPECT_NEAR(eval_psi(d, b, 0, x), (eval_bubble(d, bp, x) - eval_bubble(d, bm, x)) / (2 * h), 1e-7);
  bp = b;
  bm = b;
  bp.xi(4) += h;
  bm.xi(4) -= h;
  EXPECT_NEAR(eval_psi(d, b, 5, x), (eval_bubble(d, bp, x) - eval_bubble(d, bm, x)) / (2 * h), 1e-7);
}

TEST(RegularPart, HalfSpaceAndBall) {
  const auto hs = half_space_kernel(4);
  EXPECT_NEAR(green_regular_part(hs, axis_point(4, 1), axis_point(4, 1)), 0.25, 1e-15);
  const auto ball = ball_kernel(4, 0.0, 1.0);
  EXPECT_NEAR(green_regular_part(ball, pt({0.3, 0.1, -0.2, 0.4}), Point::Zero(4)), 1.0, 1e-15);
}

TEST(RegularPart, GreenVanishesOnBoundary) {
  const auto ball = ball_kernel(4, 1.0, 1.0);
  const Point y = pt({0.1, 0.0, 0.2, 0.8});
  for (double th : {0.1, 1.0, 2.0, 3.0}) {
    const Point x = pt({std::sin(th), 0, 0, 1.0 + std::cos(th)});
    EXPECT_NEAR(green_function(ball, x, y), 0.0, 1e-12);
  }
  const auto hs = half_space_kernel(4);
  EXPECT_NEAR(green_function(hs, pt({0.5, 0.2, 0, 0}), y), 0.0, 1e-14);
}

TEST(RegularPart, GradientMatchesFiniteDifferences) {
  const auto hs = half_space_kernel(4);
  const Point x = axis_point(4, 1.0), xi = axis_point(4, 0.5);
  const Point g = grad_regular_part(hs, x, xi);
  for (int c = 0; c < 4; ++c) {
    const double h = 1e-5;
    Point xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    const double fd = (green_regular_part(hs, xp, xi) - green_regular_part(hs, xm, xi)) / (2 * h);
    EXPECT_NEAR(g(c), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Projection, HalfSpaceCentreValue) {
  const auto d = dims_constants(4);
  const auto hs = half_space_kernel(4);
  Bubble b{0.01, axis_point(4, 0.5)};
  const double expect = 2 * std::sqrt(2.0) * (100 - 0.01);
  EXPECT_NEAR(project_bubble(hs, d, b, b.xi), expect, 1e-10 * expect);
  EXPECT_NEAR(exact_project_bubble(hs, d, b, b.xi), expect, 1e-3 * expect);
}

TEST(Projection, ExactVanishesOnBoundary) {
  const auto d = dims_constants(4);
  const auto ball = ball_kernel(4, 1.0, 1.0);
  Bubble b{0.05, axis_point(4, 0.3)};
  for (double th : {0.0, 0.5, 1.5, 2.5, 3.14159}) {
    const Point x = pt({std::sin(th), 0, 0, 1.0 + std::cos(th)});
    EXPECT_NEAR(exact_project_bubble(ball, d, b, x), 0.0, 1e-12);
  }
  Bubble c{0.05, axis_point(4, 1.0)};  // at the centre
  EXPECT_NEAR(exact_project_bubble(ball, d, c, pt({0, 1, 0, 1})), 0.0, 1e-12);
}

TEST(Projection, BelowBubbleAtRandomPoints) {
  const auto d = dims_constants(4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& g : {half_space_kernel(4), ball_kernel(4, 1.0, 1.0)}) {
    Bubble b{0.1, axis_point(4, 0.4)};
    int tested = 0;
    while (tested < 1000) {
      Point x(4);
      for (int i = 0; i < 4; ++i) x(i) = u(rng);
      x(3) += 1.0;
      if (g.boundary_distance(x) <= 0) continue;
      ++tested;
      EXPECT_LE(project_bubble(g, d, b, x), eval_bubble(d, b, x));
      EXPECT_LE(exact_project_bubble(g, d, b, x), eval_bubble(d, b, x) * (1 + 1e-15));
    }
  }
}

TEST(Projection, SmallDeltaLimit) {
  const auto d = dims_constants(4);
  const auto hs = half_space_kernel(4);
  const Point x = pt({0.3, 0, 0, 0.6});
  const Point xi = axis_point(4, 0.4);
  const double lim = 1.0 - green_regular_part(hs, x, xi) * std::pow((x - xi).norm(), 2);
  Bubble b{1e-5, xi};
  EXPECT_NEAR(project_bubble(hs, d, b, x) / eval_bubble(d, b, x), lim, 1e-8);
}

TEST(Projection, ExactPsiMatchesDifferences) {
  const auto d = dims_constants(4);
  const auto ball = ball_kernel(4, 1.0, 1.0);
  const Point x = pt({0.2, 0.1, 0, 0.5});
  Bubble b{0.2, axis_point(4, 0.6)};
  const double h = 1e-6;
  Bubble bp = b, bm = b;
  bp.xi(3) += h;
  bm.xi(3) -= h;
  const double fd = (exact_project_bubble(ball, d, bp, x) - exact_project_bubble(ball, d, bm, x)) / (2 * h);
  EXPECT_NEAR(exact_project_psi(ball, d, b, 4, x), fd, 1e-6 * std::abs(fd));
}

TEST(Projection, ProfileDomainUnsupported) {
  GreenKernel g{DomainKind::Profile, 4, 0.0, 1.0};
  EXPECT_THROW(green_regular_part(g, axis_point(4, 1), axis_point(4, 0.5)), DomainError);
}

TEST(Weight, AffineAndProduct) {
  const auto w = WeightModel::affine(4, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(w.eval(axis_point(4, 0.5)), 2.0);
  EXPECT_DOUBLE_EQ(w.dnu_a(), 2.0);
  EXPECT_TRUE(w.axisymmetric());
  EXPECT_THROW(WeightModel::affine(4, 1.0, -1.0), DomainError);
  const auto p = WeightModel::product(5, {1, 2}, 1.0);
  EXPECT_FALSE(p.axisymmetric());
  EXPECT_DOUBLE_EQ(p.eval(pt({0, 0, 0, -1, 1})), 2.0 * 4.0);
  EXPECT_DOUBLE_EQ(p.dnu_a(), 2.0);
  EXPECT_THROW(WeightModel::product(4, {0}, 1.0), DomainError);
}

TEST(Lift, RotationInvariant) {
  LiftSpec spec{{1}, 5};
  EXPECT_EQ(spec.n(), 4);
  const auto d = dims_constants(4);
  Bubble b{0.3, axis_point(4, 0.5)};
  auto u = [&](const Point& x) { return eval_bubble(d, b, x); };
  // the last block (y1, y2) is rotated
  const Point Y = pt({0.2, -0.1, 0.3, 0.4, 0.5});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
  for (int i = 0; i < 5; ++i) {
    const double a = ang(rng);
    Point Z = Y;
    Z(3) = std::cos(a) * Y(3) - std::sin(a) * Y(4);
    Z(4) = std::sin(a) * Y(3) + std::cos(a) * Y(4);
    EXPECT_NEAR(lift_evaluate(u, spec, Y), lift_evaluate(u, spec, Z), 1e-12);
  }
  EXPECT_DOUBLE_EQ(lift_evaluate([](const Point&) { return 3.5; }, spec, Y), 3.5);
}

TEST(Lift, Validation) {
  EXPECT_THROW((LiftSpec{{2}, 5}).validate(), DimensionError);
  EXPECT_THROW((LiftSpec{{0}, 6}).validate(), DomainError);
}
