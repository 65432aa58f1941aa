#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "towerlab/quadrature.hpp"
#include "towerlab/reduced_energy.hpp"
#include "towerlab/regression.hpp"

using namespace towerlab;

constexpr double kPi = std::numbers::pi;

TEST(Radial, Antiderivatives) {
  EXPECT_NEAR(integrate_radial([](double r) { return r * r * r / std::pow(1 + r * r, 4); }).value, 1.0 / 12, 1e-10);
  EXPECT_NEAR(integrate_radial([](double r) { return r * r * r / std::pow(1 + r * r, 3); }).value, 0.25, 1e-9);
  EXPECT_NEAR(integrate_radial([](double) { return 1.0; }, 1.0).value, 1.0, 1e-15);
}

TEST(Radial, BudgetExceeded) {
  QuadOptions o;
  o.max_intervals = 3;
  o.rel_tol = 1e-14;
  o.abs_tol = 0;
  EXPECT_THROW(integrate_radial([](double r) { return std::sin(50 * r) * std::sqrt(r); }, 10.0, o), BudgetExceeded);
}

TEST(Axisym, BallVolume) {
  const auto res = integrate_axisym([](double, double) { return 1.0; }, AxisRegion::ball(0.0, 1.0), 4, 0.0);
  EXPECT_NEAR(res.value, kPi * kPi / 2, 1e-9);
  const auto off = integrate_axisym([](double, double) { return 1.0; }, AxisRegion::ball(1.0, 1.0), 4, 0.2);
  EXPECT_NEAR(off.value, kPi * kPi / 2, 1e-8);
}

TEST(Axisym, BubbleEnergyFullSpace) {
  const auto d = dims_constants(4);
  auto f = [&](double r, double z) { return std::pow(1 + r * r + z * z, -4.0); };
  QuadOptions o;
  o.scales = {1.0};
  EXPECT_NEAR(integrate_axisym(f, AxisRegion::full_space(), 4, 0.0, o).value, kPi * kPi / 6, 1e-8);
  (void)d;
}

TEST(Axisym, ConcentratedBubbleInBall) {
  // U^{p+1} with delta = 0.01 at depth 0.5 in the ball: tail mass is O(delta^n)
  const auto d = dims_constants(4);
  const double dl = 0.01, xi = 0.5;
  auto f = [&](double r, double z) {
    const double U = d.alpha * dl * std::pow(dl * dl + r * r + (z - xi) * (z - xi), -1.0);
    return std::pow(U, 4);
  };
  QuadOptions o;
  o.scales = {dl};
  o.rel_tol = 1e-10;
  const double full = std::pow(d.alpha, 4) * kPi * kPi / 6;
  const double in_ball = integrate_axisym(f, AxisRegion::ball(1.0, 1.0), 4, xi, o).value;
  EXPECT_NEAR(in_ball / full, 1.0, 1e-4);
}

TEST(Annulus, VolumeAndAdditivity) {
  AnnulusPartition part;
  part.center_z = 0.0;
  part.radii = {0.2, 0.1, 0.0};
  QuadOptions o;
  o.rel_tol = 1e-11;
  const auto v = integrate_annulus([](double, double) { return 1.0; }, part, 1, 4, o);
  EXPECT_NEAR(v.value, kPi * kPi / 2 * (std::pow(0.2, 4) - std::pow(0.1, 4)), 1e-12);
  EXPECT_THROW(integrate_annulus([](double, double) { return 1.0; }, part, 3, 4, o), IndexError);

  const auto d = dims_constants(4);
  const double eps = 0.01;
  const std::vector<double> deltas{0.577 * std::pow(eps, 1.5), 0.068 * std::pow(eps, 2.5)};
  const auto P = AnnulusPartition::from_tower(eps, 0.1, deltas, 0.0);
  auto U2 = [&](double r, double z) {
    return std::pow(d.alpha * deltas[1] * std::pow(deltas[1] * deltas[1] + r * r + z * z, -1.0), 4);
  };
  double sum = 0;
  for (int l = 1; l <= 2; ++l) sum += integrate_annulus(U2, P, l, 4, o).value;
  QuadOptions oext = o;
  oext.scales = {deltas[1]};
  const double inner_ball = integrate_axisym(U2, AxisRegion::ball(0.0, P.radii[0]), 4, 0.0, oext).value;
  EXPECT_NEAR(sum, inner_ball, 1e-8 * inner_ball);
}

TEST(Annulus, InteractionScalesLikeEps) {
  const auto d = dims_constants(4);
  std::vector<std::pair<double, double>> pts;
  QuadOptions o;
  o.rel_tol = 1e-8;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const std::vector<double> dl{0.8 * std::pow(eps, 1.5), 0.07 * std::pow(eps, 2.5)};
    const auto P = AnnulusPartition::from_tower(eps, 0.1, dl, 0.0);
    auto f = [&](double r, double z) {
      const double q = r * r + z * z;
      const double U1 = d.alpha * dl[0] / (dl[0] * dl[0] + q);
      const double U2 = d.alpha * dl[1] / (dl[1] * dl[1] + q);
      return std::pow(U1, 3) * U2;
    };
    pts.emplace_back(eps, integrate_annulus(f, P, 1, 4, o).value);
  }
  EXPECT_GE(rate_regression(pts).slope, 0.9);
}

TEST(MonteCarlo, UnitBoxAndMean) {
  const auto one = mc_integrate_nd([](const Point&) { return 1.0; }, Box{{0, 0, 0, 0}, {1, 1, 1, 1}}, 100, 1);
  EXPECT_DOUBLE_EQ(one.value, 1.0);
  EXPECT_DOUBLE_EQ(one.error_estimate, 0.0);
  const auto x1 = mc_integrate_nd([](const Point& x) { return x(0); }, Box{{0, 0, 0, 0}, {1, 1, 1, 1}}, 1000000, 2);
  EXPECT_NEAR(x1.value, 0.5, 3 * x1.error_estimate);
}

TEST(MonteCarlo, BubbleIntegralMinusTail) {
  const auto res = mc_integrate_nd([](const Point& y) { return std::pow(1 + y.squaredNorm(), -4.0); },
                                   Box{{-8, -8, -8, -8}, {8, 8, 8, 8}}, 400000, 7);
  // tail outside the box is below the tail outside the inscribed ball of radius 8
  const double tail = 2 * kPi * kPi *
                      integrate_radial([](double r) { return r < 8 ? 0.0 : std::pow(r, 3) * std::pow(1 + r * r, -4.0); })
                          .value;
  EXPECT_NEAR(res.value, kPi * kPi / 6 - 0.5 * tail, 3 * res.error_estimate + tail);
}

TEST(MonteCarlo, Deterministic) {
  auto f = [](const Point& x) { return std::exp(x(0) * x(1)); };
  const auto a = mc_integrate_nd(f, Box{{0, 0}, {1, 1}}, 5000, 99);
  const auto b = mc_integrate_nd(f, Box{{0, 0}, {1, 1}}, 5000, 99);
  EXPECT_EQ(a.value, b.value);
}

TEST(GaussLegendre, ExactForPolynomials) {
  std::vector<double> x, w;
  gauss_legendre(10, x, w);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], 18);
  EXPECT_NEAR(s, 2.0 / 19, 1e-14);
}

TEST(PolarPlan, BallVolume) {
  const AxisRegion reg = AxisRegion::ball(1.0, 1.0);
  const PolarPlan plan = make_polar_plan(4, 0.01, reg.boundary_gap(0.01), 1e-6, reg.rho_max(0.01), 60, 40, 20);
  EXPECT_NEAR(integrate_polar(plan, reg, 4, [](double, double) { return 1.0; }), kPi * kPi / 2, 1e-7);
}

TEST(Fcoef, ClosedFormAgreesWithQuadrature) {
  const auto d = dims_constants(4);
  for (double s : {0.0, 0.5, 1.0, 2.0}) {
    QuadOptions o;
    o.rel_tol = 1e-10;
    o.abs_tol = 0;
    EXPECT_NEAR(F_by_quadrature(d, s, o).value / F_closed_form(d, s), 1.0, 1e-6) << "s=" << s;
  }
}
