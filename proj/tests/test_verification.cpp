#include <gtest/gtest.h>

#include <cmath>

#include "towerlab/verification.hpp"

using namespace towerlab;

TEST(Checks, ConstantsAgree) {
  const auto rs = check_constants();
  EXPECT_FALSE(rs.empty());
  for (const auto& r : rs) EXPECT_TRUE(r.passed) << r.name << " " << r.measured;
}

TEST(Checks, KernelStencil) {
  for (const auto& r : check_kernel_residuals()) EXPECT_TRUE(r.passed) << r.name << " " << r.measured;
}

TEST(Checks, SandwichHalfSpaceAndBall) {
  for (const auto& g : {half_space_kernel(4), ball_kernel(4, 1.0, 1.0)}) {
    const auto r = check_analytic_sandwich(g, 4, 0.05, g.kind == DomainKind::Ball ? 0.3 : 0.2, 1, 500);
    EXPECT_TRUE(r.passed) << r.name << " violations " << r.measured;
  }
}

TEST(Checks, GridSandwich) {
  const auto r = check_grid_sandwich(DomainModel::slab(), 4, 48, 0.05, 0.2);
  EXPECT_TRUE(r.passed) << r.notes;
}

TEST(Checks, ProjectionRate) {
  const std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  const auto r = check_projection_h1_rate(half_space_kernel(4), 4, eps);
  EXPECT_TRUE(r.passed) << r.measured;
  EXPECT_NEAR(r.fit.slope, 0.5, 0.05);
}

TEST(Checks, ProjectionDifferenceShrinks) {
  const auto g = half_space_kernel(4);
  EXPECT_GT(projection_h1_difference(g, 4, 0.1, 0.5), projection_h1_difference(g, 4, 0.01, 0.5));
}

TEST(Checks, ReducedEnergy) {
  for (const auto& r : check_reduced_energy(12345)) EXPECT_TRUE(r.passed) << r.name << " " << r.measured;
}

TEST(Checks, SaddleInertiaFlag) {
  CriticalPoint cp;
  cp.config = TowerConfig::default_init(2);
  cp.hessian_inertia = {3, 1, 0};
  EXPECT_TRUE(check_saddle_inertia(cp).passed);
  cp.hessian_inertia = {4, 0, 0};
  EXPECT_FALSE(check_saddle_inertia(cp).passed);
}

TEST(Checks, CorrectionNormMonotone) {
  std::vector<TowerSolution> sols(3);
  const double eps[3] = {1e-1, 1e-2, 1e-3};
  for (int i = 0; i < 3; ++i) {
    sols[i].epsilon = eps[i];
    sols[i].newton.correction_norm = std::pow(eps[i], 0.8);
  }
  EXPECT_TRUE(check_correction_norm(sols, "x").passed);
  sols[2].newton.correction_norm = 1.0;
  EXPECT_FALSE(check_correction_norm(sols, "x").passed);
}

TEST(Checks, ReportHelpers) {
  EXPECT_TRUE(detail::relative_check("a", 2.0, 2.1, 0.1).passed);
  EXPECT_FALSE(detail::relative_check("a", 2.0, 2.3, 0.1).passed);
  EXPECT_TRUE(detail::absolute_check("b", 0.5, 0.54, 0.05).passed);
  EXPECT_FALSE(detail::lower_bound_check("c", 1.0, 0.9, 0.0).passed);
  std::vector<CheckReport> rs{detail::flag_check("x", true, 1.0), detail::flag_check("y", false, 0.0)};
  EXPECT_FALSE(all_passed(rs));
  rs.pop_back();
  EXPECT_TRUE(all_passed(rs));
}

TEST(Rates, WobbleAroundFiveSixths) {
  std::vector<std::pair<double, double>> pts;
  for (double e : {1e-1, 5.6e-2, 3.2e-2, 1.8e-2, 1e-2, 5.6e-3, 3.2e-3, 1.8e-3, 1e-3})
    pts.emplace_back(e, 3 * std::pow(e, 5.0 / 6) * (1 + 0.05 * std::sin(7 * std::log(e))));
  EXPECT_NEAR(rate_regression(pts).slope, 5.0 / 6, 0.1);
}
