#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "towerlab/pde_lab.hpp"

using namespace towerlab;

namespace {

std::shared_ptr<const AxisymGrid> uniform_slab(int res) {
  return std::make_shared<const AxisymGrid>(build_grid(DomainModel::slab(), 4, res));
}

TowerConfig crit1() {
  TowerConfig c;
  c.k = 1;
  c.t = 1.0;
  c.d = {1.0 / std::sqrt(3.0)};
  return c;
}

TowerConfig crit2() {
  TowerConfig c = TowerConfig::default_init(2);
  c.t = 1.0;
  c.d = {0.816497, 0.068041};
  return c;
}

}  // namespace

TEST(Grid, UniformSlab) {
  const auto g = build_grid(DomainModel::slab(), 4, 64);
  EXPECT_EQ(g.nr(), 65u);
  EXPECT_EQ(g.nz(), 65u);
  for (std::size_t j = 1; j < g.nr(); ++j) EXPECT_NEAR(g.r[j] - g.r[j - 1], 1.0 / 64, 1e-14);
  EXPECT_TRUE(g.is_boundary(g.node(3, 0)));
  EXPECT_TRUE(g.is_boundary(g.node(64, 10)));
  EXPECT_FALSE(g.is_boundary(g.node(0, 10)));  // the axis is not a boundary
  // volume of {|x'| < 1, 0 < x_4 < 1} in R^4
  EXPECT_NEAR(g.total_measure(), 4.0 * std::numbers::pi / 3.0, 1e-10);
}

TEST(Grid, BallMeasure) {
  const auto g = build_grid(DomainModel::ball(1.0, 1.0), 4, 64);
  EXPECT_NEAR(g.total_measure(), std::numbers::pi * std::numbers::pi / 2, 1e-6);
}

TEST(Grid, GradedSpacing) {
  const auto g = build_grid(DomainModel::slab(), 4, 64, Grading{1e-4, 0.1});
  EXPECT_NEAR(g.r[1] - g.r[0], 1e-4, 1e-10);
  double hmin = 1;
  for (std::size_t l = 1; l < g.nz(); ++l) hmin = std::min(hmin, g.z[l] - g.z[l - 1]);
  EXPECT_NEAR(hmin, 1e-4, 1e-9);
  EXPECT_NEAR(g.z.back(), 1.0, 1e-14);
}

TEST(Grid, Validation) {
  EXPECT_THROW(build_grid(DomainModel::slab(), 3, 64), DimensionError);
  EXPECT_THROW(build_grid(DomainModel::slab(), 4, 8), DomainError);
}

TEST(Problem, Validation) {
  auto g = uniform_slab(16);
  EXPECT_THROW(DiscreteProblem(g, WeightModel::affine(4, 1, 1), 2.5), DomainError);
  EXPECT_THROW(DiscreteProblem(g, WeightModel::product(4, {1, 2}, 1.0), 0.1), DomainError);
}

TEST(Istar, ZeroAndLinear) {
  auto g = uniform_slab(32);
  DiscreteProblem prob(g, WeightModel::affine(4, 1, 1), 0.0);
  const Field z = solve_istar(prob, zero_field(*g));
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  Field f1 = zero_field(*g), f2 = zero_field(*g), f3 = zero_field(*g);
  for (std::size_t id = 0; id < g->node_count(); ++id) {
    f1.values[id] = std::sin(3 * g->r_of(int(id))) + g->z_of(int(id));
    f2.values[id] = std::cos(2 * g->z_of(int(id)));
    f3.values[id] = 2 * f1.values[id] - 3 * f2.values[id];
  }
  const Field u1 = solve_istar(prob, f1), u2 = solve_istar(prob, f2), u3 = solve_istar(prob, f3);
  for (std::size_t i = 0; i < u3.values.size(); ++i)
    EXPECT_NEAR(u3.values[i], 2 * u1.values[i] - 3 * u2.values[i], 1e-12);
}

TEST(Istar, ConstantSourceConverges) {
  // -div(a grad u) = a with a = 1 + z: the discrete solution is second order accurate
  std::vector<double> centre;
  for (int res : {32, 64}) {
    auto g = uniform_slab(res);
    DiscreteProblem prob(g, WeightModel::affine(4, 1, 1), 0.0);
    Field one = zero_field(*g);
    for (double& v : one.values) v = 1.0;
    const Field u = solve_istar(prob, one);
    centre.push_back(u.values[g->node(0, res / 2)]);
  }
  EXPECT_GT(centre[0], 0.0);
  EXPECT_NEAR(centre[0], centre[1], 1e-2 * centre[1]);
}

TEST(Newton, LinearProblemOneStep) {
  auto g = uniform_slab(32);
  DiscreteProblem prob(g, WeightModel::affine(4, 1, 1), 0.0, true);
  prob.set_forcing(std::vector<double>(g->node_count(), 1.0));
  const NewtonResult r = newton_solve(prob, zero_field(*g));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  const NewtonResult again = newton_solve(prob, r.u);
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.iterations, 0);
}

TEST(Newton, RejectsNonFinite) {
  auto g = uniform_slab(16);
  DiscreteProblem prob(g, WeightModel::affine(4, 1, 1), 0.1);
  Field u = zero_field(*g);
  u.values[g->node(0, 5)] = std::nan("");
  EXPECT_THROW(newton_solve(prob, u), Error);
}

TEST(Ansatz, CloseToBubbleNearCentre) {
  const double eps = 0.05;
  const TowerConfig c = crit1();
  const TowerGeometry geo = tower_geometry(c, 4, eps);
  TowerTemplate tt;
  tt.resolution = 64;
  auto g = tower_grid(tt, geo);
  DiscreteProblem prob(g, tt.weight, eps);
  const Field V = assemble_ansatz(prob, c);
  const SpaceDims d = dims_constants(4);
  const double delta = geo.delta[0], xi = geo.xi[0];
  // nearest axis node to the centre
  std::size_t best = 0;
  for (std::size_t l = 0; l < g->nz(); ++l)
    if (std::abs(g->z[l] - xi) < std::abs(g->z[best] - xi)) best = l;
  const double z = g->z[best];
  const double U = d.alpha * delta / (delta * delta + (z - xi) * (z - xi));
  EXPECT_NEAR(V.values[g->node(0, best)] / U, 1.0, 0.05);
}

TEST(Ansatz, TwoLevelsChangeSignOnce) {
  const double eps = 0.05;
  const TowerConfig c = crit2();
  const TowerGeometry geo = tower_geometry(c, 4, eps);
  TowerTemplate tt;
  tt.resolution = 64;
  auto g = tower_grid(tt, geo);
  DiscreteProblem prob(g, tt.weight, eps);
  const Field V = assemble_ansatz(prob, c);
  const auto prof = axis_profile(*g, V, geo.xi.back());
  EXPECT_EQ(count_sign_changes(prof), 1);
  const auto M = level_extrema(prof, 2);
  EXPECT_LT(M[0], M[1]);
}

TEST(Kernel, ProjectionOfBasisVectors) {
  const double eps = 0.05;
  const TowerConfig c = crit2();
  TowerTemplate tt;
  tt.resolution = 48;
  auto g = tower_grid(tt, tower_geometry(c, 4, eps));
  DiscreteProblem prob(g, tt.weight, eps);
  const Ansatz V = make_ansatz(prob, c);
  const KernelSubspace ks = kernel_subspace(prob, V);
  ASSERT_EQ(ks.basis.cols(), 4);
  for (int j = 0; j < 4; ++j) {
    const KernelProjection kp = kernel_projection(prob, ks, Vec(ks.basis.col(j)));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(kp.coefficients(i), i == j ? 1.0 : 0.0, 1e-8);
    EXPECT_LT(kp.orthogonal_norm, 1e-6 * std::sqrt(ks.gram(j, j)));
  }
  Vec ones = Vec::Ones(g->unknowns());
  const KernelProjection kp = kernel_projection(prob, ks, ones);
  EXPECT_LT((ks.K_basis.transpose() * kp.orthogonal).norm(), 1e-8 * (ks.K_basis.transpose() * ones).norm());
}

TEST(Kernel, GramScalesLikeInverseDeltaSquared) {
  std::vector<std::pair<double, double>> pts;
  const TowerConfig c = crit1();
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    TowerTemplate tt;
    tt.resolution = 64;
    const TowerGeometry geo = tower_geometry(c, 4, eps);
    auto g = tower_grid(tt, geo);
    DiscreteProblem prob(g, tt.weight, eps);
    const KernelSubspace ks = kernel_subspace(prob, make_ansatz(prob, c));
    pts.emplace_back(geo.delta[0], ks.gram(0, 0));
  }
  EXPECT_NEAR(rate_regression(pts).slope, -2.0, 0.1);
}

TEST(Axis, ExtremaOrderAndStructureLost) {
  std::vector<std::pair<double, double>> prof{{0.1, 5.0}, {0.2, 9.0}, {0.3, -1.0}, {0.4, -2.0}, {0.5, -0.5}};
  EXPECT_EQ(count_sign_changes(prof), 1);
  const auto M = level_extrema(prof, 2);
  EXPECT_DOUBLE_EQ(M[0], 2.0);
  EXPECT_DOUBLE_EQ(M[1], 9.0);
  EXPECT_THROW(level_extrema({{0.1, 1.0}, {0.2, 2.0}}, 2), StructureLost);
}

TEST(Fit, SyntheticConcentration) {
  const SpaceDims d = dims_constants(4);
  std::vector<TowerSolution> sols;
  for (double eps : {1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3}) {
    TowerSolution s;
    s.epsilon = eps;
    const double d1 = 0.7 * std::pow(eps, 1.5), d2 = 0.05 * std::pow(eps, 2.5);
    s.extrema = {d.alpha / d1, d.alpha / d2};
    sols.push_back(s);
  }
  const auto fits = fit_concentration(sols, 4, 2);
  EXPECT_NEAR(fits[0].fit.slope, 1.5, 1e-12);
  EXPECT_NEAR(fits[1].fit.slope, 2.5, 1e-12);
  EXPECT_NEAR(fits[0].fit.intercept, 0.7, 1e-12);
  sols.resize(3);
  EXPECT_THROW(fit_concentration(sols, 4, 2), DomainError);
}

TEST(Tower, SingleBubbleAtCoarseResolution) {
  TowerTemplate tt;
  tt.resolution = 64;
  const TowerSolution s = solve_tower(tt, crit1(), 0.05);
  EXPECT_TRUE(s.newton.converged);
  EXPECT_EQ(s.sign_changes, 0);
  EXPECT_LT(s.newton.residual_norm, 1e-9);
  ASSERT_EQ(s.extrema.size(), 1u);
  // the peak sits near the ansatz peak
  const double M_ansatz = dims_constants(4).alpha / s.geometry.delta[0];
  EXPECT_NEAR(s.extrema[0] / M_ansatz, 1.0, 0.3);
}

TEST(Tower, ScheduleMustDecrease) {
  TowerTemplate tt;
  EXPECT_THROW(continue_in_epsilon(tt, crit1(), {0.01, 0.02}), DomainError);
}
