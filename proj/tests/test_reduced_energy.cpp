#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "towerlab/reduced_energy.hpp"
#include "towerlab/regression.hpp"

using namespace towerlab;

constexpr double kPi = std::numbers::pi;

namespace {
WeightModel unit_affine(int n) { return WeightModel::affine(n, 1.0, 1.0); }

TowerConfig cfg1(double t, double d1) {
  TowerConfig c;
  c.k = 1;
  c.t = t;
  c.d = {d1};
  return c;
}
}  // namespace

TEST(Constants, FourDimensional) {
  const auto ec = expansion_constants(4, 1);
  EXPECT_NEAR(ec.a1, 32 * kPi * kPi / 3, 1e-10);
  EXPECT_NEAR(ec.a2, 32 * kPi * kPi, 1e-10);
  EXPECT_NEAR(ec.c4, 8 * kPi * kPi / 3, 1e-10);
  EXPECT_NEAR(ec.c7, 8 * kPi * kPi / 3, 1e-10);
  EXPECT_NEAR(ec.c5, 16 * kPi * kPi, 1e-10);
  EXPECT_NEAR(ec.c6, 32 * kPi * kPi, 1e-10);
  EXPECT_NEAR(ec.c1, 8 * kPi * kPi / 3, 1e-10);
}

TEST(Phi, KnownValueAndEvenness) {
  const auto ec = expansion_constants(4, 1);
  EXPECT_NEAR(phi(cfg1(1.0, 1.0), unit_affine(4), ec), 8 * kPi * kPi / 3 + 4 * kPi * kPi, 1e-10);
  const auto ec2 = expansion_constants(4, 2);
  TowerConfig c = TowerConfig::default_init(2);
  c.s = {0.3};
  const double a = phi(c, unit_affine(4), ec2);
  c.s = {-0.3};
  EXPECT_NEAR(phi(c, unit_affine(4), ec2), a, 1e-14);
}

TEST(Phi, RejectsOutsideLambda) {
  const auto ec = expansion_constants(4, 1);
  EXPECT_THROW(phi(cfg1(1.0, -0.1), unit_affine(4), ec), DomainError);
  EXPECT_THROW(phi(cfg1(0.0, 0.5), unit_affine(4), ec), DomainError);
}

TEST(GradPhi, ZeroInS) {
  const auto ec = expansion_constants(4, 2);
  const Eigen::VectorXd g = grad_phi(TowerConfig::default_init(2), unit_affine(4), ec);
  EXPECT_DOUBLE_EQ(g(3), 0.0);
}

TEST(GradPhi, FiniteDifferencesAtRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  for (int k : {1, 2, 3}) {
    const auto ec = expansion_constants(4, k);
    for (int trial = 0; trial < 20; ++trial) {
      TowerConfig c = TowerConfig::default_init(k);
      c.t = u(rng);
      for (auto& v : c.d) v = u(rng);
      for (auto& v : c.s) v = u(rng) - 0.7;
      const Eigen::VectorXd g = grad_phi(c, unit_affine(4), ec);
      const Eigen::VectorXd x = c.pack();
      Eigen::VectorXd fd(x.size());
      for (int j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        fd(j) = (phi(TowerConfig::unpack(xp), unit_affine(4), ec) - phi(TowerConfig::unpack(xm), unit_affine(4), ec)) /
                (2 * h);
      }
      EXPECT_LT((g - fd).norm() / g.norm(), 1e-6);
    }
  }
}

TEST(CriticalPoint, ClosedFormForOneBubble) {
  const auto cp = find_critical_point(4, 1, unit_affine(4), TowerConfig::default_init(1));
  EXPECT_NEAR(cp.config.t, 1.0, 1e-8);
  EXPECT_NEAR(cp.config.d[0], 1.0 / std::sqrt(3.0), 1e-8);
  EXPECT_EQ(cp.hessian_inertia.positive, 2);
  EXPECT_EQ(cp.hessian_inertia.negative, 0);
  EXPECT_TRUE(cp.minmax);
}

TEST(CriticalPoint, TwoBubbleSaddle) {
  const auto cp = find_critical_point(4, 2, unit_affine(4), TowerConfig::default_init(2));
  EXPECT_EQ(cp.hessian_inertia.positive, 3);
  EXPECT_EQ(cp.hessian_inertia.negative, 1);
  EXPECT_EQ(cp.hessian_inertia.zero, 0);
  EXPECT_NEAR(cp.config.s[0], 0.0, 1e-10);
  EXPECT_LT(cp.gradient_norm, 1e-10);
  // minimum over (t, d) on the s = 0 slice, maximum in s
  const auto ec = expansion_constants(4, 2);
  const double f0 = cp.phi_value;
  for (int j = 0; j < 3; ++j)
    for (double h : {-1e-3, 1e-3}) {
      Eigen::VectorXd x = cp.config.pack();
      x(j) += h;
      EXPECT_GT(phi(TowerConfig::unpack(x), unit_affine(4), ec), f0);
    }
  for (double h : {-1e-2, 1e-2}) {
    Eigen::VectorXd x = cp.config.pack();
    x(3) += h;
    EXPECT_LT(phi(TowerConfig::unpack(x), unit_affine(4), ec), f0);
  }
}

TEST(CriticalPoint, ThreeBubblesInFiveDimensions) {
  const auto cp = find_critical_point(5, 3, unit_affine(5), TowerConfig::default_init(3));
  EXPECT_EQ(cp.hessian_inertia.positive, 4);
  EXPECT_EQ(cp.hessian_inertia.negative, 2);
}

TEST(CriticalPoint, RejectsBadInitialGuess) {
  TowerConfig c = TowerConfig::default_init(1);
  c.d = {-1.0};
  EXPECT_THROW(find_critical_point(4, 1, unit_affine(4), c), DomainError);
}

TEST(Expansion, LeadingTermAndLogCoefficient) {
  const auto ec = expansion_constants(4, 1);
  const auto c = cfg1(1.0, 0.5);
  const auto w = unit_affine(4);
  EXPECT_NEAR(expansion_rhs(1e-12, c, w, ec), 8 * kPi * kPi / 3, 1e-8);
  const double e = 1e-9;
  const double rest = expansion_rhs(e, c, w, ec) - ec.c1 - ec.c2 * e - e * phi(c, w, ec);
  EXPECT_NEAR(rest / (e * std::log(1 / e)), ec.c3, 1e-6 * ec.c3);
}

TEST(Inertia, DenseEigenvalues) {
  Eigen::MatrixXd H(3, 3);
  H << 2, 0, 0, 0, -1, 0, 0, 0, 0;
  const auto in = inertia_of(H);
  EXPECT_EQ(in.positive, 1);
  EXPECT_EQ(in.negative, 1);
  EXPECT_EQ(in.zero, 1);
}

TEST(Regression, ExactPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (double e : {1e-1, 1e-2, 1e-3, 1e-4}) pts.emplace_back(e, 7 * std::pow(e, 1.5));
  const auto f = rate_regression(pts);
  EXPECT_NEAR(f.slope, 1.5, 1e-12);
  EXPECT_NEAR(f.intercept, 7.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Regression, ConstantsAndWobble) {
  std::vector<std::pair<double, double>> c{{1e-1, 2.0}, {1e-2, 2.0}, {1e-3, 2.0}};
  EXPECT_NEAR(rate_regression(c).slope, 0.0, 1e-14);
  std::vector<std::pair<double, double>> w;
  for (int i = 0; i <= 20; ++i) {
    const double e = std::pow(10.0, -1.0 - 2.0 * i / 20);
    w.emplace_back(e, std::pow(e, 5.0 / 6) * (1 + 0.1 * std::sin(std::log(e))));
  }
  EXPECT_NEAR(rate_regression(w).slope, 5.0 / 6, 0.1);
}

TEST(Regression, Errors) {
  EXPECT_THROW(rate_regression({{0.1, 1.0}, {0.01, 2.0}}), DomainError);
  EXPECT_THROW(rate_regression({{0.1, 1.0}, {0.01, 0.0}, {0.001, 2.0}}), DomainError);
}
