#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/ansatz.hpp"
#include "towerlab/pde_lab.hpp"
#include "towerlab/quadrature.hpp"
#include "towerlab/reduced_energy.hpp"
#include "towerlab/regression.hpp"

namespace towerlab {

struct CheckReport {
  std::string name;
  double expected = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string notes;
  RateFit fit;  ///< filled for rate checks
};

namespace detail {

inline CheckReport relative_check(std::string name, double expected, double measured, double tol,
                                  std::string notes = {}) {
  CheckReport r{std::move(name), expected, measured, tol, false, std::move(notes), {}};
  r.passed = std::isfinite(measured) && std::abs(measured - expected) <= tol * std::abs(expected);
  return r;
}

inline CheckReport absolute_check(std::string name, double expected, double measured, double tol,
                                  std::string notes = {}) {
  CheckReport r{std::move(name), expected, measured, tol, false, std::move(notes), {}};
  r.passed = std::isfinite(measured) && std::abs(measured - expected) <= tol;
  return r;
}

/// measured >= expected - tol
inline CheckReport lower_bound_check(std::string name, double expected, double measured, double tol,
                                     std::string notes = {}) {
  CheckReport r{std::move(name), expected, measured, tol, false, std::move(notes), {}};
  r.passed = std::isfinite(measured) && measured >= expected - tol;
  return r;
}

inline CheckReport flag_check(std::string name, bool ok, double measured, std::string notes = {}) {
  return CheckReport{std::move(name), 1.0, measured, 0.0, ok, std::move(notes), {}};
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline bool all_passed(const std::vector<CheckReport>& rs) {
  for (const auto& r : rs)
    if (!r.passed) return false;
  return !rs.empty();
}

// ---------------------------------------------------------------------------------------------
// constants

inline std::vector<CheckReport> check_constants(const std::vector<int>& dims = {4, 5, 6},
                                                double tol = 1e-8, double tol_F = 1e-6) {
  std::vector<CheckReport> out;
  QuadOptions opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 0.0;
  for (int n : dims) {
    const SpaceDims d = dims_constants(n);
    const ExpansionConstants ec = expansion_constants(n, 1);
    const double ap = std::pow(d.alpha, d.p + 1);
    auto i1 = integrate_radial([&](double r) { return std::pow(r, n - 1) * std::pow(1 + r * r, -double(n)); },
                               INFINITY, opt);
    auto i2 = integrate_radial(
        [&](double r) { return std::pow(r, n - 1) * std::pow(1 + r * r, -0.5 * (n + 2)); }, INFINITY, opt);
    out.push_back(detail::relative_check("a1_n" + std::to_string(n), ec.a1, ap * d.sphere_area * i1.value, tol));
    out.push_back(detail::relative_check("a2_n" + std::to_string(n), ec.a2, ap * d.sphere_area * i2.value, tol));
  }
  const SpaceDims d4 = dims_constants(4);
  for (double s : {0.0, 0.5, 1.0, 2.0}) {
    QuadOptions o;
    o.rel_tol = 1e-10;
    o.abs_tol = 0.0;
    out.push_back(detail::relative_check("F_s" + detail::fmt(s), F_closed_form(d4, s),
                                         F_by_quadrature(d4, s, o).value, tol_F));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// kernel residuals by a (2n+1)-point Cartesian stencil

namespace detail {

inline double stencil_laplacian(const std::function<double(const Point&)>& f, const Point& x, double h) {
  double s = -2.0 * x.size() * f(x);
  for (int c = 0; c < x.size(); ++c) {
    Point y = x;
    y(c) += h;
    s += f(y);
    y(c) -= 2 * h;
    s += f(y);
  }
  return s / (h * h);
}

}  // namespace detail

/// Max residual of -Lap U = U^p and -Lap psi = p U^{p-1} psi over sample points, for
/// stencil widths h0, h0/2, h0/4; passes if successive ratios lie in [lo, hi].
inline std::vector<CheckReport> check_kernel_residuals(int n = 4, double h0 = 0.08, double lo = 3.7,
                                                       double hi = 4.3) {
  const SpaceDims d = dims_constants(n);
  Bubble b{0.7, Point::Zero(n)};
  b.xi(n - 1) = 0.3;
  std::vector<Point> pts;
  for (int i = 0; i < 6; ++i) {
    Point x = Point::Zero(n);
    for (int c = 0; c < n; ++c) x(c) = 0.25 * std::cos(1.3 * (i + 1) * (c + 1)) * (1 + 0.5 * i);
    pts.push_back(x);
  }
  std::vector<CheckReport> out;
  auto run = [&](const std::string& name, const std::function<double(const Point&)>& f,
                 const std::function<double(const Point&)>& rhs) {
    std::vector<double> res;
    for (int lvl = 0; lvl < 3; ++lvl) {
      const double h = h0 / std::pow(2.0, lvl);
      double mx = 0;
      for (const auto& x : pts) mx = std::max(mx, std::abs(-detail::stencil_laplacian(f, x, h) - rhs(x)));
      res.push_back(mx);
    }
    for (int lvl = 0; lvl + 1 < 3; ++lvl) {
      const double ratio = res[lvl] / res[lvl + 1];
      CheckReport r{name + "_ratio" + std::to_string(lvl + 1), 4.0, ratio, 0.5 * (hi - lo),
                    ratio >= lo && ratio <= hi,
                    "residual " + detail::fmt(res[lvl]) + " -> " + detail::fmt(res[lvl + 1]), {}};
      out.push_back(r);
    }
  };
  auto U = [&](const Point& x) { return eval_bubble(d, b, x); };
  run("bubble_eq", U, [&](const Point& x) { return std::pow(U(x), d.p); });
  for (int j : {0, n}) {
    auto psi = [&, j](const Point& x) { return eval_psi(d, b, j, x); };
    run("psi" + std::to_string(j) + "_eq", psi,
        [&, j](const Point& x) { return d.p * std::pow(U(x), d.p - 1) * eval_psi(d, b, j, x); });
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// projection bounds

/// 0 <= U - PU <= alpha delta^m H on a grid (discrete projection, k = 1) with slack
/// (h_loc / dist)^2 alpha delta^m H, dist the distance to the image point.
inline CheckReport check_grid_sandwich(const DomainModel& dom, int n, int resolution, double delta,
                                       double xi) {
  const SpaceDims d = dims_constants(n);
  const GreenKernel gk = dom.kernel(n);
  auto grid = std::make_shared<const AxisymGrid>(build_grid(dom, n, resolution, Grading{delta / 4, xi}));
  // eps t = xi and delta_1 = delta through the tower scalings
  const double eps = xi;
  DiscreteProblem prob(grid, WeightModel::affine(n, 1.0, 1.0), eps);
  TowerConfig cfg;
  cfg.k = 1;
  cfg.t = 1.0;
  cfg.d = {1.0};
  cfg.d[0] = delta / std::pow(eps, concentration_exponent(n, 1));
  std::vector<Field> pus;
  assemble_ansatz(prob, cfg, &pus);
  const Point xi_pt = [&] {
    Point p = Point::Zero(n);
    p(n - 1) = xi;
    return p;
  }();
  const Point img = gk.image_point(xi_pt);
  int violations = 0;
  double worst = 0.0;
  const auto& g = *grid;
  for (std::size_t j = 0; j < g.nr(); ++j)
    for (std::size_t l = 0; l < g.nz(); ++l) {
      const int id = g.node(j, l);
      if (dom.kind == DomainModel::Kind::Ball && g.dof[id] < 0 &&
          std::hypot(g.r[j], g.z[l] - dom.center_z) > dom.radius * (1 + 1e-12))
        continue;  // nodes outside the ball carry no data
      Point x = Point::Zero(n);
      x(0) = g.r[j];
      x(n - 1) = g.z[l];
      const double U = axis_bubble<double>(d, delta, xi, g.r[j], g.z[l]);
      const double diff = U - pus[0].values[id];
      const double bound = d.alpha * std::pow(delta, d.m()) * green_regular_part(gk, x, xi_pt);
      const double hl = std::max(g.r[std::min(j + 1, g.nr() - 1)] - g.r[j > 0 ? j - 1 : 0],
                                 g.z[std::min(l + 1, g.nz() - 1)] - g.z[l > 0 ? l - 1 : 0]);
      const double dist = (x - img).norm();
      const double slack = (hl / dist) * (hl / dist) * bound + 1e-12 * bound;
      const double excess = std::max(-diff, diff - bound);
      if (excess > slack) ++violations;
      worst = std::max(worst, excess / std::max(slack, 1e-300));
    }
  const std::string name = std::string("sandwich_grid_") + (dom.kind == DomainModel::Kind::Ball ? "ball" : "halfspace");
  return CheckReport{name, 0.0, double(violations), 0.0, violations == 0,
                     "worst excess/slack " + detail::fmt(worst), {}};
}

/// Closed-form sandwich at random interior points.
inline CheckReport check_analytic_sandwich(const GreenKernel& gk, int n, double delta, double xi,
                                           std::uint64_t seed, int samples = 2000) {
  const SpaceDims d = dims_constants(n);
  Bubble b{delta, Point::Zero(n)};
  b.xi(n - 1) = xi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int violations = 0, tested = 0;
  const double c = gk.kind == DomainKind::Ball ? gk.center_z : 0.0;
  while (tested < samples) {
    Point x(n);
    for (int i = 0; i < n; ++i) x(i) = U(rng) * (gk.kind == DomainKind::Ball ? gk.radius : 1.0);
    if (gk.kind == DomainKind::Ball) x(n - 1) += c;
    else x(n - 1) = std::abs(x(n - 1));
    if (!(gk.boundary_distance(x) > 0.0)) continue;
    // cluster half the samples near the centre
    if (tested % 2) x = b.xi + (x - b.xi) * (10 * delta);
    if (!(gk.boundary_distance(x) > 0.0)) continue;
    ++tested;
    const double diff = eval_bubble(d, b, x) - exact_project_bubble(gk, d, b, x);
    const double bound = d.alpha * std::pow(delta, d.m()) * green_regular_part(gk, x, b.xi);
    const double tol = 1e-12 * std::max(bound, eval_bubble(d, b, x));
    if (diff < -tol || diff > bound + tol) ++violations;
  }
  return CheckReport{std::string("sandwich_exact_") + to_string(gk.kind), 0.0, double(violations), 0.0,
                     violations == 0, std::to_string(samples) + " samples", {}};
}

/// Dirichlet norm of U - PU for the exact projection: the image charge is harmonic in the
/// domain, |grad h|^2 = coef^2 (n-2)^2 |x - eta|^{-2(n-1)}.
inline double projection_h1_difference(const GreenKernel& gk, int n, double delta, double xi) {
  const SpaceDims d = dims_constants(n);
  const auto ic = image_charge<double>(gk, d, delta, xi);
  if (ic.constant) return 0.0;
  const AxisRegion region = AxisRegion::from_kernel(gk);
  QuadOptions o;
  o.rel_tol = 1e-9;
  o.abs_tol = 0.0;
  o.max_intervals = 20000;
  o.scales = {xi, std::abs(xi - ic.eta)};
  auto f = [&](double r, double z) {
    const double q = r * r + (z - ic.eta) * (z - ic.eta);
    return ic.coef * ic.coef * (n - 2.0) * (n - 2.0) * std::pow(q, -(n - 1.0));
  };
  return std::sqrt(integrate_axisym(f, region, n, xi, o).value);
}

/// ||U - PU|| slope in eps with delta = d eps^{(n-1)/(n-2)}, xi = t eps.
inline CheckReport check_projection_h1_rate(const GreenKernel& gk, int n, const std::vector<double>& eps,
                                            double d1 = 0.577350269189626, double t = 1.0,
                                            double target = 0.5, double tol = 0.05) {
  std::vector<std::pair<double, double>> pts;
  for (double e : eps) {
    const double delta = d1 * std::pow(e, concentration_exponent(n, 1));
    const double xi = gk.kind == DomainKind::Ball ? gk.center_z - gk.radius + t * e : t * e;
    pts.emplace_back(e, projection_h1_difference(gk, n, delta, xi));
  }
  const RateFit fit = rate_regression(pts);
  auto r = detail::absolute_check(std::string("projection_h1_slope_") + to_string(gk.kind), target, fit.slope,
                                  tol, "r2 " + detail::fmt(fit.r_squared));
  r.fit = fit;
  return r;
}

// ---------------------------------------------------------------------------------------------
// reduced energy

inline std::vector<CheckReport> check_reduced_energy(std::uint64_t seed, double grad_tol = 1e-6,
                                                     double hess_tol = 1e-4, double cp_tol = 1e-8) {
  std::vector<CheckReport> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  struct Case {
    int n, k;
  };
  for (Case c : {Case{4, 1}, Case{4, 2}, Case{4, 3}, Case{5, 3}}) {
    const WeightModel w = WeightModel::affine(c.n, 1.0, 1.0);
    const ExpansionConstants ec = expansion_constants(c.n, c.k);
    double gerr = 0, herr = 0;
    for (int trial = 0; trial < 5; ++trial) {
      TowerConfig cfg;
      cfg.k = c.k;
      cfg.t = 0.5 + U(rng);
      cfg.d.clear();
      for (int i = 0; i < c.k; ++i) cfg.d.push_back(0.2 + U(rng));
      for (int i = 0; i + 1 < c.k; ++i) cfg.s.push_back(U(rng) - 0.5);
      const Vec x = cfg.pack();
      const Vec g = grad_phi(cfg, w, ec);
      const Eigen::MatrixXd H = hess_phi(cfg, w, ec);
      for (int j = 0; j < x.size(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(x(j)));
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const auto cp = TowerConfig::unpack(xp), cm = TowerConfig::unpack(xm);
        const double fd = (phi(cp, w, ec) - phi(cm, w, ec)) / (2 * h);
        gerr = std::max(gerr, std::abs(fd - g(j)) / std::max(1.0, std::abs(g(j))));
        const Vec hd = (grad_phi(cp, w, ec) - grad_phi(cm, w, ec)) / (2 * h);
        for (int i = 0; i < x.size(); ++i)
          herr = std::max(herr, std::abs(hd(i) - H(i, j)) / std::max(1.0, std::abs(H(i, j))));
      }
    }
    const std::string tag = "_n" + std::to_string(c.n) + "k" + std::to_string(c.k);
    out.push_back(detail::absolute_check("grad_phi_fd" + tag, 0.0, gerr, grad_tol));
    out.push_back(detail::absolute_check("hess_phi_fd" + tag, 0.0, herr, hess_tol));
    const CriticalPoint cp = find_critical_point(c.n, c.k, w, TowerConfig::default_init(c.k));
    const Inertia in = cp.hessian_inertia;
    const bool ok = in.positive == c.k + 1 && in.negative == c.k - 1 && in.zero == 0;
    out.push_back(detail::flag_check("inertia" + tag, ok, double(in.positive),
                                     "(" + std::to_string(in.positive) + "," + std::to_string(in.negative) +
                                         "," + std::to_string(in.zero) + ")"));
    if (c.k == 1 && c.n == 4) {
      out.push_back(detail::absolute_check("crit_t" + tag, 1.0, cp.config.t, cp_tol));
      out.push_back(detail::absolute_check("crit_d1" + tag, 1.0 / std::sqrt(3.0), cp.config.d[0], cp_tol));
    }
  }
  return out;
}

inline CheckReport check_saddle_inertia(const CriticalPoint& cp) {
  const int k = cp.config.k;
  const Inertia in = cp.hessian_inertia;
  const bool ok = in.positive == k + 1 && in.negative == k - 1 && in.zero == 0;
  return detail::flag_check("saddle_inertia_k" + std::to_string(k), ok, double(in.negative),
                            "(" + std::to_string(in.positive) + "," + std::to_string(in.negative) + "," +
                                std::to_string(in.zero) + ")");
}

// ---------------------------------------------------------------------------------------------
// error term, expansion, towers

struct VerifySetup {
  int n = 4;
  WeightModel weight = WeightModel::affine(4, 1.0, 1.0);
  TowerTemplate tower;                         ///< grid solves
  GreenKernel energy_domain = ball_kernel(4, 1.0, 1.0);  ///< closed-form energy checks
  EnergyPlanOptions energy_plan;
  double tolerance_scale = 1.0;
};

inline CheckReport check_error_rate(const VerifySetup& su, int k, const std::vector<double>& eps) {
  const auto ec = expansion_constants(su.n, k);
  (void)ec;
  const CriticalPoint cp = find_critical_point(su.n, k, su.weight, TowerConfig::default_init(k));
  std::vector<std::pair<double, double>> pts;
  for (double e : eps) {
    const TowerGeometry geo = tower_geometry(cp.config, su.n, e);
    DiscreteProblem prob(tower_grid(su.tower, geo), su.weight, e);
    pts.emplace_back(e, error_norm_R(prob, cp.config));
  }
  const RateFit fit = rate_regression(pts);
  const double target = 0.5 * (su.n + 6.0) / (su.n + 2.0);
  const double tol = 0.15 * su.tolerance_scale;
  CheckReport r = detail::lower_bound_check("error_rate_k" + std::to_string(k), target, fit.slope, tol,
                                            "r2 " + detail::fmt(fit.r_squared));
  r.passed = r.passed && fit.slope > 0.5;
  r.fit = fit;
  return r;
}

/// C0: remainder of J(V) - expansion_rhs, the eps log eps coefficient and the leading value.
inline std::vector<CheckReport> check_expansion_C0(const VerifySetup& su, const CriticalPoint& cp,
                                                   const std::vector<double>& eps, double eps_leading = 1e-3) {
  const int k = cp.config.k;
  const ExpansionConstants ec = expansion_constants(su.n, k);
  const double a0 = su.weight.a_at_xi0();
  std::vector<std::pair<double, double>> rem;
  std::vector<double> X, Y;
  for (double e : eps) {
    const double J = ansatz_energy(su.energy_domain, su.weight, cp.config, e, su.energy_plan);
    rem.emplace_back(e, J - expansion_rhs(e, cp.config, su.weight, ec));
    X.push_back(std::log(1.0 / e));
    Y.push_back((J - a0 * ec.c1 - e * cp.phi_value) / e);
  }
  std::vector<CheckReport> out;
  const RateFit fit = rate_regression(rem);
  CheckReport r = detail::lower_bound_check("C0_remainder_slope", 1.05, fit.slope, 0.0,
                                            "r2 " + detail::fmt(fit.r_squared));
  r.passed = fit.slope > 1.05;
  r.fit = fit;
  out.push_back(r);
  // least squares Y = A + B log(1/eps); B estimates a0 c3
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    mx += X[i] / X.size();
    my += Y[i] / Y.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    sxy += (X[i] - mx) * (Y[i] - my);
    sxx += (X[i] - mx) * (X[i] - mx);
  }
  out.push_back(detail::relative_check("C0_eps_log_coefficient", a0 * ec.c3, sxy / sxx, 0.1 * su.tolerance_scale));
  const double J = ansatz_energy(su.energy_domain, su.weight, cp.config, eps_leading, su.energy_plan);
  out.push_back(detail::relative_check("C0_leading_value", a0 * ec.c1, J, 0.02 * su.tolerance_scale,
                                       "eps " + detail::fmt(eps_leading)));
  return out;
}

/// dJ/dr by central differences with relative step h and one Richardson step.
inline double energy_derivative(const VerifySetup& su, const TowerConfig& cfg, int coord, double eps,
                                double rel_step = 1e-4) {
  const Vec x = cfg.pack();
  const double h = rel_step * std::max(std::abs(x(coord)), 1.0);
  auto J = [&](double dx) {
    Vec y = x;
    y(coord) += dx;
    return ansatz_energy(su.energy_domain, su.weight, TowerConfig::unpack(y), eps, su.energy_plan);
  };
  const double D1 = (J(h) - J(-h)) / (2 * h);
  const double D2 = (J(2 * h) - J(-2 * h)) / (4 * h);
  return (4 * D1 - D2) / 3.0;
}

/// C1: FD(J) / (eps dPhi) -> 1 in each reduced coordinate at `cfg`.
inline std::vector<CheckReport> check_expansion_C1(const VerifySetup& su, const TowerConfig& cfg,
                                                   const std::vector<double>& eps, double eps_ratio = 1e-3) {
  const ExpansionConstants ec = expansion_constants(su.n, cfg.k);
  const Vec g = grad_phi(cfg, su.weight, ec);
  std::vector<CheckReport> out;
  const char* names[] = {"t", "d1"};
  for (int coord = 0; coord < 2; ++coord) {
    const double D = energy_derivative(su, cfg, coord, eps_ratio);
    out.push_back(detail::relative_check(std::string("C1_ratio_") + names[coord], 1.0, D / (eps_ratio * g(coord)),
                                         0.1 * su.tolerance_scale, "eps " + detail::fmt(eps_ratio)));
    if (eps.size() >= 3) {
      std::vector<std::pair<double, double>> pts;
      for (double e : eps) pts.emplace_back(e, energy_derivative(su, cfg, coord, e) - e * g(coord));
      const RateFit fit = rate_regression(pts);
      CheckReport r{std::string("C1_remainder_slope_") + names[coord], 1.0, fit.slope, 0.0, fit.slope > 1.0,
                    "r2 " + detail::fmt(fit.r_squared), fit};
      out.push_back(r);
    }
  }
  return out;
}

inline CheckReport check_correction_norm(const std::vector<TowerSolution>& results, const std::string& tag) {
  bool ok = results.size() >= 2;
  std::string notes;
  double last = std::numeric_limits<double>::infinity(), first = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double v = results[i].newton.correction_norm / std::sqrt(results[i].epsilon);
    if (i == 0) first = v;
    if (!(v < last)) ok = false;
    last = v;
    notes += (i ? " " : "") + detail::fmt(v);
  }
  return CheckReport{"correction_over_sqrt_eps_" + tag, first, last, 0.0, ok, notes, {}};
}

/// Continuation for one k: convergence, sign structure, concentration exponents, correction rate.
inline std::vector<CheckReport> check_tower(const VerifySetup& su, int k, const std::vector<double>& eps,
                                            std::vector<TowerSolution>* keep = nullptr,
                                            std::vector<FitResult>* fits = nullptr) {
  std::vector<CheckReport> out;
  const std::string tag = "k" + std::to_string(k);
  const CriticalPoint cp = find_critical_point(su.n, k, su.weight, TowerConfig::default_init(k));
  std::vector<TowerSolution> sols;
  try {
    sols = continue_in_epsilon(su.tower, cp.config, eps);
  } catch (const Error& e) {
    out.push_back(detail::flag_check("tower_converged_" + tag, false, 0.0, e.what()));
    return out;
  }
  bool conv = true, sign_ok = true;
  std::string sc;
  for (const auto& s : sols) {
    conv = conv && s.newton.converged;
    sign_ok = sign_ok && s.sign_changes == k - 1;
    sc += std::to_string(s.sign_changes);
  }
  out.push_back(detail::flag_check("tower_converged_" + tag, conv, double(sols.size())));
  out.push_back(detail::flag_check("tower_sign_changes_" + tag, sign_ok, double(k - 1), "per eps " + sc));
  try {
    const auto fr = fit_concentration(sols, su.n, k);
    for (const auto& f : fr) {
      const double target = concentration_exponent(su.n, f.level);
      CheckReport r = detail::relative_check("concentration_slope_" + tag + "_level" + std::to_string(f.level),
                                             target, f.fit.slope, 0.1 * su.tolerance_scale,
                                             "d " + detail::fmt(f.fit.intercept) + " r2 " + detail::fmt(f.fit.r_squared));
      r.fit = f.fit;
      out.push_back(r);
    }
    if (fits) *fits = fr;
  } catch (const Error& e) {
    out.push_back(detail::flag_check("concentration_fit_" + tag, false, 0.0, e.what()));
  }
  out.push_back(check_correction_norm(sols, tag));
  if (keep) *keep = std::move(sols);
  return out;
}

}  // namespace towerlab
