#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/quadrature.hpp"

namespace towerlab {

/// Reduced coordinates of a tower of k bubbles. s has k - 1 entries (s_k = 0 implicitly).
struct TowerConfig {
  int k = 1;
  std::vector<double> d{0.5};
  double t = 1.0;
  std::vector<double> s;
  double epsilon = 0.0;

  static TowerConfig default_init(int k) {
    TowerConfig c;
    c.k = k;
    c.d.clear();
    for (int i = 1; i <= k; ++i) c.d.push_back(std::ldexp(1.0, -i));
    c.s.assign(k - 1, 0.0);
    return c;
  }

  bool in_lambda() const {
    if (k < 1 || int(d.size()) != k || int(s.size()) != k - 1) return false;
    if (!(t > 0.0)) return false;
    for (double v : d)
      if (!(v > 0.0)) return false;
    return true;
  }

  void require_lambda() const {
    if (k < 1) throw DomainError("tower height must be >= 1");
    if (int(d.size()) != k || int(s.size()) != k - 1)
      throw DomainError("tower needs k values of d and k-1 values of s");
    if (!in_lambda()) throw DomainError("tower parameters outside the admissible set (t, d_i > 0)");
  }

  /// Packs (t, d_1..d_k, s_1..s_{k-1}).
  Eigen::VectorXd pack() const {
    Eigen::VectorXd x(2 * k);
    x(0) = t;
    for (int i = 0; i < k; ++i) x(1 + i) = d[i];
    for (int i = 0; i + 1 < k; ++i) x(1 + k + i) = s[i];
    return x;
  }

  static TowerConfig unpack(const Eigen::VectorXd& x, double eps = 0.0) {
    TowerConfig c;
    c.k = int(x.size()) / 2;
    c.t = x(0);
    c.d.assign(x.data() + 1, x.data() + 1 + c.k);
    c.s.assign(x.data() + 1 + c.k, x.data() + 2 * c.k);
    c.epsilon = eps;
    return c;
  }
};

/// Concentration exponent of level i (1-based): delta_i = eps^{e_i} d_i.
inline double concentration_exponent(int n, int i) { return double(n - 1 + 2 * (i - 1)) / (n - 2); }

/// Physical parameters (delta_i, xi_i) with xi_i the height of the i-th centre on the axis.
struct TowerGeometry {
  std::vector<double> delta;
  std::vector<double> xi;
  double center = 0.0;  ///< eps t, the common concentration point

  int k() const { return int(delta.size()); }
};

inline TowerGeometry tower_geometry(const TowerConfig& cfg, int n, double eps) {
  cfg.require_lambda();
  if (!(eps > 0.0)) throw DomainError("tower geometry needs eps > 0");
  TowerGeometry g;
  g.center = eps * cfg.t;
  for (int i = 1; i <= cfg.k; ++i) {
    const double dl = std::pow(eps, concentration_exponent(n, i)) * cfg.d[i - 1];
    const double s = i < cfg.k ? cfg.s[i - 1] : 0.0;
    g.delta.push_back(dl);
    g.xi.push_back(g.center + dl * s);
  }
  return g;
}

struct ExpansionConstants {
  int n = 4, k = 1;
  double a1 = 0, a2 = 0, a3 = 0;
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0, c7 = 0;
};

/// a3 = alpha^{p+1} int (1+|y|^2)^{-n} log(alpha (1+|y|^2)^{-(n-2)/2}) dy by radial quadrature.
inline double a3_by_quadrature(const SpaceDims& d, double rel_tol = 1e-12) {
  QuadOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = 0.0;
  auto f = [&](double r) {
    const double q = 1.0 + r * r;
    return std::pow(r, d.n - 1) * std::pow(q, -double(d.n)) * std::log(d.alpha * std::pow(q, -d.m()));
  };
  return std::pow(d.alpha, d.p + 1) * d.sphere_area * integrate_radial(f, INFINITY, opt).value;
}

inline ExpansionConstants expansion_constants(int n, int k) {
  const SpaceDims d = dims_constants(n);
  if (k < 1) throw DomainError("tower height must be >= 1");
  const double pi = std::numbers::pi;
  const double ap = std::pow(d.alpha, d.p + 1);
  ExpansionConstants ec;
  ec.n = n;
  ec.k = k;
  ec.a1 = ap * std::pow(pi, 0.5 * n) * std::tgamma(0.5 * n) / std::tgamma(double(n));
  ec.a2 = ap * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * (n + 2));
  ec.a3 = a3_by_quadrature(d);
  const double p1 = d.p + 1;
  ec.c1 = k * ec.a1 / n;
  ec.c2 = k * ec.a3 / p1 - k * ec.a1 / (p1 * p1);
  ec.c3 = k * (n + k - 2) * ec.a1 / (2.0 * p1);
  ec.c4 = k * ec.a1 / n;
  ec.c5 = ec.a2 / 2.0;
  ec.c6 = ap * d.ball_vol;
  ec.c7 = (n - 2.0) * (n - 2.0) * ec.a1 / (4.0 * n);
  return ec;
}

namespace detail {
inline void require_weight(const WeightModel& w) {
  if (!(w.dnu_a() > 0.0)) throw DomainError("weight needs a positive normal derivative at xi0");
  if (!(w.a_at_xi0() > 0.0)) throw DomainError("weight needs a(xi0) > 0");
}
}  // namespace detail

/// Reduced energy
///   dnu_a c4 t + a0 [c5 (d1/2t)^{n-2} + c6 sum (d_{i+1}/d_i)^{(n-2)/2} (1+s_i^2)^{-(n-2)/2}]
///   - a0 c7 sum log d_i.
inline double phi(const TowerConfig& cfg, const WeightModel& w, const ExpansionConstants& ec) {
  cfg.require_lambda();
  detail::require_weight(w);
  const int n = ec.n;
  const double m = 0.5 * (n - 2);
  const double a0 = w.a_at_xi0();
  double inner = ec.c5 * std::pow(cfg.d[0] / (2.0 * cfg.t), n - 2);
  for (int i = 0; i + 1 < cfg.k; ++i)
    inner += ec.c6 * std::pow(cfg.d[i + 1] / cfg.d[i], m) * std::pow(1.0 + cfg.s[i] * cfg.s[i], -m);
  double logs = 0.0;
  for (double v : cfg.d) logs += std::log(v);
  return w.dnu_a() * ec.c4 * cfg.t + a0 * inner - a0 * ec.c7 * logs;
}

/// Gradient in (t, d_1..d_k, s_1..s_{k-1}).
inline Eigen::VectorXd grad_phi(const TowerConfig& cfg, const WeightModel& w,
                                const ExpansionConstants& ec) {
  cfg.require_lambda();
  detail::require_weight(w);
  const int n = ec.n, k = cfg.k;
  const double m = 0.5 * (n - 2);
  const double a0 = w.a_at_xi0();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * k);
  const double T1 = ec.c5 * std::pow(cfg.d[0] / (2.0 * cfg.t), n - 2);
  g(0) = w.dnu_a() * ec.c4 - a0 * (n - 2) * T1 / cfg.t;
  g(1) += a0 * (n - 2) * T1 / cfg.d[0];
  for (int i = 0; i + 1 < k; ++i) {
    const double s = cfg.s[i];
    const double rho = std::pow(cfg.d[i + 1] / cfg.d[i], m);
    const double P = ec.c6 * rho * std::pow(1.0 + s * s, -m);
    g(1 + i) += -a0 * m * P / cfg.d[i];
    g(2 + i) += a0 * m * P / cfg.d[i + 1];
    g(1 + k + i) = a0 * ec.c6 * rho * (-2.0 * m * s) * std::pow(1.0 + s * s, -m - 1);
  }
  for (int i = 0; i < k; ++i) g(1 + i) -= a0 * ec.c7 / cfg.d[i];
  return g;
}

inline Eigen::MatrixXd hess_phi(const TowerConfig& cfg, const WeightModel& w,
                                const ExpansionConstants& ec) {
  cfg.require_lambda();
  detail::require_weight(w);
  const int n = ec.n, k = cfg.k;
  const double m = 0.5 * (n - 2);
  const double a0 = w.a_at_xi0();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  const double t = cfg.t, d1 = cfg.d[0];
  const double T1 = ec.c5 * std::pow(d1 / (2.0 * t), n - 2);
  H(0, 0) = a0 * (n - 2.0) * (n - 1.0) * T1 / (t * t);
  H(0, 1) = H(1, 0) = -a0 * (n - 2.0) * (n - 2.0) * T1 / (t * d1);
  H(1, 1) = a0 * (n - 2.0) * (n - 3.0) * T1 / (d1 * d1);
  for (int i = 0; i + 1 < k; ++i) {
    const double s = cfg.s[i], di = cfg.d[i], dj = cfg.d[i + 1];
    const double rho = std::pow(dj / di, m);
    const double q = 1.0 + s * s;
    const double g0 = std::pow(q, -m);
    const double g1 = -2.0 * m * s * std::pow(q, -m - 1);
    const double g2 = -2.0 * m * std::pow(q, -m - 1) + 4.0 * m * (m + 1) * s * s * std::pow(q, -m - 2);
    const double P = a0 * ec.c6 * rho * g0;
    const double Ps = a0 * ec.c6 * rho * g1;
    const int a = 1 + i, b = 2 + i, c = 1 + k + i;
    H(a, a) += m * (m + 1) * P / (di * di);
    H(b, b) += m * (m - 1) * P / (dj * dj);
    H(a, b) += -m * m * P / (di * dj);
    H(b, a) += -m * m * P / (di * dj);
    H(c, c) += a0 * ec.c6 * rho * g2;
    H(a, c) = H(c, a) = -m * Ps / di;
    H(b, c) = H(c, b) = m * Ps / dj;
  }
  for (int i = 0; i < k; ++i) H(1 + i, 1 + i) += a0 * ec.c7 / (cfg.d[i] * cfg.d[i]);
  return H;
}

struct Inertia {
  int positive = 0, negative = 0, zero = 0;
  bool operator==(const Inertia&) const = default;
};

inline Inertia inertia_of(const Eigen::MatrixXd& H, double rel_zero = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  Inertia in;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= rel_zero * scale) ++in.zero;
    else if (ev(i) > 0) ++in.positive;
    else ++in.negative;
  }
  return in;
}

struct CriticalPoint {
  TowerConfig config;
  double phi_value = 0.0;
  double gradient_norm = 0.0;
  Inertia hessian_inertia;
  int iterations = 0;
  bool minmax = false;  ///< inertia equals (k+1, k-1, 0)
};

/// Newton on grad phi. The (t, d) block is solved first in log coordinates, where phi restricted
/// to s = 0 is a sum of exponentials of linear forms plus a linear term, hence convex; a few
/// plain Newton steps on the full gradient then polish the point.
inline CriticalPoint find_critical_point(int n, int k, const WeightModel& w,
                                         const TowerConfig& init, double tol = 1e-10,
                                         int max_iter = 200) {
  const ExpansionConstants ec = expansion_constants(n, k);
  if (init.k != k) throw DomainError("initial tower has the wrong height");
  init.require_lambda();
  TowerConfig cur = init;
  std::vector<double> trace;

  // stage 1: damped Newton in (log t, log d) with s held fixed
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = grad_phi(cur, w, ec);
    const Eigen::MatrixXd H = hess_phi(cur, w, ec);
    Eigen::VectorXd x(k + 1);
    x(0) = cur.t;
    for (int i = 0; i < k; ++i) x(1 + i) = cur.d[i];
    // chain rule for u = log x
    const Eigen::VectorXd gu = x.cwiseProduct(g.head(k + 1));
    Eigen::MatrixXd Hu = x.asDiagonal() * H.topLeftCorner(k + 1, k + 1) * x.asDiagonal();
    Hu.diagonal() += gu;
    trace.push_back(gu.norm());
    if (gu.norm() < 1e-2 * tol) break;
    Eigen::VectorXd step = -Hu.ldlt().solve(gu);
    if (!step.allFinite()) throw SolverError("critical-point Newton hit a singular Hessian", trace);
    const double f0 = phi(cur, w, ec);
    double lam = 1.0;
    TowerConfig next = cur;
    for (int h = 0; h < 60; ++h) {
      next.t = cur.t * std::exp(lam * step(0));
      for (int i = 0; i < k; ++i) next.d[i] = cur.d[i] * std::exp(lam * step(1 + i));
      if (phi(next, w, ec) <= f0 + 1e-4 * lam * gu.dot(step)) break;
      lam *= 0.5;
    }
    cur = next;
    if (it + 1 == max_iter) {
      std::ostringstream os;
      os << "critical-point Newton did not converge in " << max_iter << " iterations";
      throw SolverError(os.str(), trace);
    }
  }

  // stage 2: full Newton polish
  int iters = int(trace.size());
  for (int it = 0; it < 20; ++it) {
    const Eigen::VectorXd g = grad_phi(cur, w, ec);
    trace.push_back(g.norm());
    if (g.norm() < 1e-2 * tol) break;
    const Eigen::VectorXd step = -hess_phi(cur, w, ec).fullPivLu().solve(g);
    TowerConfig next = TowerConfig::unpack(cur.pack() + step);
    if (!next.in_lambda()) break;
    cur = next;
    ++iters;
  }

  CriticalPoint cp;
  cp.config = cur;
  cp.config.epsilon = 0.0;
  cp.phi_value = phi(cur, w, ec);
  cp.gradient_norm = grad_phi(cur, w, ec).norm();
  cp.hessian_inertia = inertia_of(hess_phi(cur, w, ec));
  cp.iterations = iters;
  cp.minmax = cp.hessian_inertia == Inertia{k + 1, k - 1, 0};
  if (!(cp.gradient_norm < tol))
    throw SolverError("critical-point Newton stalled at gradient norm " +
                          std::to_string(cp.gradient_norm),
                      trace);
  return cp;
}

/// a0 [c1 + c2 eps - c3 eps log eps] + eps phi.
inline double expansion_rhs(double eps, const TowerConfig& cfg, const WeightModel& w,
                            const ExpansionConstants& ec) {
  if (!(eps > 0.0)) throw DomainError("expansion needs eps > 0");
  const double a0 = w.a_at_xi0();
  return a0 * (ec.c1 + ec.c2 * eps - ec.c3 * eps * std::log(eps)) + eps * phi(cfg, w, ec);
}

}  // namespace towerlab
