#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/errors.hpp"

namespace towerlab {

struct IntegralResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::size_t max_intervals = 4000;
  bool throw_on_budget = true;
  /// Peak scales; breakpoints are placed at scale * 2^j (geometric grading ratio 2).
  std::vector<double> scales;
  int grading_depth = 6;  ///< number of halvings below each scale
};

namespace detail {

constexpr double kGK15x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kGK15w[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kG7w[4] = {0.129484966168869693270611432679082,
                            0.279705391489276667901467771423780,
                            0.381830050505118944950369775488975,
                            0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
};

template <class F>
Segment gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kGK15w[7];
  double g = fc * kG7w[3];
  for (int i = 0; i < 7; ++i) {
    const double x = h * kGK15x[i];
    const double s = f(c - x) + f(c + x);
    k += kGK15w[i] * s;
    if (i % 2 == 1) g += kG7w[i / 2] * s;
  }
  return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7,15) on [a,b] with optional interior breakpoints.
/// Intervals are summed in left-to-right order so results do not depend on refinement order.
template <class F>
IntegralResult integrate_adaptive(F&& f, double a, double b, const QuadOptions& opt = {},
                                  std::vector<double> breaks = {}) {
  std::vector<double> pts{a};
  std::sort(breaks.begin(), breaks.end());
  for (double x : breaks)
    if (x > a && x < b && x > pts.back()) pts.push_back(x);
  pts.push_back(b);

  std::vector<detail::Segment> segs;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) segs.push_back(detail::gk15(f, pts[i], pts[i + 1]));
  std::size_t evals = 15 * segs.size();

  auto totals = [&](double& val, double& err) {
    std::vector<detail::Segment> sorted = segs;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& s, const auto& t) { return s.a < t.a; });
    val = 0.0;
    err = 0.0;
    for (const auto& s : sorted) {
      val += s.value;
      err += s.error;
    }
  };
  double val = 0.0, err = 0.0;
  totals(val, err);
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(val))) {
    if (segs.size() >= opt.max_intervals) {
      if (opt.throw_on_budget)
        throw BudgetExceeded("adaptive quadrature budget exceeded", val, err);
      break;
    }
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].error > segs[worst].error) worst = i;
    const auto s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) {
      if (opt.throw_on_budget)
        throw BudgetExceeded("quadrature interval underflow", val, err);
      break;
    }
    segs[worst] = detail::gk15(f, s.a, mid);
    segs.push_back(detail::gk15(f, mid, s.b));
    evals += 30;
    totals(val, err);
  }
  return {val, err, evals};
}

namespace detail {
inline std::vector<double> graded_breaks(const QuadOptions& opt, double lo, double hi) {
  std::vector<double> out;
  for (double s : opt.scales) {
    if (!(s > 0.0)) continue;
    for (int j = -opt.grading_depth; j < 200; ++j) {
      const double x = s * std::ldexp(1.0, j);
      if (x >= hi) break;
      if (x > lo) out.push_back(x);
    }
  }
  return out;
}
}  // namespace detail

/// Integral of f over [0, R]; R = infinity uses the substitution r = s/(1-s).
template <class F>
IntegralResult integrate_radial(F&& f, double R = std::numeric_limits<double>::infinity(),
                                const QuadOptions& opt = {}) {
  if (!(R > 0.0)) throw DomainError("radial interval must have R > 0");
  auto breaks = detail::graded_breaks(opt, 0.0, std::min(R, 1e12));
  if (std::isfinite(R)) return integrate_adaptive(f, 0.0, R, opt, breaks);
  auto g = [&](double s) {
    const double t = 1.0 - s;
    return t > 0.0 ? f(s / t) / (t * t) : 0.0;
  };
  for (double& x : breaks) x = x / (1.0 + x);
  // the unit scale is always graded: most integrands here decay beyond r ~ 1
  for (int j = 1; j <= 6; ++j) breaks.push_back(1.0 - std::ldexp(1.0, -j));
  return integrate_adaptive(g, 0.0, 1.0, opt, breaks);
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int npts, std::vector<double>& x, std::vector<double>& w) {
  x.assign(npts, 0.0);
  w.assign(npts, 0.0);
  for (int i = 0; i < (npts + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (npts + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= npts; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = npts * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= npts; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = npts * (t * p1 - p0) / (t * t - 1.0);
    x[i] = -t;
    x[npts - 1 - i] = t;
    w[i] = w[npts - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

/// Axisymmetric region described from a focus point (0, z_f) on the axis: the part of the
/// sphere |x - focus| = rho inside the region is the cap theta in [0, theta_max(rho)],
/// theta measured from axis_dir(z_f) e_n.
struct AxisRegion {
  enum class Kind { FullSpace, HalfSpace, Ball };
  Kind kind = Kind::FullSpace;
  double center_z = 0.0;
  double radius = 1.0;

  static AxisRegion full_space() { return {Kind::FullSpace, 0.0, 1.0}; }
  static AxisRegion half_space() { return {Kind::HalfSpace, 0.0, 1.0}; }
  static AxisRegion ball(double center_z, double radius) { return {Kind::Ball, center_z, radius}; }

  static AxisRegion from_kernel(const GreenKernel& g) {
    if (g.kind == DomainKind::HalfSpace) return half_space();
    g.require_kind();
    return ball(g.center_z, g.radius);
  }

  bool contains(double r, double z) const {
    switch (kind) {
      case Kind::FullSpace: return true;
      case Kind::HalfSpace: return z > 0.0;
      case Kind::Ball: return r * r + (z - center_z) * (z - center_z) < radius * radius;
    }
    return false;
  }

  double rho_max(double zf) const {
    if (kind == Kind::Ball) return radius + std::abs(zf - center_z);
    return std::numeric_limits<double>::infinity();
  }

  /// Distance from the focus to the boundary; theta_max(rho) = pi below it.
  double boundary_gap(double zf) const {
    if (kind == Kind::HalfSpace) return zf;
    if (kind == Kind::Ball) return radius - std::abs(zf - center_z);
    return std::numeric_limits<double>::infinity();
  }

  /// Direction of the cap axis: theta is measured from axis_dir(zf) * e_n.
  double axis_dir(double zf) const {
    return kind == Kind::Ball && zf > center_z ? -1.0 : 1.0;
  }

  double theta_max(double rho, double zf) const {
    switch (kind) {
      case Kind::FullSpace: return std::numbers::pi;
      case Kind::HalfSpace:
        return rho <= zf ? std::numbers::pi : std::acos(-zf / rho);
      case Kind::Ball: {
        const double w = zf - center_z;
        if (rho <= radius - std::abs(w)) return std::numbers::pi;
        if (rho >= radius + std::abs(w)) return 0.0;
        // |(rho sin th, w + rho cos th)|^2 < R^2  <=>  2 rho w cos th < R^2 - rho^2 - w^2
        const double c = (rho * rho + w * w - radius * radius) / (2.0 * rho * std::abs(w));
        return std::acos(std::clamp(c, -1.0, 1.0));
      }
    }
    return 0.0;
  }
};

/// Integral over an axisymmetric region in R^n of f(r, z) (r = |x'|, z = x_n), computed in
/// polar coordinates around the axis point (0, focus_z):
///   |S^{n-2}| int rho^{n-1} int_0^{theta_max} f sin^{n-2}(theta) dtheta drho.
/// The focus must lie inside the region; scales in `opt` grade the rho subdivision.
template <class F>
IntegralResult integrate_axisym(F&& f, const AxisRegion& region, int n, double focus_z = 0.0,
                                const QuadOptions& opt = {}) {
  if (n < 2) throw DimensionError("axisymmetric integration needs n >= 2");
  if (!region.contains(0.0, focus_z)) throw DomainError("integration focus outside the region");
  const double Snm2 = sphere_area_of(n - 1);
  const double dir = region.axis_dir(focus_z);
  QuadOptions inner = opt;
  inner.scales.clear();
  inner.throw_on_budget = false;
  inner.rel_tol = opt.rel_tol * 0.1;
  inner.abs_tol = 0.0;
  std::size_t evals = 0;
  double inner_err = 0.0;
  auto radial = [&](double rho) {
    if (rho <= 0.0) return 0.0;
    const double thmax = region.theta_max(rho, focus_z);
    if (thmax <= 0.0) return 0.0;
    auto g = [&](double th) {
      const double s = std::sin(th);
      return f(rho * s, focus_z + dir * rho * std::cos(th)) * std::pow(s, n - 2);
    };
    std::vector<double> tb;
    for (double frac : {0.5, 0.8, 0.95, 0.99}) tb.push_back(frac * thmax);
    const auto res = integrate_adaptive(g, 0.0, thmax, inner, tb);
    evals += res.evaluations;
    const double w = std::pow(rho, n - 1);
    inner_err = std::max(inner_err, res.error_estimate * w);
    return res.value * w;
  };
  QuadOptions outer = opt;
  const double gap = region.boundary_gap(focus_z);
  if (std::isfinite(gap)) outer.scales.push_back(gap);
  const double rmax = region.rho_max(focus_z);
  IntegralResult res;
  if (std::isfinite(rmax)) {
    auto br = detail::graded_breaks(outer, 0.0, rmax);
    if (std::isfinite(gap) && gap < rmax) {
      for (int j = 1; j <= 8; ++j) {
        br.push_back(gap * (1.0 - std::ldexp(1.0, -2 * j)));
        br.push_back(gap * (1.0 + std::ldexp(1.0, -2 * j)));
      }
    }
    res = integrate_adaptive(radial, 0.0, rmax, outer, br);
  } else {
    auto br = detail::graded_breaks(outer, 0.0, 1e12);
    if (std::isfinite(gap))
      for (int j = 1; j <= 8; ++j) {
        br.push_back(gap * (1.0 - std::ldexp(1.0, -2 * j)));
        br.push_back(gap * (1.0 + std::ldexp(1.0, -2 * j)));
      }
    for (double& x : br) x = x / (1.0 + x);
    for (int j = 1; j <= 6; ++j) br.push_back(1.0 - std::ldexp(1.0, -j));
    auto g = [&](double s) {
      const double t = 1.0 - s;
      return t > 0.0 ? radial(s / t) / (t * t) : 0.0;
    };
    res = integrate_adaptive(g, 0.0, 1.0, outer, br);
  }
  res.value *= Snm2;
  res.error_estimate = Snm2 * (res.error_estimate + inner_err);
  res.evaluations = evals;
  return res;
}

/// Fixed tensor Gauss-Legendre rule in (log rho, theta) around an axis focus. All panel
/// boundaries move smoothly with the focus height and the lower cutoff, so the rule can be
/// finite-differenced in the tower parameters.
struct PolarPlan {
  double focus_z = 0.0;
  std::vector<double> rho;       ///< radial nodes
  std::vector<double> rho_w;     ///< weights in d(rho), including rho^{n-1}
  std::vector<double> gl_x, gl_w;  ///< theta rule on [-1, 1]
  std::vector<double> theta_fracs{0.0, 0.5, 0.8, 0.95, 0.99, 1.0};
};

/// rho runs over [rho_lo, rho_hi] in log scale with `panels_in` equal panels below the
/// boundary gap and `panels_out` above it, plus breakpoints at gap * exp(+-10^-j).
inline PolarPlan make_polar_plan(int n, double focus_z, double gap, double rho_lo, double rho_hi,
                                 int panels_in, int panels_out, int order = 20) {
  if (!(rho_lo > 0.0 && rho_lo < gap && gap < rho_hi))
    throw DomainError("polar plan needs 0 < rho_lo < gap < rho_hi");
  PolarPlan plan;
  plan.focus_z = focus_z;
  gauss_legendre(order, plan.gl_x, plan.gl_w);
  const double lg = std::log(gap), llo = std::log(rho_lo), lhi = std::log(rho_hi);
  std::vector<double> knots;
  for (int i = 0; i <= panels_in; ++i) knots.push_back(llo + (lg - llo) * i / panels_in);
  for (int i = 1; i <= panels_out; ++i) knots.push_back(lg + (lhi - lg) * i / panels_out);
  for (int j = 1; j <= 7; ++j) {
    const double h = std::pow(10.0, -j);
    if (lg - h > knots[panels_in - 1]) knots.push_back(lg - h);
    if (lg + h < knots[panels_in + 1]) knots.push_back(lg + h);
  }
  std::sort(knots.begin(), knots.end());
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i], b = knots[i + 1];
    for (int q = 0; q < order; ++q) {
      const double u = 0.5 * (b - a) * plan.gl_x[q] + 0.5 * (a + b);
      const double r = std::exp(u);
      plan.rho.push_back(r);
      plan.rho_w.push_back(0.5 * (b - a) * plan.gl_w[q] * std::pow(r, n));
    }
  }
  return plan;
}

/// Applies a polar plan to f(r, z) over the region; includes the |S^{n-2}| measure factor.
template <class F>
double integrate_polar(const PolarPlan& plan, const AxisRegion& region, int n, F&& f) {
  const double Snm2 = sphere_area_of(n - 1);
  const auto& fr = plan.theta_fracs;
  const double dir = region.axis_dir(plan.focus_z);
  double total = 0.0;
  for (std::size_t i = 0; i < plan.rho.size(); ++i) {
    const double rho = plan.rho[i];
    const double thmax = region.theta_max(rho, plan.focus_z);
    if (thmax <= 0.0) continue;
    double ring = 0.0;
    for (std::size_t p = 0; p + 1 < fr.size(); ++p) {
      const double a = fr[p] * thmax, b = fr[p + 1] * thmax;
      for (std::size_t q = 0; q < plan.gl_x.size(); ++q) {
        const double th = 0.5 * (b - a) * plan.gl_x[q] + 0.5 * (a + b);
        const double s = std::sin(th);
        ring += 0.5 * (b - a) * plan.gl_w[q] * std::pow(s, n - 2) *
                f(rho * s, plan.focus_z + dir * rho * std::cos(th));
      }
    }
    total += plan.rho_w[i] * ring;
  }
  return Snm2 * total;
}

/// Annuli A_l = {radii[l] <= |x - xi_k| < radii[l-1]}, l = 1..k, with
/// radii[l] = sqrt(delta_l delta_{l+1}), delta_0 = (eps rho)^2 / delta_1, delta_{k+1} = 0.
struct AnnulusPartition {
  double center_z = 0.0;
  std::vector<double> radii;  ///< length k + 1, strictly decreasing, last entry 0
  double rho = 0.1;

  static AnnulusPartition from_tower(double eps, double rho, const std::vector<double>& deltas,
                                     double center_z) {
    if (deltas.empty()) throw DomainError("annulus partition needs at least one bubble");
    if (!(eps > 0.0 && rho > 0.0)) throw DomainError("annulus partition needs eps, rho > 0");
    AnnulusPartition part;
    part.center_z = center_z;
    part.rho = rho;
    std::vector<double> d{(eps * rho) * (eps * rho) / deltas[0]};
    d.insert(d.end(), deltas.begin(), deltas.end());
    d.push_back(0.0);
    for (std::size_t l = 0; l + 1 < d.size(); ++l) part.radii.push_back(std::sqrt(d[l] * d[l + 1]));
    for (std::size_t l = 0; l + 1 < part.radii.size(); ++l)
      if (!(part.radii[l] > part.radii[l + 1]))
        throw DomainError("annulus radii are not strictly decreasing");
    return part;
  }

  int k() const { return int(radii.size()) - 1; }
};

/// Integral of f(r, z) over the annulus A_l (assumed inside the domain).
template <class F>
IntegralResult integrate_annulus(F&& f, const AnnulusPartition& part, int l, int n,
                                 const QuadOptions& opt = {}) {
  if (l < 1 || l > part.k())
    throw IndexError("annulus index " + std::to_string(l) + " outside 1.." +
                     std::to_string(part.k()));
  const double lo = part.radii[l], hi = part.radii[l - 1];
  const double Snm2 = sphere_area_of(n - 1);
  QuadOptions inner = opt;
  inner.scales.clear();
  inner.throw_on_budget = false;
  inner.abs_tol = 0.0;
  inner.rel_tol = 0.1 * opt.rel_tol;
  std::size_t evals = 0;
  auto radial = [&](double rho) {
    auto g = [&](double th) {
      const double s = std::sin(th);
      return f(rho * s, part.center_z + rho * std::cos(th)) * std::pow(s, n - 2);
    };
    const auto res = integrate_adaptive(g, 0.0, std::numbers::pi, inner);
    evals += res.evaluations;
    return res.value * std::pow(rho, n - 1);
  };
  std::vector<double> br = detail::graded_breaks(opt, lo, hi);
  // geometric subdivision keeps the relative resolution uniform across many decades
  if (lo > 0.0)
    for (double x = lo * 2.0; x < hi; x *= 2.0) br.push_back(x);
  else
    for (double x = hi / 2.0; x > hi * 1e-12; x /= 2.0) br.push_back(x);
  auto res = integrate_adaptive(radial, lo, hi, opt, br);
  res.value *= Snm2;
  res.error_estimate *= Snm2;
  res.evaluations = evals;
  return res;
}

struct Box {
  std::vector<double> lo, hi;
};

/// Plain Monte Carlo with a fixed-seed 64-bit Mersenne Twister.
template <class F>
IntegralResult mc_integrate_nd(F&& f, const Box& box, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw DomainError("Monte Carlo needs at least 2 samples");
  if (box.lo.size() != box.hi.size() || box.lo.empty())
    throw DomainError("Monte Carlo box bounds mismatch");
  const std::size_t dim = box.lo.size();
  double vol = 1.0;
  for (std::size_t i = 0; i < dim; ++i) vol *= box.hi[i] - box.lo[i];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Point x(dim);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < dim; ++i) x(i) = box.lo[i] + (box.hi[i] - box.lo[i]) * unif(rng);
    const double v = f(x);
    const double delta = v - mean;
    mean += delta / double(s + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / double(samples - 1);
  return {vol * mean, vol * std::sqrt(var / double(samples)), samples};
}

/// F(s) = alpha^{p+1} int (1+|y|^2)^{-(n+2)/2} |y + s e_n|^{2-n} dy in closed form.
inline double F_closed_form(const SpaceDims& d, double s) {
  return std::pow(d.alpha, d.p + 1) * d.ball_vol * std::pow(1.0 + s * s, -d.m());
}

/// Quadrature oracle for F(s), polar around the singular point y = -s e_n.
inline IntegralResult F_by_quadrature(const SpaceDims& d, double s, const QuadOptions& opt = {}) {
  auto f = [&](double r, double z) {
    const double y2 = r * r + z * z;
    const double dist2 = r * r + (z + s) * (z + s);
    return std::pow(1.0 + y2, -0.5 * (d.n + 2)) * std::pow(dist2, 1.0 - 0.5 * d.n);
  };
  QuadOptions o = opt;
  o.scales = {1.0};
  if (s > 0) o.scales.push_back(s);
  auto res = integrate_axisym(f, AxisRegion::full_space(), d.n, -s, o);
  const double c = std::pow(d.alpha, d.p + 1);
  res.value *= c;
  res.error_estimate *= c;
  return res;
}

}  // namespace towerlab
