#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "towerlab/dual.hpp"
#include "towerlab/errors.hpp"

namespace towerlab {

using Point = Eigen::VectorXd;

/// Dimension-dependent constants of the critical problem in R^n.
struct SpaceDims {
  int n = 4;
  double p = 3.0;            ///< (n+2)/(n-2)
  double alpha = 0.0;        ///< [n(n-2)]^{(n-2)/4}
  double ball_vol = 0.0;     ///< |B^n|
  double sphere_area = 0.0;  ///< |S^{n-1}|
  double axis_sphere = 0.0;  ///< |S^{n-2}|, the meridian measure factor

  double m() const { return 0.5 * (n - 2); }
};

inline double sphere_area_of(int dim_plus_one) {
  // |S^{k-1}| = 2 pi^{k/2} / Gamma(k/2)
  const double k = dim_plus_one;
  return 2.0 * std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k);
}

inline SpaceDims dims_constants(int n) {
  if (n < 4)
    throw DimensionError("unsupported dimension n=" + std::to_string(n) +
                         ": the construction needs n >= 4");
  SpaceDims d;
  d.n = n;
  d.p = double(n + 2) / double(n - 2);
  d.alpha = std::pow(double(n) * (n - 2), 0.25 * (n - 2));
  d.sphere_area = sphere_area_of(n);
  d.ball_vol = std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  d.axis_sphere = sphere_area_of(n - 1);
  return d;
}

struct Bubble {
  double delta = 1.0;
  Point xi;
};

inline double eval_bubble(const SpaceDims& d, const Bubble& b, const Point& x) {
  const double q = b.delta * b.delta + (x - b.xi).squaredNorm();
  return d.alpha * std::pow(b.delta, d.m()) * std::pow(q, -d.m());
}

/// Kernel functions of the linearized equation: j = 0 gives dU/d(delta), j = n gives dU/d(xi_n).
inline double eval_psi(const SpaceDims& d, const Bubble& b, int j, const Point& x) {
  const double m = d.m();
  const double r2 = (x - b.xi).squaredNorm();
  const double q = b.delta * b.delta + r2;
  if (j == 0)
    return d.alpha * m * std::pow(b.delta, m - 1) * (r2 - b.delta * b.delta) *
           std::pow(q, -m - 1);
  if (j == d.n)
    return d.alpha * (d.n - 2) * std::pow(b.delta, m) * (x(d.n - 1) - b.xi(d.n - 1)) *
           std::pow(q, -m - 1);
  throw IndexError("kernel index must be 0 or n, got " + std::to_string(j));
}

enum class DomainKind { HalfSpace, Ball, Profile };

inline std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::HalfSpace: return "half-space";
    case DomainKind::Ball: return "ball";
    case DomainKind::Profile: return "profile";
  }
  return "?";
}

/// Dirichlet Green function G = gamma_n (|x-y|^{2-n} - H) of a model domain.
/// The half-space is {x_n > 0}; the ball has centre (0,...,0,center_z) and radius `radius`.
struct GreenKernel {
  DomainKind kind = DomainKind::HalfSpace;
  int n = 4;
  double center_z = 1.0;
  double radius = 1.0;

  double gamma_n() const { return 1.0 / ((n - 2) * sphere_area_of(n)); }

  Point center() const {
    Point c = Point::Zero(n);
    c(n - 1) = center_z;
    return c;
  }

  /// Signed distance to the boundary (positive inside).
  double boundary_distance(const Point& x) const {
    if (kind == DomainKind::HalfSpace) return x(n - 1);
    return radius - (x - center()).norm();
  }

  /// Meridian-plane version of boundary_distance.
  double boundary_distance(double r, double z) const {
    if (kind == DomainKind::HalfSpace) return z;
    return radius - std::hypot(r, z - center_z);
  }

  /// Reflection (half-space) or Kelvin inversion (ball) of xi.
  Point image_point(const Point& xi) const {
    if (kind == DomainKind::HalfSpace) {
      Point s = xi;
      s(n - 1) = -xi(n - 1);
      return s;
    }
    const Point c = center();
    const double b = (xi - c).squaredNorm();
    if (b == 0.0) throw DomainError("Kelvin image of the ball centre is at infinity");
    return c + (radius * radius / b) * (xi - c);
  }

  void require_kind() const {
    if (kind == DomainKind::Profile)
      throw DomainError("tabulated profile domains have no closed-form Green function");
  }
};

inline GreenKernel half_space_kernel(int n) { return {DomainKind::HalfSpace, n, 0.0, 1.0}; }

inline GreenKernel ball_kernel(int n, double center_z = 0.0, double radius = 1.0) {
  return {DomainKind::Ball, n, center_z, radius};
}

namespace detail {
inline void require_inside(const GreenKernel& g, const Point& x, const char* what,
                           bool strict) {
  if (x.size() != g.n) throw DomainError(std::string(what) + " has wrong dimension");
  const double dist = g.boundary_distance(x);
  if (strict ? !(dist > 0.0) : dist < -1e-14 * (1.0 + x.norm()))
    throw DomainError(std::string(what) + " lies outside the " + to_string(g.kind));
}
}  // namespace detail

/// Regular part H(x, xi). x may lie on the boundary, xi must be interior.
inline double green_regular_part(const GreenKernel& g, const Point& x, const Point& xi) {
  g.require_kind();
  detail::require_inside(g, x, "x", false);
  detail::require_inside(g, xi, "xi", true);
  if (g.kind == DomainKind::HalfSpace)
    return std::pow((x - g.image_point(xi)).norm(), 2.0 - g.n);
  const double b = (xi - g.center()).norm();
  if (b == 0.0) return std::pow(g.radius, 2.0 - g.n);
  return std::pow(b / g.radius * (x - g.image_point(xi)).norm(), 2.0 - g.n);
}

/// Gradient of H(x, xi) with respect to x.
inline Point grad_regular_part(const GreenKernel& g, const Point& x, const Point& xi) {
  g.require_kind();
  detail::require_inside(g, x, "x", false);
  detail::require_inside(g, xi, "xi", true);
  double scale = 1.0;
  if (g.kind == DomainKind::Ball) {
    const double b = (xi - g.center()).norm();
    if (b == 0.0) return Point::Zero(g.n);
    scale = std::pow(b / g.radius, 2.0 - g.n);
  }
  const Point v = x - g.image_point(xi);
  return scale * (2.0 - g.n) * std::pow(v.norm(), -double(g.n)) * v;
}

/// Gradient of H(x, xi) with respect to xi, via the symmetry H(x, xi) = H(xi, x).
inline Point grad_regular_part_xi(const GreenKernel& g, const Point& x, const Point& xi) {
  return grad_regular_part(g, xi, x);
}

inline double green_function(const GreenKernel& g, const Point& x, const Point& y) {
  return g.gamma_n() * (std::pow((x - y).norm(), 2.0 - g.n) - green_regular_part(g, x, y));
}

/// Two-term projection U - alpha delta^{(n-2)/2} H(x, xi).
inline double project_bubble(const GreenKernel& g, const SpaceDims& d, const Bubble& b,
                             const Point& x) {
  if (!(g.boundary_distance(b.xi) > 0.0))
    throw DomainError("bubble centre on or outside the boundary");
  return eval_bubble(d, b, x) - d.alpha * std::pow(b.delta, d.m()) * green_regular_part(g, x, b.xi);
}

/// Two-term projections of the kernel functions, j in {0, n}.
inline double project_psi(const GreenKernel& g, const SpaceDims& d, const Bubble& b, int j,
                          const Point& x) {
  if (!(g.boundary_distance(b.xi) > 0.0))
    throw DomainError("bubble centre on or outside the boundary");
  const double psi = eval_psi(d, b, j, x);
  const double m = d.m();
  if (j == 0)
    return psi - d.alpha * m * std::pow(b.delta, m - 1) * green_regular_part(g, x, b.xi);
  return psi - d.alpha * std::pow(b.delta, m) * grad_regular_part_xi(g, x, b.xi)(d.n - 1);
}

/// Harmonic correction h = U - PU written as a single image charge,
/// h(x) = coef |x - eta|^{2-n}, or a constant when the bubble sits at the ball centre.
template <class T>
struct ImageCharge {
  T coef{};
  T eta{};  ///< position of the image on the symmetry axis
  bool constant = false;
  T value{};
};

/// Image charge of a bubble centred at height xi on the x_n axis. Exact: U - h vanishes on
/// the boundary and h is harmonic in the domain.
template <class T>
ImageCharge<T> image_charge(const GreenKernel& g, const SpaceDims& d, T delta, T xi) {
  using std::pow;
  using std::sqrt;
  ImageCharge<T> ic;
  const double m = d.m();
  if (g.kind == DomainKind::HalfSpace) {
    ic.coef = d.alpha * pow(delta, m);
    ic.eta = -sqrt(delta * delta + xi * xi);
    return ic;
  }
  g.require_kind();
  const double R2 = g.radius * g.radius;
  T w = xi - g.center_z;
  T b = w * w;
  if (value_of(b) < 1e-30 * R2) {
    ic.constant = true;
    ic.value = d.alpha * pow(delta, m) * pow(delta * delta + R2, -m);
    return ic;
  }
  // b lambda^2 - (delta^2 + R^2 + b) lambda + R^2 = 0, root with the image outside the ball
  T B = delta * delta + R2 + b;
  T disc = sqrt(B * B - 4.0 * b * R2);
  T lambda = (B + disc) / (2.0 * b);
  ic.coef = d.alpha * pow(lambda * delta, m);
  ic.eta = g.center_z + lambda * w;
  return ic;
}

template <class T>
T eval_image(const SpaceDims& d, const ImageCharge<T>& ic, double r, double z) {
  using std::pow;
  if (ic.constant) return ic.value;
  T dz = z - ic.eta;
  return ic.coef * pow(r * r + dz * dz, -d.m());
}

template <class T>
T axis_bubble(const SpaceDims& d, T delta, T xi, double r, double z) {
  using std::pow;
  T dz = z - xi;
  return d.alpha * pow(delta, d.m()) * pow(delta * delta + r * r + dz * dz, -d.m());
}

/// Exact projection of an on-axis bubble at the meridian point (r, z).
template <class T>
T axis_projected_bubble(const GreenKernel& g, const SpaceDims& d, T delta, T xi, double r,
                        double z) {
  return axis_bubble(d, delta, xi, r, z) - eval_image(d, image_charge(g, d, delta, xi), r, z);
}

/// Exact projection at a general point; the bubble centre must lie on the x_n axis.
inline double exact_project_bubble(const GreenKernel& g, const SpaceDims& d, const Bubble& b,
                                   const Point& x) {
  if (b.xi.head(d.n - 1).norm() != 0.0)
    throw DomainError("exact projection needs a centre on the symmetry axis");
  if (!(g.boundary_distance(b.xi) > 0.0))
    throw DomainError("bubble centre on or outside the boundary");
  const double r = x.head(d.n - 1).norm();
  return axis_projected_bubble<double>(g, d, b.delta, b.xi(d.n - 1), r, x(d.n - 1));
}

/// Exact projections of the kernel functions, obtained by differentiating the image charge.
inline double exact_project_psi(const GreenKernel& g, const SpaceDims& d, const Bubble& b, int j,
                                const Point& x) {
  if (j != 0 && j != d.n)
    throw IndexError("kernel index must be 0 or n, got " + std::to_string(j));
  const double r = x.head(d.n - 1).norm();
  Dual<> delta(b.delta, j == 0 ? 1.0 : 0.0);
  Dual<> xi(b.xi(d.n - 1), j == 0 ? 0.0 : 1.0);
  return axis_projected_bubble(g, d, delta, xi, r, x(d.n - 1)).d;
}

/// Weight a(x). Affine: a0 + beta x_n. Product: prod_i (|x_{c_i}| + offset)^{kappa_i} over the
/// last m coordinates, where x_n enters without the absolute value.
class WeightModel {
 public:
  enum class Kind { Affine, Product };

  static WeightModel affine(int n, double a0, double beta) {
    if (!(a0 > 0.0)) throw DomainError("weight needs a(xi0) = a0 > 0");
    if (!(beta > 0.0)) throw DomainError("weight needs a positive normal derivative beta > 0");
    WeightModel w;
    w.kind_ = Kind::Affine;
    w.n_ = n;
    w.a0_ = a0;
    w.beta_ = beta;
    return w;
  }

  static WeightModel product(int n, std::vector<int> kappas, double offset) {
    if (kappas.empty() || int(kappas.size()) > n)
      throw DomainError("product weight needs 1..n exponents");
    for (int k : kappas)
      if (k <= 0) throw DomainError("product weight exponents must be positive");
    if (!(offset > 0.0)) throw DomainError("product weight offset must be positive");
    WeightModel w;
    w.kind_ = Kind::Product;
    w.n_ = n;
    w.kappas_ = std::move(kappas);
    w.offset_ = offset;
    return w;
  }

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  double beta() const { return beta_; }
  const std::vector<int>& kappas() const { return kappas_; }
  double offset() const { return offset_; }

  double eval(const Point& x) const {
    if (kind_ == Kind::Affine) return a0_ + beta_ * x(n_ - 1);
    double a = 1.0;
    const int m = int(kappas_.size());
    for (int i = 0; i < m; ++i) {
      const int c = n_ - m + i;
      const double xc = c == n_ - 1 ? x(c) : std::abs(x(c));
      a *= std::pow(xc + offset_, kappas_[i]);
    }
    return a;
  }

  Point grad(const Point& x) const {
    Point g = Point::Zero(n_);
    if (kind_ == Kind::Affine) {
      g(n_ - 1) = beta_;
      return g;
    }
    const double a = eval(x);
    const int m = int(kappas_.size());
    for (int i = 0; i < m; ++i) {
      const int c = n_ - m + i;
      const double sgn = c == n_ - 1 ? 1.0 : (x(c) < 0 ? -1.0 : 1.0);
      const double xc = c == n_ - 1 ? x(c) : std::abs(x(c));
      g(c) = a * kappas_[i] * sgn / (xc + offset_);
    }
    return g;
  }

  double a_at_xi0() const { return eval(Point::Zero(n_)); }
  double dnu_a() const { return grad(Point::Zero(n_))(n_ - 1); }

  /// True when a depends only on (|x'|, x_n), as the meridian discretization requires.
  bool axisymmetric() const { return kind_ == Kind::Affine || kappas_.size() == 1; }

  double eval_axis(double /*r*/, double z) const {
    return kind_ == Kind::Affine ? a0_ + beta_ * z : std::pow(z + offset_, kappas_[0]);
  }
  double dz_axis(double z) const {
    return kind_ == Kind::Affine ? beta_
                                 : kappas_[0] * std::pow(z + offset_, kappas_[0] - 1);
  }

  /// (min, max) of a over the sample points.
  std::pair<double, double> bounds(const std::vector<Point>& samples) const {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& x : samples) {
      const double a = eval(x);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    return {lo, hi};
  }

 private:
  Kind kind_ = Kind::Affine;
  int n_ = 4;
  double a0_ = 1.0, beta_ = 1.0;
  std::vector<int> kappas_;
  double offset_ = 1.0;
};

/// Lift to R^N: the first n - m coordinates are copied, each following block y^i of size
/// kappa_i + 1 is replaced by its norm.
struct LiftSpec {
  std::vector<int> kappas;
  int N = 0;

  int n() const {
    int s = 0;
    for (int k : kappas) s += k;
    return N - s;
  }

  void validate() const {
    int s = 0;
    for (int k : kappas) {
      if (k <= 0) throw DomainError("lift exponents must be positive");
      s += k;
    }
    if (s > N - 3) throw DomainError("lift needs sum(kappa) <= N - 3");
    if (N - s < 4) throw DimensionError("lift leaves reduced dimension n < 4");
    if (int(kappas.size()) > N - s) throw DomainError("more lift blocks than coordinates");
  }
};

inline Point lift_project(const LiftSpec& spec, const Point& Y) {
  spec.validate();
  if (Y.size() != spec.N) throw DomainError("lift point has wrong dimension");
  const int n = spec.n();
  const int m = int(spec.kappas.size());
  Point x(n);
  int pos = 0;
  for (int i = 0; i < n - m; ++i) x(i) = Y(pos++);
  for (int i = 0; i < m; ++i) {
    const int len = spec.kappas[i] + 1;
    x(n - m + i) = Y.segment(pos, len).norm();
    pos += len;
  }
  return x;
}

inline double lift_evaluate(const std::function<double(const Point&)>& u, const LiftSpec& spec,
                            const Point& Y, const GreenKernel* domain = nullptr) {
  const Point x = lift_project(spec, Y);
  if (domain && domain->boundary_distance(x) < 0.0)
    throw DomainError("lifted point projects outside the reduced domain");
  return u(x);
}

}  // namespace towerlab
