#pragma once

#include <cmath>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/quadrature.hpp"
#include "towerlab/reduced_energy.hpp"

namespace towerlab {

/// Closed-form tower V = sum (-1)^{i+1} PU_i on a model domain, evaluated in meridian
/// coordinates. Each PU_i is the exact projection given by an image charge.
class Ansatz {
 public:
  Ansatz(const GreenKernel& g, const SpaceDims& d, const TowerGeometry& geo)
      : g_(g), d_(d), geo_(geo) {
    g_.require_kind();
    for (int i = 0; i < geo.k(); ++i) {
      if (!(g_.boundary_distance(0.0, geo.xi[i]) > 0.0))
        throw DomainError("bubble centre outside the domain");
      images_.push_back(image_charge<double>(g_, d_, geo.delta[i], geo.xi[i]));
    }
  }

  struct Values {
    double V = 0, Vr = 0, Vz = 0;
    double Up = 0;  ///< sum (-1)^{i+1} U_i^p, equal to -Laplacian(V)
  };

  Values eval(double r, double z) const {
    Values out;
    const double m = d_.m();
    for (int i = 0; i < geo_.k(); ++i) {
      const double sg = i % 2 == 0 ? 1.0 : -1.0;
      const double dl = geo_.delta[i];
      const double c = d_.alpha * std::pow(dl, m);
      const double dz = z - geo_.xi[i];
      const double q = dl * dl + r * r + dz * dz;
      const double qm = std::pow(q, -m);
      const double U = c * qm;
      const double dU = -(d_.n - 2) * U / q;
      double h = 0, hr = 0, hz = 0;
      const auto& ic = images_[i];
      if (ic.constant) {
        h = ic.value;
      } else {
        const double ez = z - ic.eta;
        const double q2 = r * r + ez * ez;
        h = ic.coef * std::pow(q2, -m);
        const double dh = -(d_.n - 2) * h / q2;
        hr = dh * r;
        hz = dh * ez;
      }
      out.V += sg * (U - h);
      out.Vr += sg * (dU * r - hr);
      out.Vz += sg * (dU * dz - hz);
      out.Up += sg * std::pow(U, d_.p);
    }
    return out;
  }

  double value(double r, double z) const {
    double v = 0;
    for (int i = 0; i < geo_.k(); ++i) {
      const double sg = i % 2 == 0 ? 1.0 : -1.0;
      v += sg * (axis_bubble<double>(d_, geo_.delta[i], geo_.xi[i], r, z) -
                 eval_image(d_, images_[i], r, z));
    }
    return v;
  }

  /// Exact P psi_i^j for level i (0-based), j = 0 (delta derivative) or n (xi_n derivative).
  double psi(int i, int j, double r, double z) const {
    if (j != 0 && j != d_.n) throw IndexError("kernel index must be 0 or n");
    Dual<> dl(geo_.delta[i], j == 0 ? 1.0 : 0.0);
    Dual<> xi(geo_.xi[i], j == 0 ? 0.0 : 1.0);
    return axis_projected_bubble(g_, d_, dl, xi, r, z).d;
  }

  double bubble(int i, double r, double z) const {
    return axis_bubble<double>(d_, geo_.delta[i], geo_.xi[i], r, z);
  }

  double projected(int i, double r, double z) const {
    return bubble(i, r, z) - eval_image(d_, images_[i], r, z);
  }

  const TowerGeometry& geometry() const { return geo_; }
  const GreenKernel& kernel() const { return g_; }
  const SpaceDims& dims() const { return d_; }

 private:
  GreenKernel g_;
  SpaceDims d_;
  TowerGeometry geo_;
  std::vector<ImageCharge<double>> images_;
};

/// |u|^{q-1} u with value 0 at u = 0.
inline double signed_power(double u, double q) {
  if (u == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(u), q), u);
}

struct EnergyPlanOptions {
  double panel_width = 0.2;         ///< in log(rho)
  double cutoff_below_delta = 12.0;  ///< e-folds below the smallest scale
  double far_radius = 1e5;          ///< outer cutoff on unbounded domains
  int order = 20;
};

/// Polar plan for a tower centred at eps t. Panel counts depend on (n, k, eps) only, so the
/// quadrature is a smooth function of (t, d, s).
inline PolarPlan tower_polar_plan(const GreenKernel& g, int n, int k, double eps,
                                  const TowerGeometry& geo, const EnergyPlanOptions& o = {}) {
  const AxisRegion region = AxisRegion::from_kernel(g);
  const double zc = geo.center;
  const double gap = region.boundary_gap(zc);
  const double depth = (concentration_exponent(n, k) - 1.0) * std::abs(std::log(eps)) +
                       o.cutoff_below_delta;
  const int n_in = int(std::ceil(depth / o.panel_width));
  const double rho_lo = gap * std::exp(-depth);
  const double rho_hi = std::isfinite(region.rho_max(zc)) ? region.rho_max(zc) : o.far_radius;
  const double span = std::isfinite(region.rho_max(zc)) ? std::log(2.0 * g.radius / eps)
                                                         : std::log(o.far_radius / eps);
  const int n_out = int(std::ceil(span / o.panel_width));
  return make_polar_plan(n, zc, gap, rho_lo, rho_hi, n_in, n_out, o.order);
}

/// Energy J_eps(V) = int a |grad V|^2 / 2 - a |V|^{p+1-eps} / (p+1-eps) of the closed-form tower.
inline double ansatz_energy(const GreenKernel& g, const WeightModel& w, const TowerConfig& cfg,
                            double eps, const EnergyPlanOptions& o = {}) {
  if (!w.axisymmetric()) throw DomainError("ansatz energy needs an axisymmetric weight");
  const SpaceDims d = dims_constants(g.n);
  const TowerGeometry geo = tower_geometry(cfg, g.n, eps);
  const Ansatz V(g, d, geo);
  const PolarPlan plan = tower_polar_plan(g, g.n, cfg.k, eps, geo, o);
  const double q = d.p + 1.0 - eps;
  auto f = [&](double r, double z) {
    const auto v = V.eval(r, z);
    const double a = w.eval_axis(r, z);
    return a * (0.5 * (v.Vr * v.Vr + v.Vz * v.Vz) - std::pow(std::abs(v.V), q) / q);
  };
  return integrate_polar(plan, AxisRegion::from_kernel(g), g.n, f);
}

}  // namespace towerlab
