#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/ansatz.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/quadrature.hpp"
#include "towerlab/reduced_energy.hpp"
#include "towerlab/regression.hpp"

namespace towerlab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Computational domain in the meridian half-plane r >= 0.
/// Slab: [0, extent_r] x [0, extent_z], a truncation of the half-space {x_n > 0}; the far sides
/// carry Dirichlet data of the exact half-space projection. Ball: centre (0, center_z), radius.
struct DomainModel {
  enum class Kind { Slab, Ball };
  Kind kind = Kind::Slab;
  double extent_r = 1.0;
  double extent_z = 1.0;
  double center_z = 1.0;
  double radius = 1.0;

  static DomainModel slab(double lr = 1.0, double lz = 1.0) { return {Kind::Slab, lr, lz, 0.0, 1.0}; }
  static DomainModel ball(double center_z = 1.0, double radius = 1.0) {
    return {Kind::Ball, radius, 2.0 * radius, center_z, radius};
  }

  GreenKernel kernel(int n) const {
    return kind == Kind::Slab ? half_space_kernel(n) : ball_kernel(n, center_z, radius);
  }
};

/// Geometric grading toward r = 0 and z = focus_z with smallest spacing min_spacing.
/// min_spacing <= 0 gives a uniform grid.
struct Grading {
  double min_spacing = 0.0;
  double focus_z = 0.0;
};

namespace detail {

/// Cells on one side of the focus: first spacing h, ratio q, total length L.
inline double geometric_length(double h, double q, int cells) {
  return std::abs(q - 1.0) < 1e-14 ? h * cells : h * (std::pow(q, cells) - 1.0) / (q - 1.0);
}

inline double solve_ratio(double h, double L, int cells) {
  if (h * cells >= L) return 1.0;
  double lo = 1.0, hi = 2.0;
  while (geometric_length(h, hi, cells) < L) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (geometric_length(h, mid, cells) < L ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Distances from the start of a side, first spacing h, exact end at L.
inline std::vector<double> geometric_side(double h, double L, int cells) {
  std::vector<double> x{0.0};
  const double q = solve_ratio(h, L, cells);
  if (q == 1.0) {
    for (int i = 1; i <= cells; ++i) x.push_back(L * i / cells);
    return x;
  }
  double step = h, pos = 0.0;
  for (int i = 1; i < cells; ++i) {
    pos += step;
    x.push_back(pos);
    step *= q;
  }
  x.push_back(L);
  return x;
}

inline std::vector<double> graded_axis(double lo, double hi, double focus, double h, int cells) {
  std::vector<double> out;
  if (!(h > 0.0)) {
    for (int i = 0; i <= cells; ++i) out.push_back(lo + (hi - lo) * i / cells);
    return out;
  }
  focus = std::clamp(focus, lo, hi);
  const double Ld = focus - lo, Lu = hi - focus;
  if (Ld <= h || Lu <= h) {
    const bool up = Lu >= Ld;
    const auto side = geometric_side(h, hi - lo, cells);
    for (double x : side) out.push_back(up ? lo + x : hi - x);
    std::sort(out.begin(), out.end());
    return out;
  }
  // common ratio first, then integer split and per-side ratios
  auto sigma = [&](double L, double q) { return std::log1p(L * (q - 1.0) / h) / std::log(q); };
  double qlo = 1.0 + 1e-12, qhi = 2.0;
  while (sigma(Ld, qhi) + sigma(Lu, qhi) > cells) qhi *= 2.0;
  if (sigma(Ld, qlo) + sigma(Lu, qlo) <= cells) qhi = qlo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (qlo + qhi);
    (sigma(Ld, mid) + sigma(Lu, mid) > cells ? qlo : qhi) = mid;
  }
  const double q = 0.5 * (qlo + qhi);
  int nd = int(std::lround(cells * sigma(Ld, q) / (sigma(Ld, q) + sigma(Lu, q))));
  nd = std::clamp(nd, 1, cells - 1);
  const auto dn = geometric_side(h, Ld, nd);
  const auto upx = geometric_side(h, Lu, cells - nd);
  for (auto it = dn.rbegin(); it != dn.rend(); ++it) out.push_back(focus - *it);
  for (std::size_t i = 1; i < upx.size(); ++i) out.push_back(focus + upx[i]);
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace detail

struct AxisymGrid {
  int n = 4;
  DomainModel domain;
  std::vector<double> r, z;
  std::vector<double> r_half;  ///< dual-cell edges in r, size nr + 1 (r_half[0] = 0)
  std::vector<double> z_half;  ///< dual-cell edges in z, size nz + 1
  std::vector<int> dof;        ///< node -> unknown index, -1 on boundary nodes
  std::vector<int> nodes;      ///< unknown -> node
  std::vector<double> measure;  ///< n-dimensional volume of each node's dual cell inside the domain

  std::size_t nr() const { return r.size(); }
  std::size_t nz() const { return z.size(); }
  std::size_t node_count() const { return r.size() * z.size(); }
  std::size_t unknowns() const { return nodes.size(); }
  int node(std::size_t j, std::size_t l) const { return int(j * z.size() + l); }
  double r_of(int node_id) const { return r[node_id / z.size()]; }
  double z_of(int node_id) const { return z[node_id % z.size()]; }
  bool is_boundary(int node_id) const { return dof[node_id] < 0; }
  double total_measure() const {
    double s = 0;
    for (double m : measure) s += m;
    return s;
  }
};

inline AxisymGrid build_grid(const DomainModel& dom, int n, int resolution,
                             const Grading& grading = {}) {
  if (n < 4) throw DimensionError("unsupported dimension n=" + std::to_string(n));
  if (resolution < 16) throw DomainError("grid resolution must be at least 16 cells per axis");
  AxisymGrid g;
  g.n = n;
  g.domain = dom;
  double zlo = 0, zhi = 0, rhi = 0;
  if (dom.kind == DomainModel::Kind::Slab) {
    rhi = dom.extent_r;
    zlo = 0.0;
    zhi = dom.extent_z;
  } else if (dom.kind == DomainModel::Kind::Ball) {
    rhi = dom.radius;
    zlo = dom.center_z - dom.radius;
    zhi = dom.center_z + dom.radius;
  } else {
    throw DomainError("unsupported domain kind for grids");
  }
  g.r = detail::graded_axis(0.0, rhi, 0.0, grading.min_spacing, resolution);
  g.z = detail::graded_axis(zlo, zhi, grading.focus_z, grading.min_spacing, resolution);
  const std::size_t nr = g.r.size(), nz = g.z.size();
  g.r_half.assign(nr + 1, 0.0);
  for (std::size_t j = 1; j < nr; ++j) g.r_half[j] = 0.5 * (g.r[j - 1] + g.r[j]);
  g.r_half[nr] = g.r[nr - 1];
  g.z_half.assign(nz + 1, 0.0);
  g.z_half[0] = g.z[0];
  for (std::size_t l = 1; l < nz; ++l) g.z_half[l] = 0.5 * (g.z[l - 1] + g.z[l]);
  g.z_half[nz] = g.z[nz - 1];

  const double Snm2 = sphere_area_of(n - 1);
  g.dof.assign(nr * nz, -1);
  g.measure.assign(nr * nz, 0.0);
  auto rpow = [&](double a, double b) { return (std::pow(b, n - 1) - std::pow(a, n - 1)) / (n - 1); };
  for (std::size_t j = 0; j < nr; ++j)
    for (std::size_t l = 0; l < nz; ++l) {
      const int id = g.node(j, l);
      const double ra = g.r_half[j], rb = g.r_half[j + 1];
      const double za = g.z_half[l], zb = g.z_half[l + 1];
      bool interior;
      if (dom.kind == DomainModel::Kind::Slab) {
        interior = j + 1 < nr && l > 0 && l + 1 < nz;
        g.measure[id] = Snm2 * rpow(ra, rb) * (zb - za);
      } else {
        const double R = dom.radius, c = dom.center_z;
        const double dz = g.z[l] - c;
        interior = g.r[j] * g.r[j] + dz * dz < R * R * (1.0 - 1e-12);
        // clipped dual cell: int_{za}^{zb} int_{ra}^{min(rb, rho(z))} r^{n-2} dr dz
        auto slice = [&](double zz) {
          const double h2 = R * R - (zz - c) * (zz - c);
          if (h2 <= 0.0) return 0.0;
          const double top = std::min(rb, std::sqrt(h2));
          return top > ra ? rpow(ra, top) : 0.0;
        };
        std::vector<double> br;
        for (double rr : {ra, rb})
          if (rr < R) {
            const double zz = std::sqrt(R * R - rr * rr);
            br.push_back(c - zz);
            br.push_back(c + zz);
          }
        QuadOptions o;
        o.abs_tol = 1e-16;
        o.rel_tol = 1e-13;
        o.throw_on_budget = false;
        g.measure[id] = zb > za ? Snm2 * integrate_adaptive(slice, za, zb, o, br).value : 0.0;
      }
      if (interior) {
        g.dof[id] = int(g.nodes.size());
        g.nodes.push_back(id);
      }
    }
  if (g.nodes.empty()) throw DomainError("grid has no interior nodes");
  return g;
}

/// Nodal values on every grid node. For H^1_0 members the boundary entries are zero.
struct Field {
  std::vector<double> values;
  double epsilon = 0.0;
  std::string description;
};

/// Finite-volume stiffness for -div(a grad u) on the meridian grid. Face (i, j) carries
/// coefficient c with sum over faces of c (u_i - u_j)^2 = int a |grad u|^2 for the discrete u.
struct Operator {
  std::vector<int> fa, fb;
  std::vector<double> fc;
  SpMat K;            ///< unknown-unknown block
  std::vector<int> bnd_row, bnd_node;  ///< unknown-boundary couplings
  std::vector<double> bnd_coef;
};

inline Operator assemble_operator(const AxisymGrid& g, const std::function<double(double, double)>& a) {
  Operator op;
  const double Snm2 = sphere_area_of(g.n - 1);
  const std::size_t nr = g.nr(), nz = g.nz();
  auto add_face = [&](int i, int j, double c) {
    if (g.dof[i] < 0 && g.dof[j] < 0) return;
    op.fa.push_back(i);
    op.fb.push_back(j);
    op.fc.push_back(c);
  };
  for (std::size_t j = 0; j + 1 < nr; ++j) {
    const double rf = g.r_half[j + 1];
    for (std::size_t l = 0; l < nz; ++l) {
      const double wz = g.z_half[l + 1] - g.z_half[l];
      if (wz <= 0) continue;
      add_face(g.node(j, l), g.node(j + 1, l),
               Snm2 * a(rf, g.z[l]) * std::pow(rf, g.n - 2) * wz / (g.r[j + 1] - g.r[j]));
    }
  }
  for (std::size_t j = 0; j < nr; ++j) {
    const double wr = (std::pow(g.r_half[j + 1], g.n - 1) - std::pow(g.r_half[j], g.n - 1)) / (g.n - 1);
    for (std::size_t l = 0; l + 1 < nz; ++l) {
      const double zf = 0.5 * (g.z[l] + g.z[l + 1]);
      add_face(g.node(j, l), g.node(j, l + 1), Snm2 * a(g.r[j], zf) * wr / (g.z[l + 1] - g.z[l]));
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t f = 0; f < op.fc.size(); ++f) {
    const int i = op.fa[f], j = op.fb[f];
    const int di = g.dof[i], dj = g.dof[j];
    const double c = op.fc[f];
    if (di >= 0) trip.emplace_back(di, di, c);
    if (dj >= 0) trip.emplace_back(dj, dj, c);
    if (di >= 0 && dj >= 0) {
      trip.emplace_back(di, dj, -c);
      trip.emplace_back(dj, di, -c);
    } else if (di >= 0) {
      op.bnd_row.push_back(di);
      op.bnd_node.push_back(j);
      op.bnd_coef.push_back(-c);
    } else {
      op.bnd_row.push_back(dj);
      op.bnd_node.push_back(i);
      op.bnd_coef.push_back(-c);
    }
  }
  op.K.resize(int(g.unknowns()), int(g.unknowns()));
  op.K.setFromTriplets(trip.begin(), trip.end());
  op.K.makeCompressed();
  return op;
}

/// Symmetric solve: LDL^T first, sparse LU when the factorization fails or is inaccurate.
class SymmetricSolver {
 public:
  void factorize(const SpMat& A) {
    A_ = &A;
    use_lu_ = false;
    if (!analyzed_) {
      ldlt_.analyzePattern(A);
      analyzed_ = true;
    }
    ldlt_.factorize(A);
    if (ldlt_.info() != Eigen::Success) switch_to_lu();
  }

  Vec solve(const Vec& b) {
    if (!use_lu_) {
      Vec x = ldlt_.solve(b);
      const double bn = b.norm();
      if (ldlt_.info() == Eigen::Success && x.allFinite() &&
          (bn == 0.0 || ((*A_) * x - b).norm() <= 1e-9 * bn))
        return x;
      switch_to_lu();
    }
    Vec x = lu_.solve(b);
    if (lu_.info() != Eigen::Success || !x.allFinite())
      throw SolverError("sparse linear solve failed (singular matrix)");
    return x;
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) {
    Eigen::MatrixXd X(B.rows(), B.cols());
    for (int c = 0; c < B.cols(); ++c) X.col(c) = solve(Vec(B.col(c)));
    return X;
  }

 private:
  void switch_to_lu() {
    if (use_lu_) return;
    lu_.analyzePattern(*A_);
    lu_.factorize(*A_);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
    use_lu_ = true;
  }

  const SpMat* A_ = nullptr;
  bool analyzed_ = false;
  bool use_lu_ = false;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

/// Analytic background field: u = V + phi with phi in H^1_0. `image` holds -div(a grad V) at
/// the nodes, so the discrete operator only ever acts on phi.
struct Background {
  std::vector<double> values;
  std::vector<double> image;
};

/// -div(a grad u) = a f(u) + a * forcing in the slab or ball, u = boundary data.
/// f(u) = |u|^{p-1-eps} u, or f(u) = u when `linear` is set.
class DiscreteProblem {
 public:
  DiscreteProblem(std::shared_ptr<const AxisymGrid> grid, WeightModel weight, double eps,
                  bool linear = false)
      : grid_(std::move(grid)), weight_(std::move(weight)), eps_(eps), linear_(linear) {
    dims_ = dims_constants(grid_->n);
    if (!(eps >= 0.0 && eps < 4.0 / (grid_->n - 2)))
      throw DomainError("eps must lie in [0, 4/(n-2))");
    if (!weight_.axisymmetric())
      throw DomainError("the meridian discretization needs an axisymmetric weight");
    const auto& g = *grid_;
    op_ = assemble_operator(g, [&](double r, double z) { return weight_.eval_axis(r, z); });
    a_.resize(g.node_count());
    for (std::size_t id = 0; id < g.node_count(); ++id)
      a_[id] = weight_.eval_axis(g.r_of(int(id)), g.z_of(int(id)));
    ma_.resize(g.unknowns());
    mass_.resize(g.unknowns());
    for (std::size_t i = 0; i < g.unknowns(); ++i) {
      mass_(i) = g.measure[g.nodes[i]];
      ma_(i) = mass_(i) * a_[g.nodes[i]];
    }
    exponent_ = dims_.p - eps;
  }

  const AxisymGrid& grid() const { return *grid_; }
  std::shared_ptr<const AxisymGrid> grid_ptr() const { return grid_; }
  const WeightModel& weight() const { return weight_; }
  const SpaceDims& dims() const { return dims_; }
  double epsilon() const { return eps_; }
  bool linear() const { return linear_; }
  const Operator& op() const { return op_; }
  const Vec& mass() const { return mass_; }
  const Vec& mass_a() const { return ma_; }
  double a_at(int node) const { return a_[node]; }

  void set_background(Background bg) { bg_ = std::move(bg); }
  const Background* background() const { return bg_.values.empty() ? nullptr : &bg_; }
  void set_forcing(std::vector<double> f) { forcing_ = std::move(f); }

  double f(double u) const { return linear_ ? u : signed_power(u, exponent_); }
  double fprime(double u) const {
    if (linear_) return 1.0;
    return exponent_ * std::pow(std::max(std::abs(u), 1e-300), exponent_ - 1.0);
  }

  /// Stiffness solves with a cached factorization.
  Vec solve_stiffness(const Vec& b) const {
    if (!stiff_) {
      stiff_ = std::make_shared<SymmetricSolver>();
      stiff_->factorize(op_.K);
    }
    return stiff_->solve(b);
  }

  Vec restrict(const Field& u) const {
    Vec x(grid_->unknowns());
    for (std::size_t i = 0; i < grid_->unknowns(); ++i) x(i) = u.values[grid_->nodes[i]];
    return x;
  }

  /// Weak residual at the unknowns.
  Vec weak_residual(const Field& u) const {
    const auto& g = *grid_;
    std::vector<double> w(u.values);
    if (background())
      for (std::size_t id = 0; id < w.size(); ++id) w[id] -= bg_.values[id];
    Vec wi(g.unknowns());
    for (std::size_t i = 0; i < g.unknowns(); ++i) wi(i) = w[g.nodes[i]];
    Vec F = op_.K * wi;
    for (std::size_t b = 0; b < op_.bnd_row.size(); ++b)
      F(op_.bnd_row[b]) += op_.bnd_coef[b] * w[op_.bnd_node[b]];
    for (std::size_t i = 0; i < g.unknowns(); ++i) {
      const int id = g.nodes[i];
      double src = f(u.values[id]);
      if (!forcing_.empty()) src += forcing_[id];
      F(i) -= ma_(i) * src;
      if (background()) F(i) += mass_(i) * bg_.image[id];
    }
    return F;
  }

  SpMat jacobian(const Field& u) const {
    SpMat J = op_.K;
    for (std::size_t i = 0; i < grid_->unknowns(); ++i)
      J.coeffRef(int(i), int(i)) -= ma_(i) * fprime(u.values[grid_->nodes[i]]);
    return J;
  }

  /// Dual norm sqrt(F^T K^{-1} F) of a weak residual.
  double dual_norm(const Vec& F) const {
    const Vec y = solve_stiffness(F);
    return std::sqrt(std::max(F.dot(y), 0.0));
  }

  /// sqrt(int a |grad w|^2) of a nodal field, boundary differences included.
  double energy_norm(const std::vector<double>& w) const {
    double s = 0;
    for (std::size_t f = 0; f < op_.fc.size(); ++f) {
      const double d = w[op_.fa[f]] - w[op_.fb[f]];
      s += op_.fc[f] * d * d;
    }
    return std::sqrt(s);
  }

 private:
  std::shared_ptr<const AxisymGrid> grid_;
  WeightModel weight_;
  SpaceDims dims_;
  double eps_;
  bool linear_;
  double exponent_ = 3.0;
  Operator op_;
  std::vector<double> a_;
  Vec ma_, mass_;
  Background bg_;
  std::vector<double> forcing_;
  mutable std::shared_ptr<SymmetricSolver> stiff_;
};

inline Field zero_field(const AxisymGrid& g, double eps = 0.0) {
  return {std::vector<double>(g.node_count(), 0.0), eps, ""};
}

inline Field prolong(const DiscreteProblem& prob, const Vec& x, const Field* boundary = nullptr) {
  Field u = boundary ? *boundary : zero_field(prob.grid(), prob.epsilon());
  for (std::size_t i = 0; i < prob.grid().unknowns(); ++i) u.values[prob.grid().nodes[i]] = x(i);
  return u;
}

/// Solves -div(a grad u) = a * source with u = 0 on the boundary.
inline Field solve_istar(const DiscreteProblem& prob, const Field& source) {
  const auto& g = prob.grid();
  if (source.values.size() != g.node_count()) throw DomainError("source field has the wrong size");
  Vec b(g.unknowns());
  for (std::size_t i = 0; i < g.unknowns(); ++i) {
    const double s = source.values[g.nodes[i]];
    if (!std::isfinite(s)) throw DomainError("source field is not finite");
    b(i) = prob.mass_a()(i) * s;
  }
  const Vec x = prob.solve_stiffness(b);
  Field u = prolong(prob, x);
  u.epsilon = prob.epsilon();
  u.description = "istar";
  return u;
}

/// Strong-form residual -div(a grad u) - a f(u) at the unknowns, zero on boundary nodes.
inline Field residual(const DiscreteProblem& prob, const Field& u) {
  const Vec F = prob.weak_residual(u);
  Field r = zero_field(prob.grid(), prob.epsilon());
  for (std::size_t i = 0; i < prob.grid().unknowns(); ++i)
    r.values[prob.grid().nodes[i]] = F(i) / prob.mass()(i);
  r.description = "residual";
  return r;
}

/// J(u) = int a |grad u|^2 / 2 - int a |u|^{p+1-eps} / (p+1-eps) by grid quadrature.
inline double energy_of(const DiscreteProblem& prob, const Field& u) {
  const auto& g = prob.grid();
  const double dir = prob.energy_norm(u.values);
  const double q = prob.linear() ? 2.0 : prob.dims().p + 1.0 - prob.epsilon();
  double pot = 0;
  for (std::size_t id = 0; id < g.node_count(); ++id)
    pot += g.measure[id] * prob.a_at(int(id)) * std::pow(std::abs(u.values[id]), q);
  return 0.5 * dir * dir - pot / q;
}

struct NewtonOptions {
  double tol = 1e-10;        ///< on the dual residual norm
  double rel_tol = 0.0;      ///< relative to the initial residual, combined by max
  int max_iter = 40;
  int max_halvings = 30;
};

struct NewtonResult {
  Field u;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  double correction_norm = 0.0;  ///< weighted H^1 norm of u - u0
  std::vector<double> trace;
};

/// Full damped Newton. Steps are halved until the dual residual norm decreases (Armijo).
inline NewtonResult newton_solve(const DiscreteProblem& prob, const Field& u0,
                                 const NewtonOptions& opt = {}) {
  for (double v : u0.values)
    if (!std::isfinite(v)) throw DomainError("initial field is not finite");
  NewtonResult res;
  res.u = u0;
  Vec F = prob.weak_residual(res.u);
  double nr = prob.dual_norm(F);
  const double target = std::max(opt.tol, opt.rel_tol * nr);
  res.trace.push_back(nr);
  SymmetricSolver lin;
  const auto& g = prob.grid();
  while (nr >= target && res.iterations < opt.max_iter) {
    const SpMat J = prob.jacobian(res.u);
    lin.factorize(J);
    Vec step;
    try {
      step = lin.solve(Vec(-F));
    } catch (const SolverError& e) {
      throw SolverError(std::string("singular Jacobian: ") + e.what(), res.trace, prob.epsilon());
    }
    double lam = 1.0;
    Field trial = res.u;
    Vec F2;
    double nr2 = nr;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      for (std::size_t i = 0; i < g.unknowns(); ++i)
        trial.values[g.nodes[i]] = res.u.values[g.nodes[i]] + lam * step(i);
      F2 = prob.weak_residual(trial);
      nr2 = prob.dual_norm(F2);
      if (nr2 < (1.0 - 1e-4 * lam) * nr) break;
      lam *= 0.5;
    }
    ++res.iterations;
    if (!(nr2 < nr)) {
      res.trace.push_back(nr2);
      break;  // line search failed; report honestly
    }
    res.u = trial;
    F = F2;
    nr = nr2;
    res.trace.push_back(nr);
  }
  res.residual_norm = nr;
  res.converged = nr < target;
  std::vector<double> diff(res.u.values);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= u0.values[i];
  res.correction_norm = prob.energy_norm(diff);
  res.u.epsilon = prob.epsilon();
  return res;
}

/// Span of the exact kernel projections P psi_i^j, restricted to the unknowns.
struct KernelSubspace {
  Eigen::MatrixXd basis;  ///< unknowns x 2k, columns ordered (i=1,j=0), (i=1,j=n), (i=2,j=0), ...
  Eigen::MatrixXd K_basis;
  Eigen::MatrixXd gram;
  std::vector<double> deltas;
};

inline KernelSubspace kernel_subspace(const DiscreteProblem& prob, const Ansatz& V,
                                      double max_condition = 1e12) {
  const auto& g = prob.grid();
  const int k = V.geometry().k();
  KernelSubspace ks;
  ks.basis.resize(g.unknowns(), 2 * k);
  for (int i = 0; i < k; ++i)
    for (int jj = 0; jj < 2; ++jj) {
      const int j = jj == 0 ? 0 : prob.dims().n;
      for (std::size_t u = 0; u < g.unknowns(); ++u) {
        const int id = g.nodes[u];
        ks.basis(u, 2 * i + jj) = V.psi(i, j, g.r_of(id), g.z_of(id));
      }
    }
  ks.K_basis = prob.op().K * ks.basis;
  ks.gram = ks.basis.transpose() * ks.K_basis;
  ks.deltas = V.geometry().delta;
  // conditioning after diagonal scaling; the raw Gram spans powers of delta_i^{-2}
  const Vec dinv = ks.gram.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd S = dinv.asDiagonal() * ks.gram * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > max_condition)
    throw IllConditioned("kernel Gram matrix is ill-conditioned (condition " +
                         std::to_string(hi / lo) + ")");
  return ks;
}

struct KernelProjection {
  Vec coefficients;
  double orthogonal_norm = 0.0;
  Vec orthogonal;  ///< Pi_perp f at the unknowns
};

/// Least-squares coefficients of f on the kernel span in <u, v> = int a grad u . grad v.
inline KernelProjection kernel_projection(const DiscreteProblem& prob, const KernelSubspace& ks,
                                          const Vec& f) {
  KernelProjection kp;
  const Vec rhs = ks.K_basis.transpose() * f;
  kp.coefficients = ks.gram.ldlt().solve(rhs);
  kp.orthogonal = f - ks.basis * kp.coefficients;
  kp.orthogonal_norm = std::sqrt(std::max(kp.orthogonal.dot(prob.op().K * kp.orthogonal), 0.0));
  return kp;
}

inline KernelProjection kernel_projection(const DiscreteProblem& prob, const KernelSubspace& ks,
                                          const Field& f) {
  return kernel_projection(prob, ks, prob.restrict(f));
}

/// Nodal closed-form ansatz and its operator image -div(a grad V) = a sum(+-U_i^p) - grad a . grad V.
inline Background make_background(const DiscreteProblem& prob, const Ansatz& V) {
  const auto& g = prob.grid();
  Background bg;
  bg.values.resize(g.node_count());
  bg.image.resize(g.node_count());
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double r = g.r_of(int(id)), z = g.z_of(int(id));
    const auto v = V.eval(r, z);
    bg.values[id] = v.V;
    bg.image[id] = prob.weight().eval_axis(r, z) * v.Up - prob.weight().dz_axis(z) * v.Vz;
  }
  return bg;
}

inline Ansatz make_ansatz(const DiscreteProblem& prob, const TowerConfig& cfg) {
  const GreenKernel gk = prob.grid().domain.kernel(prob.grid().n);
  const TowerGeometry geo = tower_geometry(cfg, prob.grid().n, prob.epsilon());
  for (double xi : geo.xi)
    if (!(gk.boundary_distance(0.0, xi) > 0.0)) throw DomainError("bubble centre outside the domain");
  return Ansatz(gk, prob.dims(), geo);
}

/// Discrete projections: PU_i = U_i - h_i with h_i discrete-harmonic (pure Laplacian) and
/// h_i = U_i - PU_i^exact on boundary nodes (U_i on the physical boundary). Returns the
/// alternating sum.
inline Field assemble_ansatz(const DiscreteProblem& prob, const TowerConfig& cfg,
                             std::vector<Field>* projections = nullptr) {
  const auto& g = prob.grid();
  const Ansatz V = make_ansatz(prob, cfg);
  const Operator lap = assemble_operator(g, [](double, double) { return 1.0; });
  SymmetricSolver solver;
  solver.factorize(lap.K);
  Field total = zero_field(g, prob.epsilon());
  total.description = "ansatz";
  for (int i = 0; i < V.geometry().k(); ++i) {
    std::vector<double> hb(g.node_count(), 0.0);
    for (std::size_t id = 0; id < g.node_count(); ++id)
      if (g.dof[id] < 0) {
        const double r = g.r_of(int(id)), z = g.z_of(int(id));
        hb[id] = V.bubble(i, r, z) - V.projected(i, r, z);
      }
    Vec rhs = Vec::Zero(g.unknowns());
    for (std::size_t b = 0; b < lap.bnd_row.size(); ++b)
      rhs(lap.bnd_row[b]) -= lap.bnd_coef[b] * hb[lap.bnd_node[b]];
    const Vec h = solver.solve(rhs);
    Field pu = zero_field(g, prob.epsilon());
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      const double U = V.bubble(i, g.r_of(int(id)), g.z_of(int(id)));
      pu.values[id] = g.dof[id] >= 0 ? U - h(g.dof[id]) : U - hb[id];
    }
    const double sg = i % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t id = 0; id < g.node_count(); ++id) total.values[id] += sg * pu.values[id];
    if (projections) projections->push_back(std::move(pu));
  }
  return total;
}

/// ||R|| with R = Pi_perp (i*(f(V)) - V); -div(a grad V) is taken from the closed form.
inline double error_norm_R(const DiscreteProblem& prob, const Ansatz& V, const KernelSubspace& ks) {
  const auto& g = prob.grid();
  const Background bg = make_background(prob, V);
  Vec b(g.unknowns());
  for (std::size_t i = 0; i < g.unknowns(); ++i) {
    const int id = g.nodes[i];
    b(i) = prob.mass_a()(i) * prob.f(bg.values[id]) - prob.mass()(i) * bg.image[id];
  }
  const Vec w = prob.solve_stiffness(b);
  return kernel_projection(prob, ks, w).orthogonal_norm;
}

inline double error_norm_R(const DiscreteProblem& prob, const TowerConfig& cfg) {
  const Ansatz V = make_ansatz(prob, cfg);
  return error_norm_R(prob, V, kernel_subspace(prob, V));
}

struct ProjectedNewtonResult {
  NewtonResult newton;
  Vec multipliers;
};

/// Newton for phi orthogonal to the kernel span with Lagrange multipliers c:
///   F(u) = K B c,  <u - u0, B_j> = 0.
/// Each step uses one factorization of the Jacobian and a 2k x 2k Schur complement.
inline ProjectedNewtonResult projected_newton_solve(const DiscreteProblem& prob,
                                                    const KernelSubspace& ks, const Field& u0,
                                                    const NewtonOptions& opt = {}) {
  const auto& g = prob.grid();
  const int nb = int(ks.basis.cols());
  const Vec bnorm = ks.gram.diagonal().cwiseSqrt();
  ProjectedNewtonResult out;
  NewtonResult& res = out.newton;
  res.u = u0;
  Vec c = Vec::Zero(nb);
  auto eval = [&](const Field& u, const Vec& cc, Vec& F, Vec& G) {
    F = prob.weak_residual(u) - ks.K_basis * cc;
    Vec phi(g.unknowns());
    for (std::size_t i = 0; i < g.unknowns(); ++i)
      phi(i) = u.values[g.nodes[i]] - u0.values[g.nodes[i]];
    G = ks.K_basis.transpose() * phi;
    return prob.dual_norm(F) + G.cwiseQuotient(bnorm).norm();
  };
  Vec F, G;
  double nr = eval(res.u, c, F, G);
  const double target = std::max(opt.tol, opt.rel_tol * nr);
  res.trace.push_back(nr);
  SymmetricSolver lin;
  while (nr >= target && res.iterations < opt.max_iter) {
    const SpMat J = prob.jacobian(res.u);
    lin.factorize(J);
    const Eigen::MatrixXd X = lin.solve(ks.K_basis);
    const Vec y = lin.solve(Vec(-F));
    const Eigen::MatrixXd S = ks.K_basis.transpose() * X;
    const Vec dc = S.fullPivLu().solve(Vec(-G - ks.K_basis.transpose() * y));
    const Vec step = y + X * dc;
    if (!step.allFinite()) throw SolverError("singular bordered Jacobian", res.trace, prob.epsilon());
    double lam = 1.0, nr2 = nr;
    Field trial = res.u;
    Vec c2, F2, G2;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      for (std::size_t i = 0; i < g.unknowns(); ++i)
        trial.values[g.nodes[i]] = res.u.values[g.nodes[i]] + lam * step(i);
      c2 = c + lam * dc;
      nr2 = eval(trial, c2, F2, G2);
      if (nr2 < (1.0 - 1e-4 * lam) * nr) break;
      lam *= 0.5;
    }
    ++res.iterations;
    if (!(nr2 < nr)) {
      res.trace.push_back(nr2);
      break;
    }
    res.u = trial;
    c = c2;
    F = F2;
    G = G2;
    nr = nr2;
    res.trace.push_back(nr);
  }
  res.residual_norm = nr;
  res.converged = nr < target;
  std::vector<double> diff(res.u.values);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= u0.values[i];
  res.correction_norm = prob.energy_norm(diff);
  out.multipliers = c;
  return out;
}

/// Values on the symmetry axis r = 0 for z >= z_from.
inline std::vector<std::pair<double, double>> axis_profile(const AxisymGrid& g, const Field& u,
                                                           double z_from) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t l = 0; l < g.nz(); ++l)
    if (g.z[l] >= z_from) out.emplace_back(g.z[l], u.values[g.node(0, l)]);
  return out;
}

inline int count_sign_changes(const std::vector<std::pair<double, double>>& prof) {
  int changes = 0, last = 0;
  for (const auto& [z, v] : prof) {
    const int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

/// Extremum magnitudes M_i (level i = 1..k) along the axis ray above the tower centre. The
/// ray meets the levels from the innermost (k) outward, separated by sign changes.
inline std::vector<double> level_extrema(const std::vector<std::pair<double, double>>& prof, int k) {
  std::vector<double> seg_max;
  int last = 0;
  for (const auto& [z, v] : prof) {
    const int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) continue;
    if (s != last) seg_max.push_back(0.0);
    seg_max.back() = std::max(seg_max.back(), std::abs(v));
    last = s;
  }
  if (int(seg_max.size()) < k)
    throw StructureLost("found " + std::to_string(seg_max.size()) + " alternating extrema on the axis, expected " +
                        std::to_string(k));
  std::vector<double> M(k);
  for (int i = 0; i < k; ++i) M[k - 1 - i] = seg_max[i];
  return M;
}

/// Everything the tower experiments need from one discrete problem.
struct TowerTemplate {
  DomainModel domain;
  WeightModel weight = WeightModel::affine(4, 1.0, 1.0);
  int n = 4;
  int resolution = 128;
  double cells_per_delta = 8.0;
  NewtonOptions projected{1e-10, 1e-8, 40, 30};
  NewtonOptions full{1e-10, 0.0, 40, 30};
};

struct TowerSolution {
  double epsilon = 0.0;
  NewtonResult newton;       ///< final full Newton; correction_norm is ||u - V|| at `config`
  NewtonResult projected;    ///< bordered stage at `config`
  Vec multipliers;
  int sign_changes = 0;
  std::vector<double> extrema;  ///< M_i, level 1 first
  double R_norm = 0.0;          ///< at the starting configuration
  int reduced_iterations = 0;   ///< parameter updates of the reduced (multiplier) equation
  TowerConfig config;           ///< reduced parameters of the ansatz the solution was built on
  std::shared_ptr<const AxisymGrid> grid;
  TowerGeometry geometry;
};

inline std::shared_ptr<const AxisymGrid> tower_grid(const TowerTemplate& tt, const TowerGeometry& geo) {
  const double hmin = geo.delta.back() / tt.cells_per_delta;
  return std::make_shared<const AxisymGrid>(
      build_grid(tt.domain, tt.n, tt.resolution, Grading{hmin, geo.center}));
}

namespace detail {

struct BorderedStage {
  TowerConfig cfg;
  Field u0;
  ProjectedNewtonResult pr;
  Vec scaled;  ///< multipliers times basis norms
};

inline BorderedStage bordered_stage(DiscreteProblem& prob, const TowerTemplate& tt, const TowerConfig& cfg) {
  BorderedStage st;
  st.cfg = cfg;
  const Ansatz V = make_ansatz(prob, cfg);
  Background bg = make_background(prob, V);
  st.u0 = Field{bg.values, prob.epsilon(), "ansatz"};
  prob.set_background(std::move(bg));
  const KernelSubspace ks = kernel_subspace(prob, V);
  st.pr = projected_newton_solve(prob, ks, st.u0, tt.projected);
  st.scaled = st.pr.multipliers.cwiseProduct(ks.gram.diagonal().cwiseSqrt());
  return st;
}

}  // namespace detail

/// Two stages: Newton constrained to the complement of the kernel span, then full Newton.
/// When the full step stalls (the linearization is nearly singular along the kernel), the
/// reduced parameters are moved first so that the multipliers vanish.
inline TowerSolution solve_tower(const TowerTemplate& tt, const TowerConfig& cfg, double eps,
                                 int max_reduced = 10) {
  const TowerGeometry geo = tower_geometry(cfg, tt.n, eps);
  auto grid = tower_grid(tt, geo);
  DiscreteProblem prob(grid, tt.weight, eps);
  TowerSolution sol;
  sol.epsilon = eps;
  sol.grid = grid;
  {
    const Ansatz V = make_ansatz(prob, cfg);
    sol.R_norm = error_norm_R(prob, V, kernel_subspace(prob, V));
  }
  auto st = detail::bordered_stage(prob, tt, cfg);
  NewtonResult full = newton_solve(prob, st.pr.newton.u, tt.full);
  std::vector<double> trace = full.trace;
  if (!full.converged) {
    const int dim = 2 * cfg.k;
    for (int it = 0; it < max_reduced; ++it) {
      const Vec x = st.cfg.pack();
      const double g0 = st.scaled.norm();
      Eigen::MatrixXd Jr(dim, dim);
      for (int c = 0; c < dim; ++c) {
        Vec xp = x;
        const double h = 1e-4 * std::max(std::abs(x(c)), 0.1);
        xp(c) += h;
        const auto sp = detail::bordered_stage(prob, tt, TowerConfig::unpack(xp, eps));
        Jr.col(c) = (sp.scaled - st.scaled) / h;
      }
      const Vec dx = Jr.fullPivLu().solve(Vec(-st.scaled));
      double lam = 1.0;
      bool moved = false;
      for (int hlv = 0; hlv < 8; ++hlv, lam *= 0.5) {
        const TowerConfig trial = TowerConfig::unpack(x + lam * dx, eps);
        if (!trial.in_lambda()) continue;
        auto s2 = detail::bordered_stage(prob, tt, trial);
        if (s2.pr.newton.converged && s2.scaled.norm() < g0) {
          st = std::move(s2);
          moved = true;
          break;
        }
      }
      ++sol.reduced_iterations;
      if (!moved) break;
      full = newton_solve(prob, st.pr.newton.u, tt.full);
      trace.insert(trace.end(), full.trace.begin(), full.trace.end());
      if (full.converged) break;
    }
    detail::bordered_stage(prob, tt, st.cfg);  // restore the background of the accepted ansatz
  }
  if (!full.converged) throw SolverError("Newton failed to converge at eps=" + std::to_string(eps), trace, eps);
  sol.config = st.cfg;
  sol.geometry = tower_geometry(st.cfg, tt.n, eps);
  sol.projected = st.pr.newton;
  sol.multipliers = st.pr.multipliers;
  sol.newton = std::move(full);
  std::vector<double> diff(sol.newton.u.values);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= st.u0.values[i];
  sol.newton.correction_norm = prob.energy_norm(diff);
  sol.newton.u.description = "solution";
  const auto prof = axis_profile(*grid, sol.newton.u, sol.geometry.xi.back());
  sol.sign_changes = count_sign_changes(prof);
  sol.extrema = level_extrema(prof, cfg.k);
  return sol;
}

/// Solves along a decreasing geometric schedule. Each solve is seeded with the ansatz at the
/// same reduced coordinates, i.e. the previous parameters rescaled to the new eps.
inline std::vector<TowerSolution> continue_in_epsilon(const TowerTemplate& tt, const TowerConfig& cfg0,
                                                      const std::vector<double>& schedule) {
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] < schedule[i - 1])) throw DomainError("eps schedule must be decreasing");
  std::vector<TowerSolution> out;
  for (double eps : schedule) {
    try {
      out.push_back(solve_tower(tt, cfg0, eps));
    } catch (const SolverError& e) {
      throw SolverError(std::string("continuation broke at eps=") + std::to_string(eps) + ": " + e.what(),
                        e.trace, eps);
    }
  }
  return out;
}

struct FitResult {
  int level = 0;
  RateFit fit;
};

/// Fits delta_i(eps) = (alpha / M_i)^{2/(n-2)} against eps for each level.
inline std::vector<FitResult> fit_concentration(const std::vector<TowerSolution>& results, int n, int k) {
  if (results.size() < 4) throw DomainError("concentration fit needs at least 4 eps samples");
  const SpaceDims d = dims_constants(n);
  std::vector<FitResult> out;
  for (int i = 1; i <= k; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : results) {
      if (int(s.extrema.size()) < k) throw StructureLost("solution lost its tower structure");
      pts.emplace_back(s.epsilon, std::pow(d.alpha / s.extrema[i - 1], 2.0 / (n - 2)));
    }
    out.push_back({i, rate_regression(pts)});
  }
  return out;
}

}  // namespace towerlab
