#pragma once

#include <algorithm>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "towerlab/config.hpp"
#include "towerlab/verification.hpp"

namespace towerlab {

inline VerifySetup verify_setup(const RunConfig& c, double tolerance_scale = 1.0) {
  VerifySetup su;
  su.n = c.n;
  su.weight = c.weight;
  su.tower = c.tower_template();
  su.energy_domain = c.energy_domain == "ball" ? ball_kernel(c.n, 1.0, 1.0) : half_space_kernel(c.n);
  su.tolerance_scale = tolerance_scale;
  return su;
}

inline bool wants(const RunConfig& c, const std::string& group) {
  return std::find(c.checks.begin(), c.checks.end(), "all") != c.checks.end() ||
         std::find(c.checks.begin(), c.checks.end(), group) != c.checks.end();
}

using CheckJob = std::function<std::vector<CheckReport>()>;

/// The check groups requested by the config, in declaration order.
inline std::vector<std::pair<std::string, CheckJob>> verify_jobs(const RunConfig& c, double tolerance_scale = 1.0) {
  const VerifySetup su = verify_setup(c, tolerance_scale);
  const double ts = tolerance_scale;
  std::vector<std::pair<std::string, CheckJob>> jobs;
  if (wants(c, "constants")) jobs.emplace_back("constants", [=] { return check_constants({4, 5, 6}, 1e-8 * ts, 1e-6 * ts); });
  if (wants(c, "kernel")) jobs.emplace_back("kernel", [=] { return check_kernel_residuals(c.n); });
  if (wants(c, "projection"))
    jobs.emplace_back("projection", [=] {
      std::vector<CheckReport> out;
      out.push_back(check_grid_sandwich(DomainModel::slab(), c.n, 64, 0.05, 0.2));
      out.push_back(check_grid_sandwich(DomainModel::ball(1.0, 1.0), c.n, 64, 0.05, 0.2));
      out.push_back(check_analytic_sandwich(half_space_kernel(c.n), c.n, 0.05, 0.2, c.seed));
      out.push_back(check_analytic_sandwich(ball_kernel(c.n, 1.0, 1.0), c.n, 0.05, 0.2, c.seed + 1));
      const auto eps = log_schedule(c.rate_start, c.rate_end, c.rate_count);
      out.push_back(check_projection_h1_rate(half_space_kernel(c.n), c.n, eps, 0.577350269189626, 1.0, 0.5, 0.05 * ts));
      out.push_back(check_projection_h1_rate(ball_kernel(c.n, 1.0, 1.0), c.n, eps, 0.577350269189626, 1.0, 0.5, 0.05 * ts));
      return out;
    });
  if (wants(c, "reduced"))
    jobs.emplace_back("reduced", [=] {
      auto out = check_reduced_energy(c.seed, 1e-6 * ts, 1e-4 * ts, 1e-8 * ts);
      const CriticalPoint cp = find_critical_point(c.n, c.k, c.weight, c.init, c.critical_tol);
      out.push_back(check_saddle_inertia(cp));
      return out;
    });
  if (wants(c, "error_rate"))
    jobs.emplace_back("error_rate", [=] {
      std::vector<CheckReport> out;
      for (int k : c.tower_heights)
        out.push_back(check_error_rate(su, k, log_schedule(c.rate_start, c.rate_end, c.rate_count)));
      return out;
    });
  if (wants(c, "c0") || wants(c, "c1"))
    jobs.emplace_back("expansion", [=] {
      std::vector<CheckReport> out;
      const CriticalPoint cp = find_critical_point(c.n, 1, c.weight, TowerConfig::default_init(1), c.critical_tol);
      if (wants(c, "c0")) {
        auto r = check_expansion_C0(su, cp, log_schedule(c.c0_start, c.c0_end, c.c0_count), 1e-3);
        out.insert(out.end(), r.begin(), r.end());
      }
      if (wants(c, "c1")) {
        TowerConfig at;
        at.k = 1;
        at.t = c.c1_t;
        at.d = {c.c1_d1};
        auto r = check_expansion_C1(su, at, log_schedule(10 * c.c1_eps, c.c1_eps, 4), c.c1_eps);
        out.insert(out.end(), r.begin(), r.end());
        // both expansion checks share this critical point
        const double again = phi(cp.config, c.weight, expansion_constants(c.n, 1));
        out.push_back(detail::absolute_check("expansion_shared_phi", cp.phi_value, again, 1e-10));
      }
      return out;
    });
  if (wants(c, "tower"))
    jobs.emplace_back("tower", [=] {
      std::vector<CheckReport> out;
      for (int k : c.tower_heights) {
        auto r = check_tower(su, k, c.schedule());
        out.insert(out.end(), r.begin(), r.end());
      }
      return out;
    });
  return jobs;
}

/// Runs the jobs with at most `parallel` in flight; results keep declaration order, so the
/// report does not depend on `parallel`.
inline std::vector<CheckReport> run_jobs(const std::vector<std::pair<std::string, CheckJob>>& jobs, int parallel) {
  std::vector<std::vector<CheckReport>> parts(jobs.size());
  auto guarded = [&](std::size_t i) {
    try {
      parts[i] = jobs[i].second();
    } catch (const Error& e) {
      parts[i] = {detail::flag_check(jobs[i].first + "_aborted", false, 0.0, e.what())};
    }
  };
  parallel = std::max(parallel, 1);
  for (std::size_t start = 0; start < jobs.size(); start += parallel) {
    std::vector<std::future<void>> fs;
    for (std::size_t i = start; i < std::min(jobs.size(), start + parallel); ++i)
      fs.push_back(std::async(parallel > 1 ? std::launch::async : std::launch::deferred, guarded, i));
    for (auto& f : fs) f.get();
  }
  std::vector<CheckReport> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace towerlab
