// Command line front end: constants, phi-crit, phi-landscape, build-tower, continue, verify.

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "towerlab/config.hpp"
#include "towerlab/io.hpp"
#include "towerlab/suite.hpp"

namespace fs = std::filesystem;
using namespace towerlab;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kSolverFailure = 3 };

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  double tolerance_scale = 1.0;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(0, "cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Context {
  RunConfig cfg;
  fs::path out;
  std::string hash;
  Options opt;
};

int cmd_constants(const Context& cx) {
  const ExpansionConstants ec = expansion_constants(cx.cfg.n, cx.cfg.k);
  std::ostringstream os;
  os << csv_header(cx.hash, "expansion-constants");
  os << "n,k,a1,a2,a3,c1,c2,c3,c4,c5,c6,c7\n";
  os << ec.n << ',' << ec.k;
  for (double v : {ec.a1, ec.a2, ec.a3, ec.c1, ec.c2, ec.c3, ec.c4, ec.c5, ec.c6, ec.c7}) os << ',' << format_real(v);
  os << '\n';
  write_atomic(cx.out / "constants.csv", os.str());
  std::cout << os.str();
  return kOk;
}

int cmd_phi_crit(const Context& cx) {
  const CriticalPoint cp = find_critical_point(cx.cfg.n, cx.cfg.k, cx.cfg.weight, cx.cfg.init, cx.cfg.critical_tol);
  std::ostringstream os;
  os << csv_header(cx.hash, "reduced-energy-critical-point");
  os << "k,t";
  for (int i = 1; i <= cp.config.k; ++i) os << ",d" << i;
  for (int i = 1; i < cp.config.k; ++i) os << ",s" << i;
  os << ",phi,gradient_norm,positive,negative,zero\n";
  os << cp.config.k << ',' << format_real(cp.config.t);
  for (double v : cp.config.d) os << ',' << format_real(v);
  for (double v : cp.config.s) os << ',' << format_real(v);
  os << ',' << format_real(cp.phi_value) << ',' << format_real(cp.gradient_norm) << ',' << cp.hessian_inertia.positive
     << ',' << cp.hessian_inertia.negative << ',' << cp.hessian_inertia.zero << '\n';
  write_atomic(cx.out / "phi_crit.csv", os.str());
  std::printf("t = %.6f", cp.config.t);
  for (std::size_t i = 0; i < cp.config.d.size(); ++i) std::printf("  d%zu = %.6f", i + 1, cp.config.d[i]);
  for (std::size_t i = 0; i < cp.config.s.size(); ++i) std::printf("  s%zu = %.6f", i + 1, cp.config.s[i]);
  std::printf("\nphi = %.10g  inertia (%d,%d,%d)\n", cp.phi_value, cp.hessian_inertia.positive,
              cp.hessian_inertia.negative, cp.hessian_inertia.zero);
  const bool ok = check_saddle_inertia(cp).passed;
  return ok ? kOk : kCheckFailed;
}

/// Phi over a (t, d1) grid with the remaining coordinates at the critical point.
int cmd_phi_landscape(const Context& cx) {
  const auto& c = cx.cfg;
  const ExpansionConstants ec = expansion_constants(c.n, c.k);
  const CriticalPoint cp = find_critical_point(c.n, c.k, c.weight, c.init, c.critical_tol);
  std::ostringstream os;
  os << csv_header(cx.hash, "reduced-energy-landscape");
  os << "t,d1,phi\n";
  const int N = c.landscape_points;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      TowerConfig at = cp.config;
      at.t = c.landscape_t_min + (c.landscape_t_max - c.landscape_t_min) * i / (N - 1);
      at.d[0] = c.landscape_d_min + (c.landscape_d_max - c.landscape_d_min) * j / (N - 1);
      os << format_real(at.t) << ',' << format_real(at.d[0]) << ',' << format_real(phi(at, c.weight, ec)) << '\n';
    }
  write_atomic(cx.out / "phi_landscape.csv", os.str());
  return kOk;
}

std::string tower_rows(const std::vector<TowerSolution>& sols, int k, const std::string& hash) {
  std::ostringstream os;
  os << csv_header(hash, "tower-continuation");
  os << "epsilon,converged,iterations,residual_norm,correction_norm,sign_changes";
  for (int i = 1; i <= k; ++i) os << ",M" << i;
  os << '\n';
  for (const auto& s : sols) {
    os << format_real(s.epsilon) << ',' << (s.newton.converged ? 1 : 0) << ','
       << s.projected.iterations + s.newton.iterations << ',' << format_real(s.newton.residual_norm) << ','
       << format_real(s.newton.correction_norm) << ',' << s.sign_changes;
    for (double m : s.extrema) os << ',' << format_real(m);
    os << '\n';
  }
  return os.str();
}

int cmd_build_tower(const Context& cx) {
  const auto& c = cx.cfg;
  const CriticalPoint cp = find_critical_point(c.n, c.k, c.weight, c.init, c.critical_tol);
  const TowerSolution s = solve_tower(c.tower_template(), cp.config, c.eps_start);
  write_atomic(cx.out / "field.csv", field_csv(*s.grid, s.newton.u, c.k, cx.hash));
  write_atomic(cx.out / "tower.csv", tower_rows({s}, c.k, cx.hash));
  std::printf("eps = %.6g  converged = %d  correction = %.6g  sign changes = %d\n", s.epsilon,
              int(s.newton.converged), s.newton.correction_norm, s.sign_changes);
  return s.newton.converged && s.sign_changes == c.k - 1 ? kOk : kCheckFailed;
}

int cmd_continue(const Context& cx) {
  const auto& c = cx.cfg;
  const CriticalPoint cp = find_critical_point(c.n, c.k, c.weight, c.init, c.critical_tol);
  const auto sols = continue_in_epsilon(c.tower_template(), cp.config, c.schedule());
  write_atomic(cx.out / "continuation.csv", tower_rows(sols, c.k, cx.hash));
  bool ok = true;
  for (const auto& s : sols) ok = ok && s.newton.converged && s.sign_changes == c.k - 1;
  if (sols.size() >= 4) {
    const auto fits = fit_concentration(sols, c.n, c.k);
    write_atomic(cx.out / "fit.csv", fit_csv(fits, cx.hash));
    for (const auto& f : fits) std::printf("level %d  slope %.6f  d %.6f  r2 %.6f\n", f.level, f.fit.slope,
                                           f.fit.intercept, f.fit.r_squared);
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_verify(const Context& cx) {
  const auto reports = run_jobs(verify_jobs(cx.cfg, cx.opt.tolerance_scale), cx.opt.jobs);
  write_atomic(cx.out / "report.csv", report_csv(reports, cx.hash));
  const std::string text = report_text(reports);
  write_atomic(cx.out / "report.txt", text);
  std::cout << text;
  return all_passed(reports) ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign-changing tower solutions of a weighted critical elliptic problem"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory (overrides run.out)");
  auto* seed = app.add_option("--seed", opt.seed, "random seed (overrides run.seed)");
  app.add_option("--jobs", opt.jobs, "independent verify jobs run in parallel")->check(CLI::PositiveNumber);
  app.add_option("--tolerance-scale", opt.tolerance_scale, "multiplies check tolerances")
      ->check(CLI::PositiveNumber);

  using Cmd = int (*)(const Context&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> cmds = {
      {"constants", "expansion constants", cmd_constants},
      {"phi-crit", "critical point of the reduced energy and its inertia", cmd_phi_crit},
      {"phi-landscape", "reduced energy on a (t, d1) grid", cmd_phi_landscape},
      {"build-tower", "single solve at the first eps of the schedule", cmd_build_tower},
      {"continue", "solve along the eps schedule and fit concentration rates", cmd_continue},
      {"verify", "full verification suite", cmd_verify},
  };
  for (const auto& [name, help, fn] : cmds) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  opt.seed_set = seed->count() > 0;

  Context cx;
  cx.opt = opt;
  fs::path out_dir = opt.out.empty() ? fs::path("out") : fs::path(opt.out);
  try {
    cx.cfg = parse_config(read_file(opt.config));
    if (opt.seed_set) cx.cfg.seed = opt.seed;
    if (opt.out.empty()) out_dir = cx.cfg.out_dir;
    cx.out = out_dir;
    cx.hash = config_hash(cx.cfg.source, cx.cfg.seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    try {
      write_atomic(out_dir / "failure.csv", failure_csv("config", e.what(), 0.0, {}, "none"));
    } catch (...) {
    }
    return kConfigError;
  }

  for (const auto& [name, help, fn] : cmds) {
    if (!app.got_subcommand(name)) continue;
    try {
      return fn(cx);
    } catch (const SolverError& e) {
      std::cerr << "solver failure: " << e.what() << "\n";
      write_atomic(cx.out / "failure.csv", failure_csv("solver", e.what(), e.epsilon, e.trace, cx.hash));
      return kSolverFailure;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      write_atomic(cx.out / "failure.csv", failure_csv("config", e.what(), 0.0, {}, cx.hash));
      return kConfigError;
    } catch (const Error& e) {
      std::cerr << "failure: " << e.what() << "\n";
      write_atomic(cx.out / "failure.csv", failure_csv("solver", e.what(), 0.0, {}, cx.hash));
      return kSolverFailure;
    }
  }
  return kConfigError;
}
