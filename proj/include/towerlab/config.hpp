#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/analytic_kernel.hpp"
#include "towerlab/errors.hpp"
#include "towerlab/pde_lab.hpp"
#include "towerlab/reduced_energy.hpp"

namespace towerlab {

/// Everything a run needs, parsed from a sectioned key = value file.
struct RunConfig {
  int n = 4;
  int k = 1;
  DomainModel domain = DomainModel::slab();
  WeightModel weight = WeightModel::affine(4, 1.0, 1.0);
  std::string weight_kind = "affine";
  TowerConfig init;  ///< starting point of the critical-point search

  double eps_start = 0.1;
  double eps_ratio = 0.5;
  int eps_count = 3;

  int resolution = 128;
  double cells_per_delta = 8.0;

  double newton_tol = 1e-10;
  double projected_rel_tol = 1e-8;
  int newton_max_iter = 40;
  double critical_tol = 1e-10;

  std::vector<std::string> checks{"all"};
  std::vector<int> tower_heights{1, 2};
  std::string energy_domain = "ball";
  double c0_start = 1e-2, c0_end = 1e-4;
  int c0_count = 7;
  double c1_t = 1.5, c1_d1 = 0.4, c1_eps = 1e-3;
  double rate_start = 1e-1, rate_end = 1e-3;
  int rate_count = 9;

  double landscape_t_min = 0.5, landscape_t_max = 2.0;
  double landscape_d_min = 0.2, landscape_d_max = 1.2;
  int landscape_points = 16;

  std::uint64_t seed = 12345;
  std::string out_dir = "out";
  std::string source;  ///< canonical text the hash is taken over

  std::vector<double> schedule() const {
    std::vector<double> s;
    for (int i = 0; i < eps_count; ++i) s.push_back(eps_start * std::pow(eps_ratio, i));
    return s;
  }

  TowerTemplate tower_template() const {
    TowerTemplate tt;
    tt.domain = domain;
    tt.weight = weight;
    tt.n = n;
    tt.resolution = resolution;
    tt.cells_per_delta = cells_per_delta;
    tt.projected = {newton_tol, projected_rel_tol, newton_max_iter, 30};
    tt.full = {newton_tol, 0.0, newton_max_iter, 30};
    return tt;
  }
};

/// Geometric schedule from `start` to `end` (inclusive) with `count` points.
inline std::vector<double> log_schedule(double start, double end, int count) {
  std::vector<double> s;
  for (int i = 0; i < count; ++i)
    s.push_back(count == 1 ? start : start * std::pow(end / start, double(i) / (count - 1)));
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::stringstream ss(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(ss, raw)) {
      ++line;
      std::string s = raw;
      const auto hash = s.find_first_of("#;");
      if (hash != std::string::npos) s = s.substr(0, hash);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(line, "malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!known().count(section)) throw ConfigError(line, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
      if (section.empty()) throw ConfigError(line, "key outside a section");
      const std::string key = trim(s.substr(0, eq));
      const std::string full = section + "." + key;
      if (!known().at(section).count(key)) throw ConfigError(line, "unknown key " + full);
      if (entries_.count(full)) throw ConfigError(line, "duplicate key " + full);
      entries_[full] = {trim(s.substr(eq + 1)), line};
      canonical_ += full + "=" + entries_[full].value + "\n";
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  int line_of(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  const Entry& require(const std::string& key) const {
    if (!has(key)) throw ConfigError(0, "missing required key " + key);
    return entries_.at(key);
  }

  double number(const std::string& key, double fallback, bool required = false) const {
    if (!has(key)) {
      if (required) require(key);
      return fallback;
    }
    const Entry& e = entries_.at(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(e.line, key + " must be a number, got '" + e.value + "'");
    }
  }

  int integer(const std::string& key, int fallback, bool required = false) const {
    const double v = number(key, fallback, required);
    if (v != std::floor(v)) throw ConfigError(line_of(key), key + " must be an integer");
    return int(v);
  }

  std::string text(const std::string& key, const std::string& fallback, bool required = false) const {
    if (!has(key)) {
      if (required) require(key);
      return fallback;
    }
    return entries_.at(key).value;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    for (const auto& item : split_list(entries_.at(key).value)) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError(line_of(key), key + " must be a list of numbers");
      }
    }
    return out;
  }

  const std::string& canonical() const { return canonical_; }

  static const std::map<std::string, std::set<std::string>>& known() {
    static const std::map<std::string, std::set<std::string>> k = {
        {"problem", {"n", "k"}},
        {"domain", {"kind", "extent_r", "extent_z", "center_z", "radius"}},
        {"weight", {"kind", "a0", "beta", "kappas", "offset"}},
        {"tower", {"t", "d", "s"}},
        {"schedule", {"start", "ratio", "count"}},
        {"grid", {"resolution", "cells_per_delta"}},
        {"tolerances", {"newton", "projected_rel", "max_iter", "critical_point"}},
        {"verify",
         {"checks", "tower_heights", "energy_domain", "c0_start", "c0_end", "c0_count", "c1_t", "c1_d1",
          "c1_eps", "rate_start", "rate_end", "rate_count"}},
        {"landscape", {"t_min", "t_max", "d_min", "d_max", "points"}},
        {"run", {"seed", "out"}},
    };
    return k;
  }

 private:
  std::map<std::string, Entry> entries_;
  std::string canonical_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  const detail::ConfigReader in(text);
  RunConfig c;
  c.source = in.canonical();
  auto fail = [&](const std::string& key, const std::string& msg) -> void {
    throw ConfigError(in.line_of(key), msg);
  };

  c.n = in.integer("problem.n", 4, true);
  if (c.n < 4)
    fail("problem.n", "unsupported dimension n=" + std::to_string(c.n) +
                          ": the construction needs n >= 4 (for n = 3 the projection error does not vanish)");
  c.k = in.integer("problem.k", 1, true);
  if (c.k < 1) fail("problem.k", "tower height k must be >= 1");

  const std::string dk = in.text("domain.kind", "", true);
  if (dk == "slab" || dk == "half-space") {
    c.domain = DomainModel::slab(in.number("domain.extent_r", 1.0), in.number("domain.extent_z", 1.0));
    if (!(c.domain.extent_r > 0 && c.domain.extent_z > 0)) fail("domain.extent_r", "slab extents must be positive");
  } else if (dk == "ball") {
    c.domain = DomainModel::ball(in.number("domain.center_z", 1.0), in.number("domain.radius", 1.0));
    if (!(c.domain.radius > 0)) fail("domain.radius", "ball radius must be positive");
    if (std::abs(c.domain.center_z - c.domain.radius) > 1e-12)
      fail("domain.center_z", "the ball must touch the origin: center_z = radius");
  } else {
    fail("domain.kind", "unsupported domain kind '" + dk + "' (slab or ball)");
  }

  c.weight_kind = in.text("weight.kind", "", true);
  try {
    if (c.weight_kind == "affine") {
      c.weight = WeightModel::affine(c.n, in.number("weight.a0", 1.0), in.number("weight.beta", 1.0));
    } else if (c.weight_kind == "product") {
      std::vector<int> ks;
      for (double v : in.numbers("weight.kappas")) {
        if (v != std::floor(v)) fail("weight.kappas", "kappa exponents must be integers");
        ks.push_back(int(v));
      }
      if (ks.empty()) fail("weight.kappas", "product weight needs kappas");
      c.weight = WeightModel::product(c.n, ks, in.number("weight.offset", 1.0));
    } else {
      fail("weight.kind", "unsupported weight kind '" + c.weight_kind + "' (affine or product)");
    }
  } catch (const DomainError& e) {
    fail("weight.kind", e.what());
  }

  c.init = TowerConfig::default_init(c.k);
  c.init.t = in.number("tower.t", 1.0);
  if (in.has("tower.d")) c.init.d = in.numbers("tower.d");
  if (in.has("tower.s")) c.init.s = in.numbers("tower.s");
  if (int(c.init.d.size()) != c.k) fail("tower.d", "tower.d needs exactly k values");
  if (int(c.init.s.size()) != c.k - 1) fail("tower.s", "tower.s needs exactly k-1 values");
  if (!c.init.in_lambda())
    fail(in.has("tower.d") ? "tower.d" : "tower.t", "initial tower parameters must satisfy t > 0 and d_i > 0");

  c.eps_start = in.number("schedule.start", 0.1, true);
  c.eps_ratio = in.number("schedule.ratio", 0.5, true);
  c.eps_count = in.integer("schedule.count", 3, true);
  if (!(c.eps_start > 0.0 && c.eps_start < 4.0 / (c.n - 2))) fail("schedule.start", "eps must lie in (0, 4/(n-2))");
  if (!(c.eps_ratio > 0.0 && c.eps_ratio < 1.0)) fail("schedule.ratio", "eps ratio must lie in (0, 1)");
  if (c.eps_count < 1) fail("schedule.count", "schedule needs at least one value");
  if (c.schedule().back() < 1e-4) fail("schedule.count", "schedule reaches below eps = 1e-4");

  c.resolution = in.integer("grid.resolution", 128);
  c.cells_per_delta = in.number("grid.cells_per_delta", 8.0);
  if (c.resolution < 16 || c.resolution > 256) fail("grid.resolution", "grid resolution must lie in [16, 256]");
  if (!(c.cells_per_delta >= 1.0)) fail("grid.cells_per_delta", "cells_per_delta must be >= 1");

  c.newton_tol = in.number("tolerances.newton", 1e-10);
  c.projected_rel_tol = in.number("tolerances.projected_rel", 1e-8);
  c.newton_max_iter = in.integer("tolerances.max_iter", 40);
  c.critical_tol = in.number("tolerances.critical_point", 1e-10);
  if (!(c.newton_tol > 0 && c.projected_rel_tol > 0 && c.critical_tol > 0))
    fail("tolerances.newton", "tolerances must be positive");
  if (c.newton_max_iter < 1) fail("tolerances.max_iter", "max_iter must be >= 1");

  if (in.has("verify.checks")) c.checks = detail::split_list(in.text("verify.checks", "all"));
  static const std::set<std::string> known_checks = {"all", "constants", "kernel", "projection", "reduced",
                                                     "error_rate", "c0", "c1", "tower"};
  for (const auto& ch : c.checks)
    if (!known_checks.count(ch)) fail("verify.checks", "unknown check '" + ch + "'");
  if (in.has("verify.tower_heights")) {
    c.tower_heights.clear();
    for (double v : in.numbers("verify.tower_heights")) {
      if (v < 1 || v != std::floor(v)) fail("verify.tower_heights", "tower heights must be positive integers");
      c.tower_heights.push_back(int(v));
    }
  }
  c.energy_domain = in.text("verify.energy_domain", "ball");
  if (c.energy_domain != "ball" && c.energy_domain != "half-space")
    fail("verify.energy_domain", "energy_domain must be ball or half-space");
  c.c0_start = in.number("verify.c0_start", c.c0_start);
  c.c0_end = in.number("verify.c0_end", c.c0_end);
  c.c0_count = in.integer("verify.c0_count", c.c0_count);
  if (!(c.c0_start > c.c0_end && c.c0_end > 0) || c.c0_count < 3)
    fail("verify.c0_start", "c0 schedule needs start > end > 0 and at least 3 points");
  if (std::log10(c.c0_start / c.c0_end) < 1.5) fail("verify.c0_end", "c0 schedule must span at least 1.5 decades");
  c.c1_t = in.number("verify.c1_t", c.c1_t);
  c.c1_d1 = in.number("verify.c1_d1", c.c1_d1);
  c.c1_eps = in.number("verify.c1_eps", c.c1_eps);
  if (!(c.c1_t > 0 && c.c1_d1 > 0 && c.c1_eps > 0)) fail("verify.c1_t", "c1 point must have t, d1, eps > 0");
  c.rate_start = in.number("verify.rate_start", c.rate_start);
  c.rate_end = in.number("verify.rate_end", c.rate_end);
  c.rate_count = in.integer("verify.rate_count", c.rate_count);
  if (!(c.rate_start > c.rate_end && c.rate_end > 0) || c.rate_count < 3)
    fail("verify.rate_start", "rate schedule needs start > end > 0 and at least 3 points");

  c.landscape_t_min = in.number("landscape.t_min", c.landscape_t_min);
  c.landscape_t_max = in.number("landscape.t_max", c.landscape_t_max);
  c.landscape_d_min = in.number("landscape.d_min", c.landscape_d_min);
  c.landscape_d_max = in.number("landscape.d_max", c.landscape_d_max);
  c.landscape_points = in.integer("landscape.points", c.landscape_points);
  if (!(0 < c.landscape_t_min && c.landscape_t_min < c.landscape_t_max && 0 < c.landscape_d_min &&
        c.landscape_d_min < c.landscape_d_max) ||
      c.landscape_points < 2)
    fail("landscape.points", "landscape ranges must be positive and increasing with >= 2 points");

  const double seed = in.number("run.seed", 12345.0);
  if (seed < 0 || seed != std::floor(seed)) fail("run.seed", "seed must be a non-negative integer");
  c.seed = std::uint64_t(seed);
  c.out_dir = in.text("run.out", "out");
  return c;
}

}  // namespace towerlab
