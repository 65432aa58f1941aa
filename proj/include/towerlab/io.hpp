#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/pde_lab.hpp"
#include "towerlab/verification.hpp"

namespace towerlab {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const std::string& canonical, std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical + "seed=" + std::to_string(seed))));
  return buf;
}

/// Writes to a sibling temporary file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f << content;
    if (!f) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string csv_header(const std::string& hash, const std::string& tag) {
  return "# config_hash=" + hash + " checks=" + tag + "\n";
}

/// r,z,value with the epsilon/k/n header line.
inline std::string field_csv(const AxisymGrid& g, const Field& u, int k, const std::string& hash) {
  std::ostringstream os;
  os << csv_header(hash, "tower-field");
  os << "# epsilon=" << format_real(u.epsilon) << " k=" << k << " n=" << g.n << "\n";
  os << "r,z,value\n";
  for (std::size_t j = 0; j < g.nr(); ++j)
    for (std::size_t l = 0; l < g.nz(); ++l)
      os << format_real(g.r[j]) << ',' << format_real(g.z[l]) << ',' << format_real(u.values[g.node(j, l)])
         << '\n';
  return os.str();
}

inline std::string fit_csv(const std::vector<FitResult>& fits, const std::string& hash) {
  std::ostringstream os;
  os << csv_header(hash, "concentration-rates");
  os << "level,slope,intercept,r_squared\n";
  for (const auto& f : fits)
    os << f.level << ',' << format_real(f.fit.slope) << ',' << format_real(f.fit.intercept) << ','
       << format_real(f.fit.r_squared) << '\n';
  return os.str();
}

inline std::string report_csv(const std::vector<CheckReport>& rs, const std::string& hash) {
  std::ostringstream os;
  os << csv_header(hash, "verification-suite");
  os << "name,expected,measured,tolerance,passed\n";
  for (const auto& r : rs)
    os << r.name << ',' << format_real(r.expected) << ',' << format_real(r.measured) << ','
       << format_real(r.tolerance) << ',' << (r.passed ? 1 : 0) << '\n';
  return os.str();
}

inline std::string report_text(const std::vector<CheckReport>& rs) {
  std::ostringstream os;
  int passed = 0;
  for (const auto& r : rs) {
    passed += r.passed;
    char line[512];
    std::snprintf(line, sizeof line, "%-4s %-44s expected %-14.8g measured %-14.8g tol %-10.3g %s\n",
                  r.passed ? "ok" : "FAIL", r.name.c_str(), r.expected, r.measured, r.tolerance, r.notes.c_str());
    os << line;
  }
  os << passed << "/" << rs.size() << " checks passed\n";
  return os.str();
}

/// Written when a run aborts: kind, message, epsilon, residual trace (space separated).
inline std::string failure_csv(const std::string& kind, const std::string& message, double eps,
                               const std::vector<double>& trace, const std::string& hash) {
  std::ostringstream os;
  os << csv_header(hash, "failure");
  os << "kind,message,epsilon,trace\n";
  std::string msg = message;
  for (auto& c : msg)
    if (c == ',' || c == '\n') c = ';';
  os << kind << ',' << msg << ',' << format_real(eps) << ',';
  for (std::size_t i = 0; i < trace.size(); ++i) os << (i ? " " : "") << format_real(trace[i]);
  os << '\n';
  return os.str();
}

}  // namespace towerlab
