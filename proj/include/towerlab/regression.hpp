#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "towerlab/errors.hpp"

namespace towerlab {

/// Least-squares line through (log eps, log |value|): value ~ intercept * eps^slope.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;
};

inline RateFit rate_regression(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw DomainError("rate regression needs at least 3 points");
  const double N = double(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> logs;
  for (const auto& [e, v] : points) {
    if (!(e > 0.0)) throw DomainError("rate regression needs eps > 0");
    if (v == 0.0 || !std::isfinite(v)) throw DomainError("rate regression got a zero or non-finite value");
    const double x = std::log(e), y = std::log(std::abs(v));
    logs.emplace_back(x, y);
    sx += x;
    sy += y;
  }
  const double mx = sx / N, my = sy / N;
  double syy = 0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) throw DomainError("rate regression needs distinct eps values");
  RateFit fit;
  fit.points = points;
  fit.slope = sxy / sxx;
  fit.intercept = std::exp(my - fit.slope * mx);
  double sse = 0;
  for (const auto& [x, y] : logs) {
    const double e = y - (my + fit.slope * (x - mx));
    sse += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
  return fit;
}

}  // namespace towerlab
