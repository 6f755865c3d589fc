#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace skygp {

/// Exogenous time grid: points g_1 < ... < g_{M-1} with implicit g_0 = 0
/// partition backward time into M intervals (g_{k-1}, g_k]; the last interval
/// extends beyond g_{M-1} to whatever root height a tree realizes.
struct Grid {
  std::vector<double> points;

  int intervals() const { return static_cast<int>(points.size()) + 1; }

  // 1-based interval index for time t; t <= 0 maps to interval 1 and
  // t == g_k maps to interval k (half-open convention, left assignment)
  int interval_of(double t) const {
    const auto it = std::lower_bound(points.begin(), points.end(), t);
    return static_cast<int>(it - points.begin()) + 1;
  }

  // left endpoint g_{k-1} of interval k
  double lower(int k) const { return k <= 1 ? 0.0 : points[static_cast<std::size_t>(k - 2)]; }

  static Grid equal_spacing(double cutoff, int intervals) {
    if (!(cutoff > 0)) throw std::invalid_argument("grid cutoff must be positive");
    if (intervals < 2) throw std::invalid_argument("grid needs at least 2 intervals");
    Grid g;
    g.points.resize(static_cast<std::size_t>(intervals - 1));
    for (int k = 1; k < intervals; ++k)
      g.points[static_cast<std::size_t>(k - 1)] = cutoff * k / (intervals - 1);
    return g;
  }

  static Grid from_points(std::vector<double> points) {
    if (points.empty()) throw std::invalid_argument("explicit grid needs at least one point");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!std::isfinite(points[i]) || points[i] <= 0)
        throw std::invalid_argument("grid points must be positive and finite");
      if (i > 0 && points[i] <= points[i - 1])
        throw std::invalid_argument("grid points must be strictly increasing");
    }
    Grid g;
    g.points = std::move(points);
    return g;
  }
};

}  // namespace skygp
