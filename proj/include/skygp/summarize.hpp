#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/csv.hpp"
#include "skygp/grid.hpp"
#include "skygp/stats.hpp"
#include "skygp/trace.hpp"

namespace skygp {

/// Boundary covariate values of the maximal runs where the finite-difference
/// derivative magnitude of the curve drops below the threshold. A curve that
/// is flat across the whole range reports (min z, max z); a curve that never
/// flattens reports nothing.
inline std::vector<double> flattening_points(const std::vector<double>& z,
                                             const std::vector<double>& y, double threshold) {
  const std::size_t n = z.size();
  if (n < 3) throw std::invalid_argument("flattening_points needs at least 3 points");
  if (y.size() != n) throw std::invalid_argument("curve size mismatch");
  for (std::size_t i = 1; i < n; ++i)
    if (!(z[i] > z[i - 1]))
      throw std::invalid_argument("covariate values must be strictly increasing");

  std::vector<double> deriv(n);
  deriv[0] = (y[1] - y[0]) / (z[1] - z[0]);
  deriv[n - 1] = (y[n - 1] - y[n - 2]) / (z[n - 1] - z[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) deriv[i] = (y[i + 1] - y[i - 1]) / (z[i + 1] - z[i - 1]);

  std::vector<double> boundaries;
  std::size_t i = 0;
  while (i < n) {
    if (std::abs(deriv[i]) < threshold) {
      std::size_t j = i;
      while (j + 1 < n && std::abs(deriv[j + 1]) < threshold) ++j;
      boundaries.push_back(z[i]);
      boundaries.push_back(z[j]);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return boundaries;
}

struct IntervalSummary {
  int interval = 0;
  double t_lo = 0, t_hi = 0;
  double theta_med = 0, theta_lo = 0, theta_hi = 0;
  double ne_med = 0, ne_lo = 0, ne_hi = 0;
  double ess = 0;
};

struct CurvePoint {
  int interval = 0;
  double z = 0;
  double g_med = 0, g_lo = 0, g_hi = 0;
  double ess = 0;
};

struct ParamSummary {
  std::string name;
  double med = 0, lo = 0, hi = 0, ess = 0;
};

struct PosteriorSummary {
  std::vector<IntervalSummary> intervals;
  std::vector<CurvePoint> curve;  // sorted by covariate value; empty without covariates
  std::vector<ParamSummary> hyperparams;
  std::vector<double> flattening;
  double threshold = 0.05;
  std::size_t retained_rows = 0;
};

namespace detail {

inline ParamSummary summarize_column(const TraceData& trace, const std::string& name,
                                     std::size_t from) {
  const std::vector<double> x = trace.column_values(trace.column(name), from);
  const auto [lo, hi] = hpd_interval(x, 0.95);
  return {name, median_of(x), lo, hi, ess_initial_monotone(x)};
}

}  // namespace detail

/// Builds the posterior summary from a trace: per-interval medians and 95%
/// HPDs of theta and Ne, the covariate-response curve of g sorted by
/// covariate value (pointwise HPD), hyperparameter summaries, ESS, and the
/// flattening points of the median curve. Pure function of its inputs.
inline PosteriorSummary summarize_trace(const TraceData& trace, double burn_in,
                                        const Grid& grid, double last_interval_end,
                                        const std::vector<double>& covariate_at_grid,
                                        double flatten_threshold = 0.05) {
  const std::size_t rows = trace.rows.size();
  const auto from = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(rows)));
  if (rows - from < 100)
    throw std::runtime_error("summarize needs at least 100 retained rows after burn-in, have " +
                             std::to_string(rows - from));

  PosteriorSummary summary;
  summary.threshold = flatten_threshold;
  summary.retained_rows = rows - from;
  const int m = grid.intervals();

  for (int k = 0; k < m; ++k) {
    const std::vector<double> theta =
        trace.column_values(trace.column("theta_" + std::to_string(k + 1)), from);
    std::vector<double> ne(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) ne[i] = std::exp(theta[i]);
    IntervalSummary s;
    s.interval = k + 1;
    s.t_lo = grid.lower(k + 1);
    s.t_hi = k + 1 < m ? grid.points[static_cast<std::size_t>(k)] : last_interval_end;
    const auto [tlo, thi] = hpd_interval(theta, 0.95);
    s.theta_med = median_of(theta);
    s.theta_lo = tlo;
    s.theta_hi = thi;
    const auto [nlo, nhi] = hpd_interval(ne, 0.95);
    s.ne_med = median_of(ne);
    s.ne_lo = nlo;
    s.ne_hi = nhi;
    s.ess = ess_initial_monotone(theta);
    summary.intervals.push_back(s);
  }

  const bool has_g = !covariate_at_grid.empty();
  if (has_g) {
    if (static_cast<int>(covariate_at_grid.size()) != m)
      throw std::invalid_argument("covariate series length must match the grid");
    std::vector<CurvePoint> curve;
    for (int k = 0; k < m; ++k) {
      const std::vector<double> g =
          trace.column_values(trace.column("g_" + std::to_string(k + 1)), from);
      CurvePoint p;
      p.interval = k + 1;
      p.z = covariate_at_grid[static_cast<std::size_t>(k)];
      const auto [glo, ghi] = hpd_interval(g, 0.95);
      p.g_med = median_of(g);
      p.g_lo = glo;
      p.g_hi = ghi;
      p.ess = ess_initial_monotone(g);
      curve.push_back(p);
    }
    std::sort(curve.begin(), curve.end(), [](const CurvePoint& a, const CurvePoint& b) {
      if (a.z != b.z) return a.z < b.z;
      return a.interval < b.interval;
    });
    summary.curve = curve;

    bool strict = true;
    for (std::size_t i = 1; i < curve.size(); ++i)
      if (!(curve[i].z > curve[i - 1].z)) strict = false;
    if (strict && curve.size() >= 3) {
      std::vector<double> zs, med;
      for (const auto& p : curve) {
        zs.push_back(p.z);
        med.push_back(p.g_med);
      }
      summary.flattening = flattening_points(zs, med, flatten_threshold);
    }
  }

  for (std::size_t c = 0; c < trace.columns.size(); ++c) {
    const std::string& name = trace.columns[c];
    if (name == "tau" || name.rfind("sigma2_", 0) == 0 || name.rfind("ell_", 0) == 0 ||
        name.rfind("zmiss_", 0) == 0)
      summary.hyperparams.push_back(detail::summarize_column(trace, name, from));
  }
  return summary;
}

inline void write_summary(const PosteriorSummary& summary, const std::string& out_dir) {
  {
    std::ofstream out(out_dir + "/ne_vs_time.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/ne_vs_time.csv");
    out << "interval,t_lo,t_hi,theta_median,theta_hpd_lower,theta_hpd_upper,"
           "ne_median,ne_hpd_lower,ne_hpd_upper,ess\n";
    for (const auto& s : summary.intervals) {
      out << csv::join_row({std::to_string(s.interval), csv::format(s.t_lo), csv::format(s.t_hi),
                            csv::format(s.theta_med), csv::format(s.theta_lo), csv::format(s.theta_hi),
                            csv::format(s.ne_med), csv::format(s.ne_lo), csv::format(s.ne_hi),
                            csv::format(s.ess)});
    }
  }
  if (!summary.curve.empty()) {
    std::ofstream out(out_dir + "/logne_vs_covariate.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/logne_vs_covariate.csv");
    out << "covariate,g_median,g_hpd_lower_pointwise,g_hpd_upper_pointwise,ess,interval\n";
    for (const auto& p : summary.curve) {
      out << csv::join_row({csv::format(p.z), csv::format(p.g_med), csv::format(p.g_lo),
                            csv::format(p.g_hi), csv::format(p.ess), std::to_string(p.interval)});
    }
  }
  {
    std::ofstream out(out_dir + "/hyperparams.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/hyperparams.csv");
    out << "parameter,median,hpd_lower,hpd_upper,ess\n";
    for (const auto& h : summary.hyperparams) {
      out << csv::join_row(
          {h.name, csv::format(h.med), csv::format(h.lo), csv::format(h.hi), csv::format(h.ess)});
    }
  }
  {
    std::ofstream out(out_dir + "/flattening.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/flattening.csv");
    out << "covariate,kind\n";
    for (std::size_t i = 0; i < summary.flattening.size(); ++i) {
      out << csv::join_row(
          {csv::format(summary.flattening[i]), i % 2 == 0 ? "run_start" : "run_end"});
    }
  }
}

}  // namespace skygp
