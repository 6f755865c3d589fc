#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace skygp {

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  return 0.5 * (v[n / 2 - 1] + hi);
}

/// Shortest interval containing ceil(prob * n) of the sorted samples
/// (Chen-Shao windowing).
inline std::pair<double, double> hpd_interval(std::vector<double> samples, double prob = 0.95) {
  if (samples.empty()) throw std::invalid_argument("HPD of empty sample");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  std::size_t window = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n)));
  window = std::min(std::max<std::size_t>(window, 1), n);
  std::size_t best = 0;
  double best_width = samples[window - 1] - samples[0];
  for (std::size_t i = 1; i + window <= n; ++i) {
    const double width = samples[i + window - 1] - samples[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {samples[best], samples[best + window - 1]};
}

/// Effective sample size via Geyer's initial monotone sequence estimator.
/// Degenerate (zero-variance) samples report ESS = n by convention.
inline double ess_initial_monotone(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  const auto gamma = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double g0 = gamma(0);
  if (!(g0 > 0)) return static_cast<double>(n);

  double sum_pairs = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0;; ++m) {
    const std::size_t lag = 2 * m;
    if (lag + 1 >= n) break;
    double pair = gamma(lag) + gamma(lag + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decrease
    sum_pairs += pair;
    prev_pair = pair;
  }
  const double asymp_var = -g0 + 2.0 * sum_pairs;
  if (!(asymp_var > 0)) return static_cast<double>(n);
  return std::min(static_cast<double>(n), static_cast<double>(n) * g0 / asymp_var) ;
}

inline double mcse_mean(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  return std::sqrt(var / ess_initial_monotone(x));
}

// ---- special functions for test statistics ----

namespace detail {

// regularized lower incomplete gamma P(a, x); series + continued fraction
inline double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

}  // namespace detail

/// Upper tail P(X >= x) for a chi-squared with k degrees of freedom.
inline double chi2_sf(double x, double dof) {
  if (x <= 0) return 1.0;
  return 1.0 - detail::gamma_p(0.5 * dof, 0.5 * x);
}

/// Chi-squared goodness-of-fit p-value for observed counts against equal
/// expected bin probabilities.
inline double chi2_uniform_pvalue(const std::vector<long>& counts) {
  long total = 0;
  for (long c : counts) total += c;
  if (counts.size() < 2 || total == 0) return 1.0;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return chi2_sf(stat, static_cast<double>(counts.size() - 1));
}

/// Asymptotic Kolmogorov-Smirnov p-value for statistic d with n samples.
inline double ks_pvalue(double d, std::size_t n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::pow(-1.0, j - 1) * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

/// KS test of samples against a CDF callable; returns the p-value.
template <class CdfFn>
double ks_test(std::vector<double> samples, CdfFn&& cdf) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return ks_pvalue(d, n);
}

/// Gelman-Rubin potential scale reduction over chains of equal length.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) return 1.0;
  const std::size_t n = chains[0].size();
  if (n < 2) return 1.0;
  std::vector<double> means(m);
  double grand = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double s = 0.0;
    for (double v : chains[c]) s += v;
    means[c] = s / static_cast<double>(n);
    grand += means[c];
  }
  grand /= static_cast<double>(m);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double s = 0.0;
    for (double v : chains[c]) s += (v - means[c]) * (v - means[c]);
    w += s / static_cast<double>(n - 1);
  }
  w /= static_cast<double>(m);
  if (!(w > 0)) return 1.0;
  const double var_plus = (static_cast<double>(n - 1) / n) * w + b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

}  // namespace skygp
