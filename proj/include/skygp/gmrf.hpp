#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace skygp {

// First-order intrinsic GMRF with tri-diagonal structure matrix Q
// (diag 1,2,...,2,1; off-diagonals -1). Everything here runs in O(M);
// Q is never materialized.

/// x'Qx = sum of squared increments.
inline double gmrf_quadratic_form(const Eigen::VectorXd& x) {
  double q = 0.0;
  for (Eigen::Index k = 1; k < x.size(); ++k) {
    const double d = x[k] - x[k - 1];
    q += d * d;
  }
  return q;
}

/// Q x.
inline Eigen::VectorXd gmrf_structure_matvec(const Eigen::VectorXd& x) {
  const Eigen::Index m = x.size();
  Eigen::VectorXd y(m);
  if (m == 1) {
    y[0] = 0.0;
    return y;
  }
  y[0] = x[0] - x[1];
  for (Eigen::Index k = 1; k + 1 < m; ++k) y[k] = 2.0 * x[k] - x[k - 1] - x[k + 1];
  y[m - 1] = x[m - 1] - x[m - 2];
  return y;
}

/// Intrinsic GMRF log-density ((M-1)/2) log tau - (tau/2) x'Qx; the rank
/// deficiency of Q shows up as the M-1 exponent. Improper: invariant to
/// adding a constant to x.
inline double gmrf_log_density(const Eigen::VectorXd& x, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("gmrf_log_density: tau must be positive");
  return 0.5 * (x.size() - 1) * std::log(tau) - 0.5 * tau * gmrf_quadratic_form(x);
}

/// Gradient -tau Q x (the Hessian is the constant -tau Q).
inline Eigen::VectorXd gmrf_grad(const Eigen::VectorXd& x, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("gmrf_grad: tau must be positive");
  return -tau * gmrf_structure_matvec(x);
}

}  // namespace skygp
