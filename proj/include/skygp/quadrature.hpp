#pragma once

#include <cmath>
#include <stdexcept>

namespace skygp {

namespace detail {

inline double simpson_rule(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(F&& f, double a, double fa, double b, double fb, double m, double fm,
                            double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_rule(a, fa, m, fm, flm);
  const double right = simpson_rule(m, fm, b, fb, frm);
  const double err = left + right - whole;
  if (!std::isfinite(err)) throw std::runtime_error("quadrature non-convergence: non-finite integrand");
  if (std::abs(err) <= 15.0 * tol || depth <= 0) return left + right + err / 15.0;
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a,b]. Jump discontinuities are
/// handled by deep recursion around them; by the depth limit the residual is
/// of order |f| * (b-a) * 2^-depth.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-12, int max_depth = 60) {
  if (!(b >= a)) throw std::invalid_argument("adaptive_simpson: bad interval");
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = detail::simpson_rule(a, fa, b, fb, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

}  // namespace skygp
