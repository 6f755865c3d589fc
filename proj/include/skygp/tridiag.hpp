#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace skygp {

/// Symmetric tridiagonal matrix stored as two bands.
struct SpdTridiag {
  Eigen::VectorXd diag;  // size M
  Eigen::VectorXd off;   // size M-1

  Eigen::Index size() const { return diag.size(); }

  Eigen::VectorXd matvec(const Eigen::VectorXd& x) const {
    const Eigen::Index m = size();
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double v = diag[i] * x[i];
      if (i > 0) v += off[i - 1] * x[i - 1];
      if (i + 1 < m) v += off[i] * x[i + 1];
      y[i] = v;
    }
    return y;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size(), size());
    for (Eigen::Index i = 0; i < size(); ++i) {
      a(i, i) = diag[i];
      if (i + 1 < size()) {
        a(i, i + 1) = off[i];
        a(i + 1, i) = off[i];
      }
    }
    return a;
  }
};

/// Cholesky factor L of an SPD tridiagonal matrix: L lower bidiagonal with
/// diagonal `l` and subdiagonal `sub`. O(M) time and memory.
struct TridiagChol {
  Eigen::VectorXd l;    // size M
  Eigen::VectorXd sub;  // size M-1

  Eigen::Index size() const { return l.size(); }

  // L z (used to draw N(0, T) momentum as L * standard normals)
  Eigen::VectorXd lower_mul(const Eigen::VectorXd& z) const {
    const Eigen::Index m = size();
    Eigen::VectorXd y(m);
    for (Eigen::Index i = m - 1; i >= 0; --i) {
      y[i] = l[i] * z[i] + (i > 0 ? sub[i - 1] * z[i - 1] : 0.0);
    }
    return y;
  }

  // T^{-1} b via forward/back substitution
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const Eigen::Index m = size();
    Eigen::VectorXd y(m);
    y[0] = b[0] / l[0];
    for (Eigen::Index i = 1; i < m; ++i) y[i] = (b[i] - sub[i - 1] * y[i - 1]) / l[i];
    Eigen::VectorXd x(m);
    x[m - 1] = y[m - 1] / l[m - 1];
    for (Eigen::Index i = m - 2; i >= 0; --i) x[i] = (y[i] - sub[i] * x[i + 1]) / l[i];
    return x;
  }
};

inline TridiagChol tridiag_factor(const SpdTridiag& t) {
  const Eigen::Index m = t.size();
  TridiagChol f;
  f.l.resize(m);
  f.sub.resize(m > 0 ? m - 1 : 0);
  double prev_l = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double d = t.diag[i];
    if (i > 0) {
      const double s = t.off[i - 1] / prev_l;
      f.sub[i - 1] = s;
      d -= s * s;
    }
    if (!(d > 0)) throw std::runtime_error("tridiagonal factorization hit a non-positive pivot");
    prev_l = std::sqrt(d);
    f.l[i] = prev_l;
  }
  return f;
}

/// Forward-elimination/back-substitution solve of T x = rhs in O(M).
inline Eigen::VectorXd tridiag_solve(const SpdTridiag& t, const Eigen::VectorXd& rhs) {
  return tridiag_factor(t).solve(rhs);
}

}  // namespace skygp
