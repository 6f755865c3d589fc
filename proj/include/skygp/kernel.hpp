#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace skygp {

/// Squared-exponential kernel hyperparameters, one (sigma2, ell) pair per
/// covariate. ell is kept at or above ell_min by the sampler's transform.
struct KernelParams {
  Eigen::VectorXd sigma2;
  Eigen::VectorXd ell;

  int covariates() const { return static_cast<int>(sigma2.size()); }
};

/// Kernel matrix for one covariate row z (length M):
/// k(i,j) = sigma2 * exp(-(z_i - z_j)^2 / (2 ell^2)). No jitter.
inline Eigen::MatrixXd single_covariate_kernel(const Eigen::VectorXd& z, double sigma2, double ell) {
  if (!(sigma2 > 0) || !(ell > 0)) throw std::invalid_argument("kernel needs sigma2 > 0 and ell > 0");
  const Eigen::Index m = z.size();
  Eigen::MatrixXd k(m, m);
  const double inv2l2 = 1.0 / (2.0 * ell * ell);
  for (Eigen::Index i = 0; i < m; ++i) {
    k(i, i) = sigma2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = z[i] - z[j];
      const double v = sigma2 * std::exp(-d * d * inv2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Additive kernel over covariates: K = sum_p k_p(Z row p), plus a diagonal
/// jitter of jitter_base * sum_p sigma2_p that keeps Cholesky factorizations
/// alive at duplicated covariate values.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& z_rows, const KernelParams& params,
                                     double jitter_base = 1e-8) {
  const int p_count = static_cast<int>(z_rows.rows());
  if (params.covariates() != p_count || params.ell.size() != p_count)
    throw std::invalid_argument("kernel_matrix: parameter count does not match covariate count");
  if (!z_rows.allFinite()) throw std::invalid_argument("kernel_matrix: non-finite covariate entry");
  const Eigen::Index m = z_rows.cols();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
  for (int p = 0; p < p_count; ++p)
    k += single_covariate_kernel(z_rows.row(p).transpose(), params.sigma2[p], params.ell[p]);
  const double jitter = jitter_base * params.sigma2.sum();
  k.diagonal().array() += jitter;
  return k;
}

inline double kernel_jitter_unit(const KernelParams& params, double jitter_base = 1e-8) {
  return jitter_base * params.sigma2.sum();
}

}  // namespace skygp
