#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "skygp/coalescent.hpp"
#include "skygp/rng.hpp"
#include "skygp/tridiag.hpp"

namespace skygp {

enum class MassMatrixMode { identity, hessian_diagonal, hessian_tridiagonal };

/// HMC mass matrix over a position vector [theta-block | rest]. The theta
/// block carries the negative posterior Hessian (exact: diag(e^-theta w) +
/// tau Q) in diagonal or tridiagonal form; the remaining coordinates use the
/// identity. Momentum is N(0, M) and kinetic energy is p' M^{-1} p / 2.
class MassMatrix {
 public:
  static MassMatrix identity(int total_dim) {
    MassMatrix m;
    m.mode_ = MassMatrixMode::identity;
    m.total_dim_ = total_dim;
    m.theta_dim_ = 0;
    return m;
  }

  static MassMatrix hessian_diag(Eigen::VectorXd diag, int total_dim) {
    MassMatrix m;
    m.mode_ = MassMatrixMode::hessian_diagonal;
    m.total_dim_ = total_dim;
    m.theta_dim_ = static_cast<int>(diag.size());
    m.diag_ = std::move(diag);
    m.diag_sqrt_ = m.diag_.array().sqrt();
    return m;
  }

  static MassMatrix hessian_tridiag(SpdTridiag t, int total_dim) {
    MassMatrix m;
    m.mode_ = MassMatrixMode::hessian_tridiagonal;
    m.total_dim_ = total_dim;
    m.theta_dim_ = static_cast<int>(t.size());
    m.chol_ = tridiag_factor(t);
    m.tridiag_ = std::move(t);
    return m;
  }

  MassMatrixMode mode() const { return mode_; }
  int dim() const { return total_dim_; }
  int theta_dim() const { return theta_dim_; }
  const Eigen::VectorXd& diagonal() const { return diag_; }
  const SpdTridiag& tridiagonal() const { return tridiag_; }

  Eigen::VectorXd sample_momentum(Rng& rng) const {
    Eigen::VectorXd z(total_dim_);
    for (int i = 0; i < total_dim_; ++i) z[i] = rng.normal();
    switch (mode_) {
      case MassMatrixMode::identity:
        return z;
      case MassMatrixMode::hessian_diagonal:
        z.head(theta_dim_).array() *= diag_sqrt_.array();
        return z;
      case MassMatrixMode::hessian_tridiagonal: {
        z.head(theta_dim_) = chol_.lower_mul(z.head(theta_dim_));
        return z;
      }
    }
    return z;
  }

  Eigen::VectorXd inv_apply(const Eigen::VectorXd& p) const {
    switch (mode_) {
      case MassMatrixMode::identity:
        return p;
      case MassMatrixMode::hessian_diagonal: {
        Eigen::VectorXd out = p;
        out.head(theta_dim_).array() /= diag_.array();
        return out;
      }
      case MassMatrixMode::hessian_tridiagonal: {
        Eigen::VectorXd out = p;
        out.head(theta_dim_) = chol_.solve(p.head(theta_dim_));
        return out;
      }
    }
    return p;
  }

  double kinetic(const Eigen::VectorXd& p) const { return 0.5 * p.dot(inv_apply(p)); }

 private:
  MassMatrixMode mode_ = MassMatrixMode::identity;
  int total_dim_ = 0;
  int theta_dim_ = 0;
  Eigen::VectorXd diag_, diag_sqrt_;
  SpdTridiag tridiag_;
  TridiagChol chol_;
};

/// Assembles the theta-block preconditioner from the current state:
/// diag(sum_loci e^-theta_k w_k, floored) + tau Q. The g and covariate blocks
/// keep identity mass.
inline MassMatrix build_mass_matrix(MassMatrixMode mode, const Eigen::VectorXd& theta,
                                    const CoalescentData& data, double tau, int total_dim,
                                    double floor = 1e-8) {
  if (mode == MassMatrixMode::identity) return MassMatrix::identity(total_dim);
  const int m = static_cast<int>(theta.size());
  Eigen::VectorXd like_diag = Eigen::VectorXd::Zero(m);
  for (const auto& ledger : data.ledgers)
    for (int k = 0; k < m; ++k)
      like_diag[k] += std::exp(-theta[k]) * ledger.weighted_duration[static_cast<std::size_t>(k)];
  // absolute floor per the preconditioner contract, plus a floor relative to
  // tau so the tridiagonal factorization stays clear of cancellation when
  // tau*Q dominates (tau Q alone is singular)
  like_diag = like_diag.array().max(floor).max(1e-10 * tau);

  Eigen::VectorXd q_diag = Eigen::VectorXd::Constant(m, 2.0);
  q_diag[0] = 1.0;
  q_diag[m - 1] = 1.0;

  if (mode == MassMatrixMode::hessian_diagonal)
    return MassMatrix::hessian_diag(like_diag + tau * q_diag, total_dim);

  SpdTridiag t;
  t.diag = like_diag + tau * q_diag;
  t.off = Eigen::VectorXd::Constant(m - 1, -tau);
  return MassMatrix::hessian_tridiag(std::move(t), total_dim);
}

}  // namespace skygp
