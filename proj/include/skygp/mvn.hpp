#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace skygp {

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Cholesky factor of an SPD matrix with jitter escalation: on failure the
/// diagonal is bumped so the total added jitter is 10x, 100x, 1000x the unit,
/// then the factorization aborts with a diagnostic.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double added_jitter = 0.0;

  static SpdFactor compute(const Eigen::MatrixXd& k, double jitter_unit, int max_retries = 3) {
    SpdFactor f;
    Eigen::MatrixXd work = k;
    double total = 0.0;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      f.llt.compute(work);
      if (f.llt.info() == Eigen::Success) {
        f.added_jitter = total;
        return f;
      }
      const double target = jitter_unit > 0 ? jitter_unit * std::pow(10.0, attempt + 1)
                                            : 1e-10 * std::pow(10.0, attempt + 1);
      work.diagonal().array() += target - total;
      total = target;
    }
    throw std::runtime_error("SPD factorization failed after " + std::to_string(max_retries) +
                             " jitter escalations (last added " + std::to_string(total) + ")");
  }

  double log_det() const {
    const auto& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
  }
};

struct MvnDensity {
  double logpdf = 0.0;
  Eigen::VectorXd solve;  // K^{-1} g, reused by gradients
};

/// Zero-mean multivariate normal log-density of g under covariance K
/// (already jittered), via Cholesky: -(g'K^{-1}g + logdet K + M log 2pi)/2.
inline MvnDensity mvn_log_density(const Eigen::VectorXd& g, const SpdFactor& factor) {
  MvnDensity out;
  out.solve = factor.llt.solve(g);
  out.logpdf = -0.5 * (g.dot(out.solve) + factor.log_det() +
                       static_cast<double>(g.size()) * kLog2Pi);
  return out;
}

inline MvnDensity mvn_log_density(const Eigen::VectorXd& g, const Eigen::MatrixXd& k,
                                  double jitter_unit = 0.0) {
  return mvn_log_density(g, SpdFactor::compute(k, jitter_unit));
}

}  // namespace skygp
