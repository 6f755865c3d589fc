#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/coalescent.hpp"
#include "skygp/gmrf.hpp"
#include "skygp/kernel.hpp"
#include "skygp/mvn.hpp"
#include "skygp/tables.hpp"

namespace skygp {

struct PriorSettings {
  double tau_shape = 1.0;   // inverse-gamma shape on the GMRF precision
  double tau_scale = 10.0;  // inverse-gamma scale
  double sigma2_rate = 1.0; // exponential rate on each marginal scale
  double ell_rate = 1.0;    // exponential rate on each (ell - ell_min)
  double ell_min = 0.0;
  double anchor_sd = 0.0;   // > 0 adds a proper N(0, sd^2) prior on theta_1 - g_1
  double jitter_base = 1e-8;
  bool whiten = false;            // sample whitened coordinates u with g = chol(K) u
  double missing_rw_tau = 1.0;    // fixed random-walk precision for imputed covariates
};

/// Sampled quantities. Hyperparameters live on the log scale; gfield holds
/// the GP values g directly, or the whitened coordinates u when enabled.
struct ChainState {
  Eigen::VectorXd theta;
  Eigen::VectorXd gfield;
  Eigen::VectorXd zmiss;
  double log_tau = 0.0;
  Eigen::VectorXd log_sigma2;
  Eigen::VectorXd lambda_ell;
};

struct PosteriorParts {
  double loglik = 0.0;
  double gmrf = 0.0;
  double gp = 0.0;
  double hyper = 0.0;
  double missing = 0.0;
  double total() const { return loglik + gmrf + gp + hyper + missing; }

  // name of the first non-finite component, empty when everything is finite
  std::string component_error() const {
    if (!std::isfinite(loglik)) return "log-likelihood";
    if (!std::isfinite(gmrf)) return "gmrf";
    if (!std::isfinite(gp)) return "gp";
    if (!std::isfinite(hyper)) return "hyperpriors";
    if (!std::isfinite(missing)) return "missing-covariate prior";
    return {};
  }
};

/// Oldest-contiguous run of missing entries in one covariate row; the block
/// always extends through the last (oldest) interval and is anchored at the
/// earliest observed value.
struct MissingBlock {
  int covariate = 0;
  int start = 0;   // 0-based first missing interval
  int count = 0;
  double anchor = 0.0;
};

inline double inv_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double exponential_logpdf(double x, double rate) {
  if (x < 0) return -std::numeric_limits<double>::infinity();
  return std::log(rate) - rate * x;
}

/// Joint posterior over the latent block (theta, g, imputed covariates) and
/// log-scale hyperparameters, for fixed trees. Kernel factorizations are
/// cached against an exact-value signature so repeated gradient evaluations
/// inside one HMC trajectory reuse them.
class Model {
 public:
  Model(const CoalescentData* data, CovariateTable covariates, PriorSettings prior)
      : data_(data), cov_(std::move(covariates)), prior_(prior) {
    const int m = data_->intervals();
    if (cov_.n_covariates() > 0 && cov_.n_intervals() != m)
      throw std::invalid_argument("covariate table has " + std::to_string(cov_.n_intervals()) +
                                  " columns but the grid has " + std::to_string(m) + " intervals");
    for (int p = 0; p < cov_.n_covariates(); ++p) {
      int first_missing = -1;
      for (int k = 0; k < m; ++k) {
        if (cov_.missing(p, k)) {
          if (first_missing < 0) first_missing = k;
        } else if (first_missing >= 0) {
          throw std::invalid_argument(
              "covariate '" + cov_.names[static_cast<std::size_t>(p)] +
              "': missing values must form one contiguous block through the oldest interval; "
              "impute interior gaps externally");
        }
      }
      if (first_missing == 0)
        throw std::invalid_argument("covariate '" + cov_.names[static_cast<std::size_t>(p)] +
                                    "' has no observed value before the missing block");
      if (first_missing > 0) {
        MissingBlock block;
        block.covariate = p;
        block.start = first_missing;
        block.count = m - first_missing;
        block.anchor = cov_.values(p, first_missing - 1);
        blocks_.push_back(block);
      }
    }
    if (prior_.whiten && !blocks_.empty())
      throw std::invalid_argument("whitening and missing covariates cannot be combined");
  }

  const CoalescentData& data() const { return *data_; }
  const CovariateTable& covariates() const { return cov_; }
  const PriorSettings& prior() const { return prior_; }
  const std::vector<MissingBlock>& missing_blocks() const { return blocks_; }

  int grid_size() const { return data_->intervals(); }
  int n_covariates() const { return cov_.n_covariates(); }
  bool has_gp() const { return n_covariates() > 0; }

  int missing_count() const {
    int j = 0;
    for (const auto& b : blocks_) j += b.count;
    return j;
  }

  int latent_dim() const { return grid_size() + (has_gp() ? grid_size() : 0) + missing_count(); }

  double tau(const ChainState& s) const { return std::exp(s.log_tau); }

  KernelParams kernel_params(const ChainState& s) const {
    KernelParams p;
    p.sigma2 = s.log_sigma2.array().exp();
    p.ell = prior_.ell_min + s.lambda_ell.array().exp();
    return p;
  }

  /// Covariate matrix with the current imputations filled in.
  Eigen::MatrixXd covariate_values(const ChainState& s) const {
    Eigen::MatrixXd z = cov_.values;
    int offset = 0;
    for (const auto& b : blocks_) {
      for (int j = 0; j < b.count; ++j) z(b.covariate, b.start + j) = s.zmiss[offset + j];
      offset += b.count;
    }
    return z;
  }

  /// GP values g; maps through the Cholesky factor when whitened.
  Eigen::VectorXd g_of(const ChainState& s) const {
    if (!has_gp()) return Eigen::VectorXd::Zero(grid_size());
    if (!prior_.whiten) return s.gfield;
    const KernelCache& kc = kernel_cache(s);
    return kc.chol_lower * s.gfield;
  }

  ChainState initial_state() const {
    ChainState s;
    const int m = grid_size();
    Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd m_sum = Eigen::VectorXd::Zero(m);
    for (const auto& ledger : data_->ledgers)
      for (int k = 0; k < m; ++k) {
        w_sum[k] += ledger.weighted_duration[static_cast<std::size_t>(k)];
        m_sum[k] += ledger.coalescent_count[static_cast<std::size_t>(k)];
      }
    const double theta0 =
        m_sum.sum() > 0 && w_sum.sum() > 0 ? std::log(w_sum.sum() / m_sum.sum()) : 0.0;
    // per-interval MLE where defined, plus a tiny ramp so the increments of
    // theta - g are never exactly zero (an exactly-constant field makes the
    // intrinsic tau conditional improper)
    s.theta.resize(m);
    for (int k = 0; k < m; ++k) {
      s.theta[k] = m_sum[k] > 0 && w_sum[k] > 0 ? std::log(w_sum[k] / m_sum[k]) : theta0;
      s.theta[k] += 1e-4 * (k + 1);
    }
    // g starts on the centered data signal, never exactly zero: g = 0 makes
    // the sigma2 conditional improper just as a constant theta - g does for tau
    if (has_gp()) {
      const double mean_theta = s.theta.mean();
      s.gfield.resize(m);
      for (int k = 0; k < m; ++k)
        s.gfield[k] = 0.5 * (s.theta[k] - mean_theta) + (k % 2 == 0 ? 1e-4 : -1e-4);
    } else {
      s.gfield.resize(0);
    }
    s.zmiss.resize(missing_count());
    int offset = 0;
    for (const auto& b : blocks_) {
      for (int j = 0; j < b.count; ++j) s.zmiss[offset + j] = b.anchor;
      offset += b.count;
    }
    s.log_tau = 0.0;
    s.log_sigma2 = Eigen::VectorXd::Zero(n_covariates());
    s.lambda_ell = Eigen::VectorXd::Zero(n_covariates());
    return s;
  }

  PosteriorParts log_posterior(const ChainState& s) const {
    PosteriorParts parts;
    parts.loglik = log_likelihood(*data_, s.theta);
    const double tau_v = tau(s);

    const Eigen::VectorXd g = g_of(s);
    const Eigen::VectorXd x = s.theta - g;
    parts.gmrf = gmrf_log_density(x, tau_v) + anchor_logpdf(x);

    if (has_gp()) {
      if (prior_.whiten) {
        parts.gp = -0.5 * (s.gfield.squaredNorm() + grid_size() * kLog2Pi);
      } else {
        const KernelCache& kc = kernel_cache(s);
        parts.gp = -0.5 * (g.dot(kc.solve_g) + kc.log_det + grid_size() * kLog2Pi);
      }
    }

    parts.hyper = inv_gamma_logpdf(tau_v, prior_.tau_shape, prior_.tau_scale) + s.log_tau;
    for (int p = 0; p < n_covariates(); ++p) {
      const double sigma2 = std::exp(s.log_sigma2[p]);
      parts.hyper += exponential_logpdf(sigma2, prior_.sigma2_rate) + s.log_sigma2[p];
      const double ell_excess = std::exp(s.lambda_ell[p]);
      parts.hyper += exponential_logpdf(ell_excess, prior_.ell_rate) + s.lambda_ell[p];
    }

    parts.missing = missing_log_density(s);
    return parts;
  }

  /// Gradient of the joint log-posterior with respect to the packed latent
  /// position [theta | gfield | zmiss]; hyperparameters are held fixed.
  Eigen::VectorXd grad_latent(const ChainState& s) const {
    const int m = grid_size();
    Eigen::VectorXd grad(latent_dim());
    const double tau_v = tau(s);
    const Eigen::VectorXd g = g_of(s);
    const Eigen::VectorXd x = s.theta - g;

    Eigen::VectorXd d_x = gmrf_grad(x, tau_v);  // d gmrf / d x
    if (prior_.anchor_sd > 0) d_x[0] -= x[0] / (prior_.anchor_sd * prior_.anchor_sd);

    grad.head(m) = grad_log_likelihood(*data_, s.theta) + d_x;

    if (has_gp()) {
      const KernelCache& kc = kernel_cache(s);
      if (prior_.whiten) {
        grad.segment(m, m) = kc.chol_lower.transpose() * (-d_x) - s.gfield;
      } else {
        grad.segment(m, m) = -d_x - kc.solve_g;
      }
      if (missing_count() > 0) grad.tail(missing_count()) = grad_zmiss(s, kc);
    }
    return grad;
  }

  Eigen::VectorXd pack_latent(const ChainState& s) const {
    Eigen::VectorXd q(latent_dim());
    const int m = grid_size();
    q.head(m) = s.theta;
    if (has_gp()) q.segment(m, m) = s.gfield;
    if (missing_count() > 0) q.tail(missing_count()) = s.zmiss;
    return q;
  }

  void unpack_latent(const Eigen::VectorXd& q, ChainState& s) const {
    const int m = grid_size();
    s.theta = q.head(m);
    if (has_gp()) s.gfield = q.segment(m, m);
    if (missing_count() > 0) s.zmiss = q.tail(missing_count());
  }

  /// Conditional log-density for a slice move on log tau (terms free of tau
  /// omitted).
  double conditional_log_tau(const ChainState& s, double log_tau) const {
    const double tau_v = std::exp(log_tau);
    if (!(tau_v > 0) || !std::isfinite(tau_v)) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd x = s.theta - g_of(s);
    return gmrf_log_density(x, tau_v) +
           inv_gamma_logpdf(tau_v, prior_.tau_shape, prior_.tau_scale) + log_tau;
  }

  /// Conditional log-density for a slice move on covariate p's kernel
  /// hyperparameters (log sigma2, lambda); recomputes the GP term with the
  /// proposed kernel.
  double conditional_kernel(const ChainState& s, int p, double log_sigma2, double lambda) const {
    ChainState probe = s;
    probe.log_sigma2[p] = log_sigma2;
    probe.lambda_ell[p] = lambda;
    const double sigma2 = std::exp(log_sigma2);
    const double ell_excess = std::exp(lambda);
    if (!std::isfinite(sigma2) || !std::isfinite(ell_excess))
      return -std::numeric_limits<double>::infinity();
    if (!(sigma2 > 0) || !(ell_excess >= 0))
      return -std::numeric_limits<double>::infinity();
    double value = exponential_logpdf(sigma2, prior_.sigma2_rate) + log_sigma2 +
                   exponential_logpdf(ell_excess, prior_.ell_rate) + lambda;
    // slice step-out probes extreme values; an unfactorizable kernel there is
    // a zero-density region, not an error
    try {
      if (prior_.whiten) {
        // changing the kernel moves g = L(phi) u, which shifts the GMRF term
        const Eigen::VectorXd x = probe.theta - g_of(probe);
        value += gmrf_log_density(x, tau(probe)) + anchor_logpdf(x);
      } else {
        const KernelCache& kc = kernel_cache(probe);
        value += -0.5 * (probe.gfield.dot(kc.solve_g) + kc.log_det);
      }
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
    return value;
  }

 private:
  struct KernelCache {
    Eigen::VectorXd signature;
    Eigen::MatrixXd kernel;      // jittered K
    Eigen::MatrixXd chol_lower;  // L with L L' = K (+ escalated jitter)
    Eigen::MatrixXd kinv;        // only with missing covariates
    std::vector<Eigen::MatrixXd> per_covariate;  // only with missing covariates
    Eigen::VectorXd solve_g;     // K^{-1} g for the gfield of the cached state
    Eigen::VectorXd g_sig;
    double log_det = 0.0;
    bool valid = false;
  };

  double anchor_logpdf(const Eigen::VectorXd& x) const {
    if (!(prior_.anchor_sd > 0)) return 0.0;
    const double a2 = prior_.anchor_sd * prior_.anchor_sd;
    return -0.5 * (x[0] * x[0] / a2 + std::log(a2) + kLog2Pi);
  }

  double missing_log_density(const ChainState& s) const {
    double total = 0.0;
    int offset = 0;
    const double tz = prior_.missing_rw_tau;
    for (const auto& b : blocks_) {
      double ss = 0.0;
      double prev = b.anchor;
      for (int j = 0; j < b.count; ++j) {
        const double z = s.zmiss[offset + j];
        const double d = z - prev;
        ss += d * d;
        prev = z;
      }
      total += 0.5 * b.count * std::log(tz) - 0.5 * tz * ss;
      offset += b.count;
    }
    return total;
  }

  Eigen::VectorXd grad_zmiss(const ChainState& s, const KernelCache& kc) const {
    const int j_total = missing_count();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(j_total);
    const Eigen::MatrixXd z = covariate_values(s);
    const KernelParams params = kernel_params(s);
    const Eigen::VectorXd& alpha = kc.solve_g;  // K^{-1} g

    int offset = 0;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const MissingBlock& b = blocks_[bi];
      const double ell2 = params.ell[b.covariate] * params.ell[b.covariate];
      const Eigen::MatrixXd& kp = kc.per_covariate[bi];
      for (int j = 0; j < b.count; ++j) {
        const int a = b.start + j;
        // GP term: d/dz_a of -(g'K^{-1}g + logdet K)/2 via B = alpha alpha' - K^{-1}
        double acc = 0.0;
        for (int col = 0; col < static_cast<int>(kp.cols()); ++col) {
          if (col == a) continue;
          const double bval = alpha[a] * alpha[col] - kc.kinv(a, col);
          acc += bval * kp(a, col) * (z(b.covariate, a) - z(b.covariate, col));
        }
        grad[offset + j] = -acc / ell2;
      }
      // random-walk prior gradient over (anchor, z_block)
      const double tz = prior_.missing_rw_tau;
      for (int j = 0; j < b.count; ++j) {
        const double cur = s.zmiss[offset + j];
        const double prev = j == 0 ? b.anchor : s.zmiss[offset + j - 1];
        grad[offset + j] += -tz * (cur - prev);
        if (j + 1 < b.count) grad[offset + j] += tz * (s.zmiss[offset + j + 1] - cur);
      }
      offset += b.count;
    }
    return grad;
  }

  const KernelCache& kernel_cache(const ChainState& s) const {
    const KernelParams params = kernel_params(s);
    Eigen::VectorXd sig(2 * n_covariates() + missing_count());
    sig.head(n_covariates()) = params.sigma2;
    sig.segment(n_covariates(), n_covariates()) = params.ell;
    if (missing_count() > 0) sig.tail(missing_count()) = s.zmiss;

    if (!kcache_.valid || kcache_.signature.size() != sig.size() || kcache_.signature != sig) {
      kcache_.valid = false;  // stays invalid if factorization throws mid-refresh
      const Eigen::MatrixXd z = covariate_values(s);
      kcache_.kernel = kernel_matrix(z, params, prior_.jitter_base);
      const SpdFactor factor = SpdFactor::compute(kcache_.kernel, kernel_jitter_unit(params, prior_.jitter_base));
      kcache_.chol_lower = factor.llt.matrixL();
      kcache_.log_det = factor.log_det();
      if (missing_count() > 0) {
        kcache_.kinv = factor.llt.solve(Eigen::MatrixXd::Identity(z.cols(), z.cols()));
        kcache_.per_covariate.clear();
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
          const MissingBlock& b = blocks_[i];
          kcache_.per_covariate.push_back(single_covariate_kernel(
              z.row(b.covariate).transpose(), params.sigma2[b.covariate], params.ell[b.covariate]));
        }
      }
      kcache_.signature = sig;
      kcache_.g_sig.resize(0);
      kcache_.valid = true;
    }
    // K^{-1} g is cached separately because g moves more often than K
    if (!prior_.whiten) {
      if (kcache_.g_sig.size() != s.gfield.size() || kcache_.g_sig != s.gfield) {
        kcache_.solve_g = chol_solve(kcache_.chol_lower, s.gfield);
        kcache_.g_sig = s.gfield;
      }
    }
    return kcache_;
  }

  static Eigen::VectorXd chol_solve(const Eigen::MatrixXd& lower, const Eigen::VectorXd& b) {
    Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  const CoalescentData* data_;
  CovariateTable cov_;
  PriorSettings prior_;
  std::vector<MissingBlock> blocks_;
  mutable KernelCache kcache_;
};

}  // namespace skygp
