#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "skygp/mass.hpp"
#include "skygp/rng.hpp"

namespace skygp {

/// One leapfrog trajectory (half momentum step, alternating full steps, half
/// momentum step) in place. Returns false if anything went non-finite, in
/// which case the caller must treat the trajectory as divergent.
template <class GradFn>
bool leapfrog(Eigen::VectorXd& q, Eigen::VectorXd& p, GradFn&& grad, const MassMatrix& mass,
              int n_steps, double eps) {
  if (n_steps < 1) throw std::invalid_argument("leapfrog needs at least one step");
  if (!(eps > 0)) throw std::invalid_argument("leapfrog needs a positive step size");
  Eigen::VectorXd g = grad(q);
  if (!g.allFinite()) return false;
  p += 0.5 * eps * g;
  for (int step = 0; step < n_steps; ++step) {
    q += eps * mass.inv_apply(p);
    if (!q.allFinite()) return false;
    g = grad(q);
    if (!g.allFinite()) return false;
    p += (step + 1 < n_steps ? eps : 0.5 * eps) * g;
  }
  return p.allFinite();
}

struct HmcResult {
  bool accepted = false;
  bool divergent = false;
  double accept_prob = 0.0;
  double delta_h = 0.0;     // H(proposal) - H(start)
  double logpost = 0.0;     // log posterior of the returned position
};

inline constexpr double kDivergenceThreshold = 1000.0;

/// One HMC transition with a frozen mass matrix: draw momentum from
/// N(0, mass), integrate, and accept with min(1, exp(-delta H)). `q` is
/// updated in place only on acceptance; `cur_logpost` must match q on entry.
template <class LogPostFn, class GradFn>
HmcResult hmc_transition(Eigen::VectorXd& q, double cur_logpost, LogPostFn&& logpost,
                         GradFn&& grad, const MassMatrix& mass, int n_steps, double eps,
                         Rng& rng) {
  if (!(eps > 0)) throw std::invalid_argument("hmc_transition: step size must be positive");
  if (n_steps < 1) throw std::invalid_argument("hmc_transition: need at least one leapfrog step");

  Eigen::VectorXd p = mass.sample_momentum(rng);
  const double h0 = -cur_logpost + mass.kinetic(p);

  Eigen::VectorXd q_new = q;
  HmcResult result;
  result.logpost = cur_logpost;
  if (!leapfrog(q_new, p, grad, mass, n_steps, eps)) {
    result.divergent = true;
    return result;
  }
  const double lp_new = logpost(q_new);
  const double h1 = -lp_new + mass.kinetic(p);
  result.delta_h = h1 - h0;
  if (!std::isfinite(result.delta_h) || result.delta_h > kDivergenceThreshold) {
    result.divergent = true;
    return result;
  }
  result.accept_prob = std::min(1.0, std::exp(-result.delta_h));
  if (std::log(rng.u01()) < -result.delta_h) {
    q = std::move(q_new);
    result.accepted = true;
    result.logpost = lp_new;
  }
  return result;
}

/// Dual-averaging step-size adaptation toward a target acceptance rate.
/// Standard constants; freeze() yields the averaged step size for sampling.
class DualAveraging {
 public:
  DualAveraging(double initial_eps, double target_accept)
      : mu_(std::log(10.0 * initial_eps)),
        log_eps_(std::log(initial_eps)),
        target_(target_accept) {}

  void observe(double accept_prob) {
    ++count_;
    const double frac = 1.0 / (count_ + t0_);
    h_bar_ = (1.0 - frac) * h_bar_ + frac * (target_ - accept_prob);
    log_eps_ = mu_ - std::sqrt(static_cast<double>(count_)) / gamma_ * h_bar_;
    const double w = std::pow(static_cast<double>(count_), -kappa_);
    log_eps_bar_ = w * log_eps_ + (1.0 - w) * log_eps_bar_;
  }

  double current() const { return std::exp(log_eps_); }
  double frozen() const { return count_ > 0 ? std::exp(log_eps_bar_) : std::exp(log_eps_); }

  // serialization hooks for checkpointing
  double mu() const { return mu_; }
  double log_eps() const { return log_eps_; }
  double log_eps_bar() const { return log_eps_bar_; }
  double h_bar() const { return h_bar_; }
  long count() const { return count_; }
  void restore(double mu, double log_eps, double log_eps_bar, double h_bar, long count) {
    mu_ = mu;
    log_eps_ = log_eps;
    log_eps_bar_ = log_eps_bar;
    h_bar_ = h_bar;
    count_ = count;
  }

 private:
  double mu_;
  double log_eps_;
  double log_eps_bar_ = 0.0;
  double h_bar_ = 0.0;
  double target_;
  long count_ = 0;
  static constexpr double gamma_ = 0.05;
  static constexpr double t0_ = 10.0;
  static constexpr double kappa_ = 0.75;
};

}  // namespace skygp
