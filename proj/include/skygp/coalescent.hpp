#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "skygp/ledger.hpp"

namespace skygp {

namespace detail {

inline void check_theta(const CoalescentData& data, const Eigen::VectorXd& theta) {
  if (theta.size() != data.intervals())
    throw std::invalid_argument("theta length " + std::to_string(theta.size()) +
                                " does not match the grid's " + std::to_string(data.intervals()) +
                                " intervals");
}

}  // namespace detail

/// Heterochronous piecewise-constant coalescent log-likelihood in the log
/// effective population sizes theta: sum over loci and intervals of
/// -m_k theta_k - exp(-theta_k) w_k. Theta-free constants (the binomial
/// product and the labeled-tree normalizer) are excluded; see
/// log_tree_normalizer.
inline double log_likelihood(const CoalescentData& data, const Eigen::VectorXd& theta) {
  detail::check_theta(data, theta);
  double total = 0.0;
  for (const IntervalLedger& ledger : data.ledgers) {
    double ll = 0.0;
    for (int k = 0; k < ledger.intervals(); ++k) {
      ll += -ledger.coalescent_count[static_cast<std::size_t>(k)] * theta[k] -
            std::exp(-theta[k]) * ledger.weighted_duration[static_cast<std::size_t>(k)];
    }
    total += ll;
  }
  return total;
}

/// Gradient: component k is sum over loci of -m_k + exp(-theta_k) w_k.
inline Eigen::VectorXd grad_log_likelihood(const CoalescentData& data, const Eigen::VectorXd& theta) {
  detail::check_theta(data, theta);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (const IntervalLedger& ledger : data.ledgers)
    for (int k = 0; k < ledger.intervals(); ++k)
      g[k] += -ledger.coalescent_count[static_cast<std::size_t>(k)] +
              std::exp(-theta[k]) * ledger.weighted_duration[static_cast<std::size_t>(k)];
  return g;
}

/// Hessian diagonal: component k is sum over loci of -exp(-theta_k) w_k;
/// off-diagonal entries are identically zero and not stored.
inline Eigen::VectorXd hess_diag_log_likelihood(const CoalescentData& data,
                                                const Eigen::VectorXd& theta) {
  detail::check_theta(data, theta);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(theta.size());
  for (const IntervalLedger& ledger : data.ledgers)
    for (int k = 0; k < ledger.intervals(); ++k)
      h[k] -= std::exp(-theta[k]) * ledger.weighted_duration[static_cast<std::size_t>(k)];
  return h;
}

/// Log count of distinct labeled trees compatible with the event times:
/// sum over coalescent events of log C(n,2). Constant in theta; the full
/// labeled-tree log-density equals log_likelihood + (binomial product) -
/// (this normalizer), and those two terms cancel.
inline double log_tree_normalizer(const CoalescentData& data) {
  double total = 0.0;
  for (const IntervalLedger& ledger : data.ledgers)
    for (const auto& interval : ledger.events)
      for (const LedgerEvent& ev : interval)
        if (ev.kind == EventKind::coalescent) total += std::log(pairs_of(ev.lineages_before));
  return total;
}

}  // namespace skygp
