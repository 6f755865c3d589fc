#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "skygp/quadrature.hpp"
#include "skygp/tree.hpp"

namespace skygp {

/// Log joint density of the coalescent event times of a fixed tree under an
/// arbitrary positive Ne(t), evaluated from first principles: the hazard of a
/// coalescence with n active lineages is C(n,2)/Ne(t) and survival integrals
/// are computed by adaptive quadrature of 1/Ne over each inter-event segment.
/// Includes the binomial hazard factors. Test oracle for small trees; it
/// shares no code with the grid/ledger likelihood path.
template <class NeFn>
double oracle_log_density(const TimeTree& tree, NeFn&& ne, double tol = 1e-12) {
  struct Ev {
    double time;
    bool is_tip;
    int node;
  };
  std::vector<Ev> events;
  events.reserve(tree.nodes.size());
  for (int id = 0; id < tree.n_nodes(); ++id)
    events.push_back({tree.nodes[static_cast<std::size_t>(id)].height,
                      tree.nodes[static_cast<std::size_t>(id)].is_tip(), id});
  std::sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.is_tip != b.is_tip) return a.is_tip;
    return a.node < b.node;
  });

  const auto inv_ne = [&](double t) { return 1.0 / ne(t); };
  double logdens = 0.0;
  int active = 0;
  double t_prev = 0.0;
  for (const Ev& ev : events) {
    if (active >= 2 && ev.time > t_prev) {
      const double integral = adaptive_simpson(inv_ne, t_prev, ev.time, tol);
      logdens -= 0.5 * active * (active - 1.0) * integral;
    }
    if (ev.is_tip) {
      ++active;
    } else {
      logdens += std::log(0.5 * active * (active - 1.0)) - std::log(ne(ev.time));
      --active;
    }
    t_prev = ev.time;
  }
  return logdens;
}

/// Piecewise-constant Ne with the same half-open convention as the grid:
/// level k applies on (g_{k-1}, g_k], the last level extends to infinity.
struct PiecewiseNe {
  std::vector<double> breaks;  // g_1..g_{M-1}
  std::vector<double> levels;  // size M

  double operator()(double t) const {
    const auto it = std::lower_bound(breaks.begin(), breaks.end(), t);
    return levels[static_cast<std::size_t>(it - breaks.begin())];
  }
};

}  // namespace skygp
