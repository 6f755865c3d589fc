#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "skygp/grid.hpp"
#include "skygp/tree.hpp"

namespace skygp {

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind { sampling, coalescent };

struct LedgerEvent {
  double time;
  EventKind kind;
  int lineages_before;  // active lineages immediately before the event
};

/// Per-interval bookkeeping extracted from one tree: ordered events, the
/// coalescent/sampling counts m_k and s_k, and the weighted duration
/// w_k = sum_j C(n_{k,j},2) (t_{k,j} - t_{k,j-1}) with the grid points as
/// implicit boundary times. The likelihood, gradient and Hessian are O(M)
/// once these are in hand.
struct IntervalLedger {
  std::vector<std::vector<LedgerEvent>> events;  // per interval, index 0 = interval 1
  std::vector<int> coalescent_count;             // m_k
  std::vector<int> sampling_count;               // s_k
  std::vector<double> weighted_duration;         // w_k
  double root_height = 0.0;
  int n_tips = 0;

  int intervals() const { return static_cast<int>(weighted_duration.size()); }
};

inline double pairs_of(int n) { return 0.5 * n * (n - 1.0); }

/// Splits the time-ordered event stream of a tree at the grid points.
/// Intervals are half-open (g_{k-1}, g_k]; events at a grid point belong to
/// the interval on the left; ties at equal times order sampling events before
/// coalescent events, then by node id.
inline IntervalLedger extract_ledger(const TimeTree& tree, const Grid& grid) {
  validate_tree(tree);
  if (tree.root_height() <= 0) throw LedgerError("degenerate tree: root height is 0");

  struct Raw {
    double time;
    EventKind kind;
    int node;
  };
  std::vector<Raw> stream;
  stream.reserve(tree.nodes.size());
  for (int id = 0; id < tree.n_nodes(); ++id) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    stream.push_back({node.height, node.is_tip() ? EventKind::sampling : EventKind::coalescent, id});
  }
  std::sort(stream.begin(), stream.end(), [](const Raw& a, const Raw& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind == EventKind::sampling;
    return a.node < b.node;
  });

  const int m = grid.intervals();
  IntervalLedger ledger;
  ledger.events.resize(static_cast<std::size_t>(m));
  ledger.coalescent_count.assign(static_cast<std::size_t>(m), 0);
  ledger.sampling_count.assign(static_cast<std::size_t>(m), 0);
  ledger.weighted_duration.assign(static_cast<std::size_t>(m), 0.0);
  ledger.root_height = tree.root_height();
  ledger.n_tips = tree.n_tips();

  int active = 0;
  double t_prev = 0.0;
  const auto add_span = [&](double from, double to) {
    // credit C(active,2) * length to each interval the span crosses
    double a = from;
    while (a < to) {
      const int k = static_cast<int>(std::upper_bound(grid.points.begin(), grid.points.end(), a) -
                                     grid.points.begin());  // 0-based interval containing (a, ...]
      const double hi = k < m - 1 ? std::min(to, grid.points[static_cast<std::size_t>(k)]) : to;
      ledger.weighted_duration[static_cast<std::size_t>(k)] += pairs_of(active) * (hi - a);
      a = hi;
    }
  };

  for (const Raw& ev : stream) {
    add_span(t_prev, ev.time);
    const int k = grid.interval_of(ev.time) - 1;
    ledger.events[static_cast<std::size_t>(k)].push_back({ev.time, ev.kind, active});
    if (ev.kind == EventKind::sampling) {
      ledger.sampling_count[static_cast<std::size_t>(k)] += 1;
      ++active;
    } else {
      if (active < 2) throw LedgerError("corrupt tree: coalescent event with fewer than 2 lineages");
      ledger.coalescent_count[static_cast<std::size_t>(k)] += 1;
      --active;
    }
    t_prev = ev.time;
  }
  if (active != 1) throw LedgerError("corrupt tree: lineage count did not end at 1");
  return ledger;
}

/// One or more loci sharing a grid; trees are fixed data.
struct CoalescentData {
  Grid grid;
  std::vector<IntervalLedger> ledgers;

  int intervals() const { return grid.intervals(); }
  int loci() const { return static_cast<int>(ledgers.size()); }

  static CoalescentData from_trees(const std::vector<TimeTree>& trees, const Grid& grid) {
    CoalescentData data;
    data.grid = grid;
    data.ledgers.reserve(trees.size());
    for (const TimeTree& t : trees) data.ledgers.push_back(extract_ledger(t, grid));
    return data;
  }
};

}  // namespace skygp
