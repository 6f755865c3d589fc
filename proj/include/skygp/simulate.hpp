#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/grid.hpp"
#include "skygp/oracle.hpp"
#include "skygp/rng.hpp"
#include "skygp/tree.hpp"

namespace skygp {

/// Simulation request: a sampling schedule (tip count per backward time) and
/// a piecewise-constant Ne trajectory.
struct SimSpec {
  std::vector<std::pair<double, int>> sampling;  // (time, tips added), times >= 0
  PiecewiseNe ne;
  std::uint64_t seed = 1;

  int total_tips() const {
    int n = 0;
    for (const auto& [t, c] : sampling) n += c;
    return n;
  }

  void validate() const {
    if (total_tips() < 2) throw std::invalid_argument("simulation needs at least 2 tips");
    for (const auto& [t, c] : sampling) {
      if (t < 0) throw std::invalid_argument("sampling times must be non-negative");
      if (c < 1) throw std::invalid_argument("each sampling time must add at least one tip");
    }
    if (ne.levels.size() != ne.breaks.size() + 1)
      throw std::invalid_argument("Ne trajectory needs one more level than break points");
    for (double v : ne.levels)
      if (!(v > 0)) throw std::invalid_argument("Ne levels must be positive");
  }
};

namespace detail {

// Exact waiting time: smallest dt with rate * integral_t^{t+dt} 1/Ne = e,
// walking the Ne pieces in closed form.
inline double invert_hazard(const PiecewiseNe& ne, double t, double rate, double e) {
  double remaining = e;
  double pos = t;
  std::size_t piece = static_cast<std::size_t>(
      std::lower_bound(ne.breaks.begin(), ne.breaks.end(), pos) - ne.breaks.begin());
  for (;;) {
    const double level = ne.levels[piece];
    const double upper =
        piece < ne.breaks.size() ? ne.breaks[piece] : std::numeric_limits<double>::infinity();
    if (upper == std::numeric_limits<double>::infinity()) return pos + remaining * level / rate;
    const double capacity = rate * (upper - pos) / level;
    if (remaining <= capacity) return pos + remaining * level / rate;
    remaining -= capacity;
    pos = upper;
    ++piece;
  }
}

}  // namespace detail

/// Heterochronous coalescent simulation by exact time rescaling: waiting
/// times solve C(n,2) * integral 1/Ne = Exp(1) piecewise in closed form;
/// scheduled samplings inject lineages; pairs to merge are uniform.
inline TimeTree simulate_tree(const SimSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<std::pair<double, int>> schedule = spec.sampling;
  std::sort(schedule.begin(), schedule.end());

  const int n = spec.total_tips();
  TimeTree tree;
  tree.nodes.resize(static_cast<std::size_t>(2 * n - 1));
  tree.tip_labels.resize(static_cast<std::size_t>(n));

  int next_tip = 0;
  int next_internal = n;
  std::vector<int> active;
  active.reserve(static_cast<std::size_t>(n));
  std::size_t sched_pos = 0;
  double now = 0.0;

  const auto inject = [&](double t, int count) {
    for (int i = 0; i < count; ++i) {
      tree.nodes[static_cast<std::size_t>(next_tip)].height = t;
      tree.tip_labels[static_cast<std::size_t>(next_tip)] = "t" + std::to_string(next_tip + 1);
      active.push_back(next_tip);
      ++next_tip;
    }
  };

  while (sched_pos < schedule.size() || active.size() > 1) {
    const double next_sampling =
        sched_pos < schedule.size() ? schedule[sched_pos].first : std::numeric_limits<double>::infinity();
    if (active.size() < 2) {
      // nothing can coalesce; jump to the next sampling time
      now = next_sampling;
      inject(now, schedule[sched_pos].second);
      ++sched_pos;
      continue;
    }
    const double rate_pairs = 0.5 * static_cast<double>(active.size()) * (active.size() - 1.0);
    const double coal_time = detail::invert_hazard(spec.ne, now, rate_pairs, rng.exponential());
    if (coal_time >= next_sampling) {
      now = next_sampling;
      inject(now, schedule[sched_pos].second);
      ++sched_pos;
      continue;  // residual hazard is memoryless; redraw from the new time
    }
    now = coal_time;
    const std::size_t i = static_cast<std::size_t>(rng.below(active.size()));
    std::size_t j = static_cast<std::size_t>(rng.below(active.size() - 1));
    if (j >= i) ++j;
    const int a = active[i];
    const int b = active[j];
    const int parent = next_internal++;
    tree.nodes[static_cast<std::size_t>(parent)].height = now;
    tree.nodes[static_cast<std::size_t>(parent)].left = a;
    tree.nodes[static_cast<std::size_t>(parent)].right = b;
    tree.nodes[static_cast<std::size_t>(a)].parent = parent;
    tree.nodes[static_cast<std::size_t>(b)].parent = parent;
    active[std::min(i, j)] = parent;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::max(i, j)));
  }

  tree.root = active.front();
  validate_tree(tree);
  return tree;
}

enum class ScenarioKind { linear, concave };

/// A synthetic validation scenario: true log Ne is a function of a covariate
/// series on the grid, and one tree is simulated under it.
struct Scenario {
  TimeTree tree;
  Eigen::VectorXd covariate;   // length M
  Eigen::VectorXd theta_true;  // length M
  Grid grid;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::linear;
  double a = 0.0;
  double b = 1.0;
  double c = -0.5;  // used by the concave kind; must be negative
  Eigen::VectorXd covariate;  // one value per grid interval
  Grid grid;
  int taxa = 200;
  std::uint64_t seed = 1;
  // tips at time 0 by default; > 0 spreads them uniformly over [0, span]
  double sampling_span = 0.0;
  int sampling_batches = 40;
};

inline Scenario make_scenario(const ScenarioSpec& spec) {
  const int m = spec.grid.intervals();
  if (static_cast<int>(spec.covariate.size()) != m)
    throw std::invalid_argument("covariate series length must equal the grid interval count");
  if (spec.kind == ScenarioKind::concave && !(spec.c < 0))
    throw std::invalid_argument("concave scenario needs c < 0");

  Scenario out;
  out.grid = spec.grid;
  out.covariate = spec.covariate;
  out.theta_true.resize(m);
  for (int k = 0; k < m; ++k) {
    const double z = spec.covariate[k];
    out.theta_true[k] =
        spec.kind == ScenarioKind::linear ? spec.a + spec.b * z : spec.a + spec.b * z + spec.c * z * z;
  }

  SimSpec sim;
  sim.ne.breaks = spec.grid.points;
  sim.ne.levels.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) sim.ne.levels[static_cast<std::size_t>(k)] = std::exp(out.theta_true[k]);
  sim.seed = spec.seed;
  if (spec.sampling_span > 0 && spec.sampling_batches > 1) {
    const int batches = std::min(spec.sampling_batches, spec.taxa);
    const int base = spec.taxa / batches;
    int remainder = spec.taxa % batches;
    for (int i = 0; i < batches; ++i) {
      const double t = spec.sampling_span * i / (batches - 1);
      int count = base + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
      if (count > 0) sim.sampling.push_back({t, count});
    }
  } else {
    sim.sampling.push_back({0.0, spec.taxa});
  }
  out.tree = simulate_tree(sim);
  return out;
}

}  // namespace skygp
