#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "skygp/coalescent.hpp"
#include "skygp/newick.hpp"
#include "skygp/oracle.hpp"
#include "skygp/quadrature.hpp"
#include "skygp/rng.hpp"
#include "skygp/simulate.hpp"

using namespace skygp;

namespace {

// random heterochronous tree with n <= 8 tips plus a random piecewise Ne
struct RandomCase {
  TimeTree tree;
  PiecewiseNe ne;
};

RandomCase random_case(std::uint64_t seed, int max_tips = 8, int max_pieces = 4) {
  Rng r(seed);
  SimSpec spec;
  const int tips = 2 + static_cast<int>(r.below(static_cast<std::uint64_t>(max_tips - 1)));
  spec.sampling.push_back({0.0, 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(tips)))});
  int placed = spec.sampling[0].second;
  while (placed < tips) {
    spec.sampling.push_back({r.uniform(0.0, 1.5), 1});
    ++placed;
  }
  const int pieces = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(max_pieces)));
  double edge = 0.0;
  for (int i = 0; i + 1 < pieces; ++i) {
    edge += r.uniform(0.3, 1.2);
    spec.ne.breaks.push_back(edge);
  }
  for (int i = 0; i < pieces; ++i) spec.ne.levels.push_back(r.uniform(0.3, 4.0));
  spec.seed = r.next_u64();
  RandomCase out;
  out.tree = simulate_tree(spec);
  out.ne = spec.ne;
  return out;
}

Eigen::VectorXd theta_from_ne(const PiecewiseNe& ne) {
  Eigen::VectorXd theta(ne.levels.size());
  for (std::size_t i = 0; i < ne.levels.size(); ++i)
    theta[static_cast<Eigen::Index>(i)] = std::log(ne.levels[i]);
  return theta;
}

}  // namespace

TEST_CASE("equally spaced grid construction") {
  const Grid g = Grid::equal_spacing(3.0, 4);
  REQUIRE(g.points == std::vector<double>{1.0, 2.0, 3.0});
  const Grid g2 = Grid::equal_spacing(1.0, 2);
  REQUIRE(g2.points == std::vector<double>{1.0});
  REQUIRE_THROWS(Grid::equal_spacing(0.0, 4));
  REQUIRE_THROWS(Grid::equal_spacing(1.0, 1));
}

TEST_CASE("ledger extraction traces events and weighted durations") {
  SECTION("two heterochronous tips split by a grid point") {
    // tips at 0 and 0.5, coalescence at 1.0
    const TimeTree t = parse_newick("(A:1.0,B:0.5);");
    Grid grid;
    grid.points = {0.75};
    const IntervalLedger ledger = extract_ledger(t, grid);
    REQUIRE(ledger.coalescent_count == std::vector<int>{0, 1});
    REQUIRE(ledger.sampling_count == std::vector<int>{2, 0});
    // interval 1: C(1,2)*0.5 + C(2,2)*0.25 = 0.25; interval 2: C(2,2)*0.25
    REQUIRE(ledger.weighted_duration[0] == Catch::Approx(0.25));
    REQUIRE(ledger.weighted_duration[1] == Catch::Approx(0.25));
    REQUIRE(ledger.events[0].size() == 2);
    REQUIRE(ledger.events[1][0].lineages_before == 2);
  }
  SECTION("three isochronous tips in one effective interval") {
    const TimeTree t = parse_newick("((A:1.0,B:1.0):1.0,C:2.0);");
    Grid grid;
    grid.points = {10.0};
    const IntervalLedger ledger = extract_ledger(t, grid);
    REQUIRE(ledger.coalescent_count[0] == 2);
    REQUIRE(ledger.weighted_duration[0] == Catch::Approx(3.0 * 1.0 + 1.0 * 1.0));
    REQUIRE(ledger.weighted_duration[1] == 0.0);
  }
  SECTION("event exactly at a grid point belongs to the left interval") {
    const TimeTree t = parse_newick("(A:1.0,B:1.0);");
    Grid grid;
    grid.points = {1.0};
    const IntervalLedger ledger = extract_ledger(t, grid);
    REQUIRE(ledger.coalescent_count == std::vector<int>{1, 0});
    REQUIRE(ledger.weighted_duration[0] == Catch::Approx(1.0));
  }
  SECTION("degenerate zero-height root is rejected") {
    TimeTree t;
    t.nodes.resize(3);
    t.tip_labels = {"A", "B"};
    t.nodes[0] = {2, -1, -1, 0.0};
    t.nodes[1] = {2, -1, -1, 0.0};
    t.nodes[2] = {-1, 0, 1, 0.0};
    t.root = 2;
    REQUIRE_THROWS_AS(extract_ledger(t, Grid::equal_spacing(1.0, 2)), LedgerError);
  }
}

TEST_CASE("log-likelihood matches hand evaluations") {
  SECTION("two tips, coalescent at 0.5") {
    const TimeTree t = parse_newick("(A:0.5,B:0.5);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    REQUIRE(log_likelihood(data, theta) == Catch::Approx(-0.5).margin(1e-14));
    const Eigen::VectorXd g = grad_log_likelihood(data, theta);
    REQUIRE(g[0] == Catch::Approx(-1.0 + 0.5));
    REQUIRE(g[1] == 0.0);
    const Eigen::VectorXd h = hess_diag_log_likelihood(data, theta);
    REQUIRE(h[0] == Catch::Approx(-0.5));
    REQUIRE(h[1] == 0.0);  // empty interval is a flat direction
  }
  SECTION("three tips, constant theta = log 2") {
    const TimeTree t = parse_newick("((A:1.0,B:1.0):1.0,C:2.0);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(2, std::log(2.0));
    REQUIRE(log_likelihood(data, theta) ==
            Catch::Approx(-2.0 * std::log(2.0) - 0.5 * 4.0).epsilon(1e-12));
  }
  SECTION("theta length mismatch") {
    const TimeTree t = parse_newick("(A:0.5,B:0.5);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    REQUIRE_THROWS_AS(log_likelihood(data, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  }
  SECTION("large theta limit is dominated by the event count term") {
    const TimeTree t = parse_newick("((A:1.0,B:1.0):1.0,C:2.0);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    const double big = 40.0;
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(2, big);
    REQUIRE(log_likelihood(data, theta) == Catch::Approx(-2.0 * big).epsilon(1e-10));
  }
}

TEST_CASE("per-interval MLE zeroes the gradient") {
  const RandomCase rc = random_case(99);
  Grid grid;
  grid.points = rc.ne.breaks.empty() ? std::vector<double>{1.0} : rc.ne.breaks;
  const CoalescentData data = CoalescentData::from_trees({rc.tree}, grid);
  const IntervalLedger& ledger = data.ledgers[0];
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(grid.intervals());
  for (int k = 0; k < grid.intervals(); ++k) {
    const int m = ledger.coalescent_count[static_cast<std::size_t>(k)];
    const double w = ledger.weighted_duration[static_cast<std::size_t>(k)];
    if (m > 0 && w > 0) theta[k] = std::log(w / m);
  }
  const Eigen::VectorXd g = grad_log_likelihood(data, theta);
  for (int k = 0; k < grid.intervals(); ++k) {
    const int m = ledger.coalescent_count[static_cast<std::size_t>(k)];
    if (m > 0) REQUIRE(std::abs(g[k]) < 1e-10);
  }
}

TEST_CASE("gradient and Hessian match central finite differences") {
  for (int rep = 0; rep < 100; ++rep) {
    const std::uint64_t seed = split_seed(7070, static_cast<std::uint64_t>(rep));
    const RandomCase rc = random_case(seed);
    Rng r(seed ^ 0xabcdef);
    Grid grid = Grid::equal_spacing(r.uniform(0.5, 2.5), 2 + static_cast<int>(r.below(4)));
    const CoalescentData data = CoalescentData::from_trees({rc.tree}, grid);
    const int m = grid.intervals();
    Eigen::VectorXd theta(m);
    for (int k = 0; k < m; ++k) theta[k] = r.uniform(-1.5, 1.5);

    const Eigen::VectorXd grad = grad_log_likelihood(data, theta);
    const Eigen::VectorXd hess = hess_diag_log_likelihood(data, theta);
    const double h = 1e-5;
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd up = theta, dn = theta;
      up[k] += h;
      dn[k] -= h;
      const double fd_grad = (log_likelihood(data, up) - log_likelihood(data, dn)) / (2 * h);
      // Hessian diagonal against the central difference of the (already
      // verified) gradient; second differences of the likelihood itself sit
      // at their roundoff floor at this h
      const double fd_hess =
          (grad_log_likelihood(data, up)[k] - grad_log_likelihood(data, dn)[k]) / (2 * h);
      REQUIRE(std::abs(fd_grad - grad[k]) <= 1e-6 * std::max(1.0, std::abs(grad[k])));
      REQUIRE(std::abs(fd_hess - hess[k]) <= 1e-5 * std::max(1.0, std::abs(hess[k])));
    }
  }
}

TEST_CASE("labeled-tree normalizer counts merger choices") {
  SECTION("four isochronous tips") {
    const TimeTree t = parse_newick("(((A:1,B:1):1,C:2):1,D:3);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    REQUIRE(log_tree_normalizer(data) == Catch::Approx(std::log(18.0)));
  }
  SECTION("two tips") {
    const TimeTree t = parse_newick("(A:1,B:1);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    REQUIRE(log_tree_normalizer(data) == 0.0);
  }
  SECTION("three tips") {
    const TimeTree t = parse_newick("((A:1,B:1):1,C:2);");
    const CoalescentData data = CoalescentData::from_trees({t}, Grid::equal_spacing(10.0, 2));
    REQUIRE(log_tree_normalizer(data) == Catch::Approx(std::log(3.0)));
  }
}

TEST_CASE("quadrature oracle agrees with closed forms") {
  SECTION("constant Ne") {
    const TimeTree t = parse_newick("(A:0.8,B:0.8);");
    const double n0 = 1.7;
    const double expected = -std::log(n0) - 0.8 / n0;
    REQUIRE(oracle_log_density(t, [&](double) { return n0; }) ==
            Catch::Approx(expected).margin(1e-10));
  }
  SECTION("exponentially growing Ne has an analytic hazard integral") {
    const TimeTree t = parse_newick("(A:1.0,B:1.0);");
    // Ne(t) = e^t: log density = -1 - (1 - e^{-1})
    const double expected = -1.0 - (1.0 - std::exp(-1.0));
    REQUIRE(oracle_log_density(t, [](double tt) { return std::exp(tt); }) ==
            Catch::Approx(expected).margin(1e-10));
  }
}

TEST_CASE("oracle equivalence: grid likelihood + normalizer = general density") {
  // the module's core correctness property, over random trees and trajectories
  for (int rep = 0; rep < 200; ++rep) {
    const RandomCase rc = random_case(split_seed(515, static_cast<std::uint64_t>(rep)));
    Grid grid;
    PiecewiseNe ne = rc.ne;
    if (ne.breaks.empty()) {
      grid.points = {rc.tree.root_height() + 1.0};
      ne.breaks = grid.points;
      ne.levels.push_back(ne.levels[0]);
    } else {
      grid.points = ne.breaks;
    }
    const CoalescentData data = CoalescentData::from_trees({rc.tree}, grid);
    const Eigen::VectorXd theta = theta_from_ne(ne);
    const double analytic = log_likelihood(data, theta) + log_tree_normalizer(data);
    const double numeric = oracle_log_density(rc.tree, ne);
    REQUIRE(std::abs(analytic - numeric) < 1e-8);
  }
}

TEST_CASE("translation property of the log-likelihood") {
  const RandomCase rc = random_case(404);
  const Grid grid = Grid::equal_spacing(2.0, 4);
  const CoalescentData data = CoalescentData::from_trees({rc.tree}, grid);
  Rng r(11);
  Eigen::VectorXd theta(4);
  for (int k = 0; k < 4; ++k) theta[k] = r.uniform(-1.0, 1.0);
  const IntervalLedger& ledger = data.ledgers[0];
  const double n_minus_1 = rc.tree.n_tips() - 1.0;
  for (double c : {0.3, -0.7, 2.0}) {
    double weighted = 0.0;
    for (int k = 0; k < 4; ++k)
      weighted += std::exp(-theta[k]) * ledger.weighted_duration[static_cast<std::size_t>(k)];
    const double expected_change = -n_minus_1 * c - (std::exp(-c) - 1.0) * weighted;
    const double change =
        log_likelihood(data, (theta.array() + c).matrix()) - log_likelihood(data, theta);
    REQUIRE(change == Catch::Approx(expected_change).epsilon(1e-12));
  }
}

TEST_CASE("multilocus likelihood adds exactly over loci") {
  const RandomCase a = random_case(31);
  const RandomCase b = random_case(32);
  const RandomCase c = random_case(33);
  const Grid grid = Grid::equal_spacing(2.0, 3);
  const CoalescentData joint = CoalescentData::from_trees({a.tree, b.tree, c.tree}, grid);
  Rng r(5);
  Eigen::VectorXd theta(3);
  for (int k = 0; k < 3; ++k) theta[k] = r.uniform(-1.0, 1.0);
  double sum = 0.0;
  for (const TimeTree* t : {&a.tree, &b.tree, &c.tree})
    sum += log_likelihood(CoalescentData::from_trees({*t}, grid), theta);
  REQUIRE(log_likelihood(joint, theta) == sum);  // bit-exact
  Eigen::VectorXd gsum = Eigen::VectorXd::Zero(3);
  for (const TimeTree* t : {&a.tree, &b.tree, &c.tree})
    gsum += grad_log_likelihood(CoalescentData::from_trees({*t}, grid), theta);
  REQUIRE((grad_log_likelihood(joint, theta) - gsum).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("ledger conservation on simulated trees") {
  for (int rep = 0; rep < 50; ++rep) {
    const RandomCase rc = random_case(split_seed(616, static_cast<std::uint64_t>(rep)));
    const Grid grid = Grid::equal_spacing(1.5, 3);
    const IntervalLedger ledger = extract_ledger(rc.tree, grid);
    int m_total = 0, s_total = 0;
    for (int k = 0; k < ledger.intervals(); ++k) {
      m_total += ledger.coalescent_count[static_cast<std::size_t>(k)];
      s_total += ledger.sampling_count[static_cast<std::size_t>(k)];
      REQUIRE(ledger.weighted_duration[static_cast<std::size_t>(k)] >= 0.0);
    }
    REQUIRE(m_total == rc.tree.n_tips() - 1);
    REQUIRE(s_total == rc.tree.n_tips());
  }
}

TEST_CASE("adaptive quadrature handles jumps and flags bad integrands") {
  const double v = adaptive_simpson([](double t) { return t < 0.5 ? 1.0 : 3.0; }, 0.0, 1.0, 1e-12);
  REQUIRE(v == Catch::Approx(2.0).margin(1e-9));
  REQUIRE_THROWS(adaptive_simpson([](double t) { return 1.0 / (t - 0.25); }, 0.0, 1.0, 1e-12));
}
