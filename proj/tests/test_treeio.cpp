#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "skygp/config.hpp"
#include "skygp/newick.hpp"
#include "skygp/rng.hpp"
#include "skygp/simulate.hpp"
#include "skygp/tables.hpp"

using namespace skygp;

namespace {

double tip_height(const TimeTree& t, const std::string& label) {
  for (int i = 0; i < t.n_tips(); ++i)
    if (t.tip_labels[static_cast<std::size_t>(i)] == label)
      return t.nodes[static_cast<std::size_t>(i)].height;
  FAIL("no tip labeled " + label);
  return 0;
}

// smallest tip label in the clade rooted at id; used to match nodes across
// two representations of the same tree
std::string min_label(const TimeTree& t, int id) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(id)];
  if (n.is_tip()) return t.tip_labels[static_cast<std::size_t>(id)];
  return std::min(min_label(t, n.left), min_label(t, n.right));
}

void require_same_tree(const TimeTree& a, int ida, const TimeTree& b, int idb, double tol) {
  const TreeNode& na = a.nodes[static_cast<std::size_t>(ida)];
  const TreeNode& nb = b.nodes[static_cast<std::size_t>(idb)];
  REQUIRE(na.is_tip() == nb.is_tip());
  REQUIRE(std::abs(na.height - nb.height) <= tol * std::max(1.0, std::abs(na.height)));
  if (na.is_tip()) {
    REQUIRE(a.tip_labels[static_cast<std::size_t>(ida)] == b.tip_labels[static_cast<std::size_t>(idb)]);
    return;
  }
  int al = na.left, ar = na.right;
  if (min_label(a, al) > min_label(a, ar)) std::swap(al, ar);
  int bl = nb.left, br = nb.right;
  if (min_label(b, bl) > min_label(b, br)) std::swap(bl, br);
  require_same_tree(a, al, b, bl, tol);
  require_same_tree(a, ar, b, br, tol);
}

}  // namespace

TEST_CASE("newick parsing computes heights from branch lengths") {
  const TimeTree t = parse_newick("((A:1.0,B:1.0):0.5,C:1.5);");
  REQUIRE(t.n_tips() == 3);
  REQUIRE(tip_height(t, "A") == 0.0);
  REQUIRE(tip_height(t, "B") == 0.0);
  REQUIRE(tip_height(t, "C") == 0.0);
  const int mrca_ab = t.nodes[0].parent;
  REQUIRE(t.nodes[static_cast<std::size_t>(mrca_ab)].height == Catch::Approx(1.0));
  REQUIRE(t.root_height() == Catch::Approx(1.5));
}

TEST_CASE("newick parsing handles dated tips implied by branch lengths") {
  // A deeper than B,C: heights follow from depth differences
  const TimeTree t = parse_newick("((A:2,B:1):1,C:2);");
  REQUIRE(tip_height(t, "A") == 0.0);
  REQUIRE(tip_height(t, "B") == Catch::Approx(1.0));
  REQUIRE(tip_height(t, "C") == Catch::Approx(1.0));
  const int mrca_ab = t.nodes[0].parent;
  REQUIRE(t.nodes[static_cast<std::size_t>(mrca_ab)].height == Catch::Approx(2.0));
  REQUIRE(t.root_height() == Catch::Approx(3.0));
}

TEST_CASE("newick parse errors carry positions") {
  REQUIRE_THROWS_AS(parse_newick("(A:1.0);"), ParseError);          // non-binary root
  REQUIRE_THROWS_AS(parse_newick("((A:1,B:2,C:3):1,D:4);"), ParseError);  // 3 children
  REQUIRE_THROWS_AS(parse_newick("((A:1,B:2:1,C:3);"), ParseError);  // malformed parens
  REQUIRE_THROWS_AS(parse_newick("((A:1,B):1,C:2);"), ParseError);   // missing branch length
  REQUIRE_THROWS_AS(parse_newick("((A:1,A:2):1,C:2);"), ParseError); // duplicate label
  try {
    parse_newick("((A:1,B:2):1,C:2)");
    FAIL("expected error for missing semicolon");
  } catch (const ParseError& e) {
    REQUIRE(std::string(e.what()).find("position") != std::string::npos);
  }
}

TEST_CASE("newick comments and internal labels are skipped") {
  const TimeTree t = parse_newick("((A:1.0,B:1.0)ab[comment]:0.5,C:1.5)root;");
  REQUIRE(t.n_tips() == 3);
  REQUIRE(t.root_height() == Catch::Approx(1.5));
}

TEST_CASE("zero-length branches are retained exactly") {
  const TimeTree t = parse_newick("((A:0.0,B:0.0):1.0,C:1.0);");
  const int mrca_ab = t.nodes[0].parent;
  REQUIRE(t.nodes[static_cast<std::size_t>(mrca_ab)].height == 0.0);
}

TEST_CASE("tip dates recalibrate heights") {
  const TimeTree base = parse_newick("((A:2,B:1):1,C:2);");

  SECTION("forward-calendar dates") {
    const TimeTree t =
        with_tip_dates(base, "label,date\nA,2018\nB,2017\nC,2017\n", DateDirection::forward_calendar);
    REQUIRE(tip_height(t, "A") == 0.0);
    REQUIRE(tip_height(t, "B") == 1.0);
    REQUIRE(tip_height(t, "C") == 1.0);
    REQUIRE(t.root_height() == Catch::Approx(3.0));
  }
  SECTION("all dates equal gives isochronous tips") {
    const TimeTree iso = parse_newick("((A:1.0,B:1.0):0.5,C:1.5);");
    const TimeTree t =
        with_tip_dates(iso, "label,date\nA,2000\nB,2000\nC,2000\n", DateDirection::forward_calendar);
    for (int i = 0; i < t.n_tips(); ++i) REQUIRE(t.nodes[static_cast<std::size_t>(i)].height == 0.0);
  }
  SECTION("backward ages pass through") {
    const TimeTree two = parse_newick("(A:1.0,B:0.5);");
    const TimeTree t = with_tip_dates(two, "label,date\nA,0.0\nB,0.5\n", DateDirection::backward_age);
    REQUIRE(tip_height(t, "A") == 0.0);
    REQUIRE(tip_height(t, "B") == 0.5);
  }
  SECTION("table errors") {
    REQUIRE_THROWS_AS(with_tip_dates(base, "label,date\nA,1\nB,1\n", DateDirection::backward_age),
                      TableError);  // missing tip C
    REQUIRE_THROWS_AS(
        with_tip_dates(base, "label,date\nA,1\nB,1\nC,1\nD,1\n", DateDirection::backward_age),
        TableError);  // unknown tip D
    REQUIRE_THROWS_AS(
        with_tip_dates(base, "label,date\nA,1\nA,2\nB,1\nC,1\n", DateDirection::backward_age),
        TableError);  // duplicate row
  }
  SECTION("dates incompatible with branch lengths are rejected") {
    REQUIRE_THROWS_AS(
        with_tip_dates(base, "label,date\nA,0\nB,5\nC,0\n", DateDirection::backward_age),
        TableError);
  }
}

TEST_CASE("after tip dating the youngest tip sits exactly at 0") {
  const TimeTree base = parse_newick("((A:2,B:1):1,C:2);");
  const TimeTree t =
      with_tip_dates(base, "label,date\nA,2018.25\nB,2017.25\nC,2017.25\n",
                     DateDirection::forward_calendar);
  double min_tip = t.nodes[0].height;
  for (int i = 1; i < t.n_tips(); ++i)
    min_tip = std::min(min_tip, t.nodes[static_cast<std::size_t>(i)].height);
  REQUIRE(min_tip == 0.0);
}

TEST_CASE("newick round-trip preserves topology and heights on simulated trees") {
  for (int rep = 0; rep < 1000; ++rep) {
    SimSpec spec;
    const std::uint64_t seed = split_seed(2024, static_cast<std::uint64_t>(rep));
    Rng layout(seed);
    const int tips = 2 + static_cast<int>(layout.below(9));
    spec.sampling.push_back({0.0, 1 + static_cast<int>(layout.below(static_cast<std::uint64_t>(tips)))});
    int placed = spec.sampling[0].second;
    while (placed < tips) {
      spec.sampling.push_back({layout.uniform(0.0, 2.0), 1});
      ++placed;
    }
    spec.ne.levels = {layout.uniform(0.2, 3.0)};
    spec.seed = seed;
    const TimeTree t = simulate_tree(spec);
    const TimeTree back = parse_newick(serialize_newick(t));
    require_same_tree(t, t.root, back, back.root, 1e-12);
  }
}

TEST_CASE("covariate loading aligns, standardizes and masks") {
  const Grid grid = Grid::equal_spacing(3.0, 3);

  SECTION("standardization to mean 0 sd 1") {
    const CovariateTable t = load_covariates("temp\n1\n2\n3\n", grid, true);
    REQUIRE(t.n_covariates() == 1);
    REQUIRE(t.values(0, 0) == Catch::Approx(-1.0));
    REQUIRE(t.values(0, 1) == Catch::Approx(0.0));
    REQUIRE(t.values(0, 2) == Catch::Approx(1.0));
  }
  SECTION("zero variance is an error") {
    REQUIRE_THROWS_AS(load_covariates("temp\n5\n5\n5\n", grid, true), TableError);
  }
  SECTION("missing middle entry standardizes over observed values") {
    const CovariateTable t = load_covariates("temp\n1\n\n3\n", grid, true);
    REQUIRE_FALSE(t.missing(0, 0));
    REQUIRE(t.missing(0, 1));
    REQUIRE_FALSE(t.missing(0, 2));
    const double sd = std::sqrt(2.0);
    REQUIRE(t.values(0, 0) == Catch::Approx((1.0 - 2.0) / sd));
    REQUIRE(t.values(0, 2) == Catch::Approx((3.0 - 2.0) / sd));
  }
  SECTION("row count mismatch is an error") {
    REQUIRE_THROWS_AS(load_covariates("temp\n1\n2\n", grid, false), TableError);
  }
  SECTION("all-missing covariate is an error") {
    REQUIRE_THROWS_AS(load_covariates("a,b\n1,\n2,\n3,\n", grid, false), TableError);
  }
  SECTION("time-column rows are binned by interval membership") {
    // intervals (0,1.5], (1.5,3], (3,root]; 0.5/0.9/1.5 average into interval 1
    const CovariateTable t =
        load_covariates("time,x\n0.5,2\n0.9,4\n1.5,6\n2.0,7\n9,1\n", grid, false);
    REQUIRE(t.values(0, 0) == Catch::Approx(4.0));
    REQUIRE(t.values(0, 1) == Catch::Approx(7.0));
    REQUIRE(t.missing(0, 2) == false);
    REQUIRE(t.values(0, 2) == Catch::Approx(1.0));
  }
  SECTION("observed standardized entries have mean 0 and sample sd 1") {
    const CovariateTable t = load_covariates("x,y\n1,4\n5,\n2,9\n", grid, true);
    for (int p = 0; p < 2; ++p) {
      double mean = 0, ss = 0;
      int n = 0;
      for (int k = 0; k < 3; ++k)
        if (!t.missing(p, k)) {
          mean += t.values(p, k);
          ++n;
        }
      mean /= n;
      for (int k = 0; k < 3; ++k)
        if (!t.missing(p, k)) ss += (t.values(p, k) - mean) * (t.values(p, k) - mean);
      REQUIRE(std::abs(mean) < 1e-12);
      REQUIRE(std::abs(std::sqrt(ss / (n - 1)) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("run config parsing") {
  const std::string text =
      "# comment\n"
      "tree_file = a.nwk\n"
      "tree_file = b.nwk\n"
      "grid_cutoff = 4\n"
      "grid_intervals = 10\n"
      "seed = 42\n"
      "mass_mode = diagonal\n";
  const RunConfig cfg = parse_config(text);
  REQUIRE(cfg.tree_files.size() == 2);
  REQUIRE(cfg.grid_intervals == 10);
  REQUIRE(cfg.seed == 42);
  REQUIRE(cfg.mass() == MassMode::hessian_diagonal);
  cfg.validate();

  REQUIRE_THROWS_AS(parse_config("not_a_key = 1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("grid_cutoff\n"), ConfigError);

  RunConfig bad = cfg;
  bad.grid_intervals = 1;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.step_size = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.grid_points = {1.0, 1.0};
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("explicit grids pass through verbatim") {
  const Grid g = Grid::from_points({0.5, 0.9, 2.0});
  REQUIRE(g.intervals() == 4);
  REQUIRE(g.points == std::vector<double>{0.5, 0.9, 2.0});
  REQUIRE_THROWS(Grid::from_points({0.9, 0.5}));
}
