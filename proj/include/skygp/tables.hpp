#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/csv.hpp"
#include "skygp/grid.hpp"
#include "skygp/tree.hpp"

namespace skygp {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DateDirection { forward_calendar, backward_age };

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw TableError("cannot parse " + what + " '" + s + "'");
  if (!std::isfinite(v)) throw TableError(what + " must be finite, got '" + s + "'");
  return v;
}

inline bool is_number(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

}  // namespace detail

/// Re-dates the tips of a tree from a `label,date` CSV and rebuilds internal
/// heights by propagating the original branch lengths from the dated tips.
/// Forward-calendar dates convert via height = max_date - date; backward ages
/// shift so the youngest tip sits at height 0.
inline TimeTree with_tip_dates(const TimeTree& tree, const std::string& csv_text,
                               DateDirection direction) {
  const auto rows = csv::parse(csv_text);
  std::map<std::string, double> dates;
  std::size_t first = 0;
  if (!rows.empty() && rows[0].size() >= 2 && !detail::is_number(rows[0][1])) first = 1;  // header
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != 2)
      throw TableError("tip-date row " + std::to_string(r + 1) + " must have 2 columns");
    const std::string& label = rows[r][0];
    if (dates.count(label)) throw TableError("duplicate tip-date row for '" + label + "'");
    dates[label] = detail::parse_double(rows[r][1], "tip date");
  }

  const int n = tree.n_tips();
  for (const auto& [label, _] : dates) {
    bool found = false;
    for (const auto& tl : tree.tip_labels)
      if (tl == label) found = true;
    if (!found) throw TableError("unknown tip label '" + label + "' in date table");
  }

  double extreme = 0.0;
  bool have = false;
  for (int i = 0; i < n; ++i) {
    const auto it = dates.find(tree.tip_labels[static_cast<std::size_t>(i)]);
    if (it == dates.end())
      throw TableError("missing tip '" + tree.tip_labels[static_cast<std::size_t>(i)] +
                       "' in date table");
    if (!have) {
      extreme = it->second;
      have = true;
    } else {
      extreme = direction == DateDirection::forward_calendar ? std::max(extreme, it->second)
                                                             : std::min(extreme, it->second);
    }
  }

  TimeTree out = tree;
  for (int i = 0; i < n; ++i) {
    const double d = dates.at(tree.tip_labels[static_cast<std::size_t>(i)]);
    out.nodes[static_cast<std::size_t>(i)].height =
        direction == DateDirection::forward_calendar ? extreme - d : d - extreme;
  }

  // Propagate original branch lengths up from the re-dated tips; both child
  // paths must agree for the tree to be consistently dated.
  const double scale = std::max(1.0, std::abs(tree.root_height()));
  for (int id : postorder(out)) {
    TreeNode& node = out.nodes[static_cast<std::size_t>(id)];
    if (node.is_tip()) continue;
    const auto branch = [&](int child) {
      return tree.nodes[static_cast<std::size_t>(id)].height -
             tree.nodes[static_cast<std::size_t>(child)].height;
    };
    const double via_left = out.nodes[static_cast<std::size_t>(node.left)].height + branch(node.left);
    const double via_right =
        out.nodes[static_cast<std::size_t>(node.right)].height + branch(node.right);
    if (std::abs(via_left - via_right) > 1e-6 * scale)
      throw TableError("tip dates are inconsistent with branch lengths at an internal node");
    node.height = 0.5 * (via_left + via_right);
  }
  validate_tree(out);
  return out;
}

/// Covariate values aligned to grid intervals: P covariates by M intervals,
/// with a missing mask. Standardization (mean 0, sample sd 1 over observed
/// entries) is recorded so imputed values live on the same scale.
struct CovariateTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;                           // P x M; missing entries hold 0
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;  // P x M
  std::vector<double> shift;                        // per covariate; 0 when not standardized
  std::vector<double> spread;                       // per covariate; 1 when not standardized

  int n_covariates() const { return static_cast<int>(values.rows()); }
  int n_intervals() const { return static_cast<int>(values.cols()); }
};

/// Loads a covariate CSV aligned to the grid. Two layouts are accepted:
/// a header of covariate names with exactly M data rows (interval 1 first,
/// oldest interval last), or a leading `time` column whose rows are binned to
/// intervals by membership in (g_{k-1}, g_k] (multiple rows per interval are
/// averaged; empty intervals are missing). Empty cells denote missing values.
inline CovariateTable load_covariates(const std::string& csv_text, const Grid& grid,
                                      bool standardize) {
  const auto rows = csv::parse(csv_text);
  if (rows.size() < 2) throw TableError("covariate CSV needs a header row and data rows");
  const std::vector<std::string>& header = rows[0];
  if (header.empty()) throw TableError("covariate CSV has an empty header");

  const bool timed = header[0] == "time";
  const std::size_t first_col = timed ? 1 : 0;
  const int p_count = static_cast<int>(header.size() - first_col);
  if (p_count < 1) throw TableError("covariate CSV names no covariates");
  const int m = grid.intervals();

  CovariateTable table;
  table.names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_col), header.end());
  table.values = Eigen::MatrixXd::Zero(p_count, m);
  table.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p_count, m, true);

  if (!timed) {
    if (static_cast<int>(rows.size()) - 1 != m)
      throw TableError("covariate CSV has " + std::to_string(rows.size() - 1) + " data rows but the grid has " +
                       std::to_string(m) + " intervals");
    for (int k = 0; k < m; ++k) {
      const auto& row = rows[static_cast<std::size_t>(k + 1)];
      if (static_cast<int>(row.size()) != p_count)
        throw TableError("covariate CSV row " + std::to_string(k + 2) + " has wrong column count");
      for (int p = 0; p < p_count; ++p) {
        if (row[static_cast<std::size_t>(p)].empty()) continue;
        table.values(p, k) = detail::parse_double(row[static_cast<std::size_t>(p)], "covariate value");
        table.missing(p, k) = false;
      }
    }
  } else {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(p_count, m);
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(p_count, m);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (static_cast<int>(row.size()) != p_count + 1)
        throw TableError("covariate CSV row " + std::to_string(r + 1) + " has wrong column count");
      const double t = detail::parse_double(row[0], "time");
      const int k = grid.interval_of(t) - 1;
      for (int p = 0; p < p_count; ++p) {
        if (row[static_cast<std::size_t>(p + 1)].empty()) continue;
        sums(p, k) += detail::parse_double(row[static_cast<std::size_t>(p + 1)], "covariate value");
        counts(p, k) += 1;
      }
    }
    for (int p = 0; p < p_count; ++p)
      for (int k = 0; k < m; ++k)
        if (counts(p, k) > 0) {
          table.values(p, k) = sums(p, k) / counts(p, k);
          table.missing(p, k) = false;
        }
  }

  table.shift.assign(static_cast<std::size_t>(p_count), 0.0);
  table.spread.assign(static_cast<std::size_t>(p_count), 1.0);
  for (int p = 0; p < p_count; ++p) {
    int observed = 0;
    double mean = 0.0;
    for (int k = 0; k < m; ++k)
      if (!table.missing(p, k)) {
        ++observed;
        mean += table.values(p, k);
      }
    if (observed == 0) throw TableError("covariate '" + table.names[static_cast<std::size_t>(p)] + "' is all-missing");
    if (!standardize) continue;
    mean /= observed;
    double ss = 0.0;
    for (int k = 0; k < m; ++k)
      if (!table.missing(p, k)) {
        const double d = table.values(p, k) - mean;
        ss += d * d;
      }
    if (observed < 2 || ss == 0.0)
      throw TableError("covariate '" + table.names[static_cast<std::size_t>(p)] +
                       "' has zero variance; cannot standardize");
    const double sd = std::sqrt(ss / (observed - 1));
    for (int k = 0; k < m; ++k)
      if (!table.missing(p, k)) table.values(p, k) = (table.values(p, k) - mean) / sd;
    table.shift[static_cast<std::size_t>(p)] = mean;
    table.spread[static_cast<std::size_t>(p)] = sd;
  }
  return table;
}

}  // namespace skygp
