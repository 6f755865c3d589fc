#pragma once

#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace skygp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MassMode { identity, hessian_diagonal, hessian_tridiagonal };

/// Full run configuration, parsed from line-oriented `key = value` text.
/// Unknown keys are errors; all keys are documented in the README.
struct RunConfig {
  // data
  std::vector<std::string> tree_files;
  std::vector<std::string> tip_date_files;  // empty, or one per tree file
  std::string date_direction = "backward";  // forward | backward
  std::string covariates_file;
  bool standardize_covariates = true;

  // grid: either cutoff + intervals, or explicit points
  double grid_cutoff = 0.0;
  int grid_intervals = 0;
  std::vector<double> grid_points;

  // priors
  double tau_prior_shape = 1.0;
  double tau_prior_scale = 10.0;
  double sigma2_prior_rate = 1.0;
  double ell_prior_rate = 1.0;
  double ell_min = 0.0;
  double gmrf_level_anchor_sd = 0.0;  // 0 keeps the intrinsic (improper) GMRF
  double kernel_jitter = 1e-8;
  bool whiten = false;

  // hmc
  int leapfrog_steps = 32;
  double step_size = 0.1;
  double target_accept = 0.8;
  std::string mass_mode = "tridiagonal";  // identity | diagonal | tridiagonal
  int mass_refresh = 100;

  // chain
  int warmup = 1000;
  int iterations = 2000;
  int thin = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  int checkpoint_every = 500;
  std::string out_dir = ".";
  double burn_in = 0.1;

  MassMode mass() const {
    if (mass_mode == "identity") return MassMode::identity;
    if (mass_mode == "diagonal") return MassMode::hessian_diagonal;
    if (mass_mode == "tridiagonal") return MassMode::hessian_tridiagonal;
    throw ConfigError("mass_mode must be identity, diagonal or tridiagonal, got '" + mass_mode + "'");
  }

  bool forward_dates() const {
    if (date_direction == "forward") return true;
    if (date_direction == "backward") return false;
    throw ConfigError("date_direction must be forward or backward, got '" + date_direction + "'");
  }

  void validate() const {
    if (grid_points.empty()) {
      if (grid_intervals < 2) throw ConfigError("grid_intervals must be at least 2");
      if (!(grid_cutoff > 0)) throw ConfigError("grid_cutoff must be positive");
    } else {
      for (std::size_t i = 1; i < grid_points.size(); ++i)
        if (grid_points[i] <= grid_points[i - 1])
          throw ConfigError("grid_points must be strictly increasing");
      if (grid_points.front() <= 0) throw ConfigError("grid_points must be positive");
    }
    if (iterations <= 0) throw ConfigError("iterations must be positive");
    if (warmup < 0) throw ConfigError("warmup cannot be negative");
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (chains < 1) throw ConfigError("chains must be at least 1");
    if (!(step_size > 0)) throw ConfigError("step_size must be positive");
    if (leapfrog_steps < 1) throw ConfigError("leapfrog_steps must be at least 1");
    if (!(target_accept > 0 && target_accept < 1)) throw ConfigError("target_accept must lie in (0,1)");
    if (ell_min < 0) throw ConfigError("ell_min cannot be negative");
    if (!(burn_in >= 0 && burn_in < 1)) throw ConfigError("burn_in must lie in [0,1)");
    if (tree_files.empty()) throw ConfigError("at least one tree_file is required");
    if (!tip_date_files.empty() && tip_date_files.size() != tree_files.size())
      throw ConfigError("tip_dates_file count must match tree_file count");
    mass();
    forward_dates();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " must be true or false, got '" + v + "'");
}

inline double parse_num(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') throw ConfigError(key + ": cannot parse number '" + v + "'");
  return x;
}

inline std::vector<double> parse_num_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(parse_num(tok, key));
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");

    if (key == "tree_file") cfg.tree_files.push_back(value);
    else if (key == "tip_dates_file") cfg.tip_date_files.push_back(value);
    else if (key == "date_direction") cfg.date_direction = value;
    else if (key == "covariates_file") cfg.covariates_file = value;
    else if (key == "standardize_covariates") cfg.standardize_covariates = detail::parse_bool(value, key);
    else if (key == "grid_cutoff") cfg.grid_cutoff = detail::parse_num(value, key);
    else if (key == "grid_intervals") cfg.grid_intervals = static_cast<int>(detail::parse_num(value, key));
    else if (key == "grid_points") cfg.grid_points = detail::parse_num_list(value, key);
    else if (key == "tau_prior_shape") cfg.tau_prior_shape = detail::parse_num(value, key);
    else if (key == "tau_prior_scale") cfg.tau_prior_scale = detail::parse_num(value, key);
    else if (key == "sigma2_prior_rate") cfg.sigma2_prior_rate = detail::parse_num(value, key);
    else if (key == "ell_prior_rate") cfg.ell_prior_rate = detail::parse_num(value, key);
    else if (key == "ell_min") cfg.ell_min = detail::parse_num(value, key);
    else if (key == "gmrf_level_anchor_sd") cfg.gmrf_level_anchor_sd = detail::parse_num(value, key);
    else if (key == "kernel_jitter") cfg.kernel_jitter = detail::parse_num(value, key);
    else if (key == "whiten") cfg.whiten = detail::parse_bool(value, key);
    else if (key == "leapfrog_steps") cfg.leapfrog_steps = static_cast<int>(detail::parse_num(value, key));
    else if (key == "step_size") cfg.step_size = detail::parse_num(value, key);
    else if (key == "target_accept") cfg.target_accept = detail::parse_num(value, key);
    else if (key == "mass_mode") cfg.mass_mode = value;
    else if (key == "mass_refresh") cfg.mass_refresh = static_cast<int>(detail::parse_num(value, key));
    else if (key == "warmup") cfg.warmup = static_cast<int>(detail::parse_num(value, key));
    else if (key == "iterations") cfg.iterations = static_cast<int>(detail::parse_num(value, key));
    else if (key == "thin") cfg.thin = static_cast<int>(detail::parse_num(value, key));
    else if (key == "chains") cfg.chains = static_cast<int>(detail::parse_num(value, key));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_num(value, key));
    else if (key == "checkpoint_every") cfg.checkpoint_every = static_cast<int>(detail::parse_num(value, key));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "burn_in") cfg.burn_in = detail::parse_num(value, key);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

}  // namespace skygp
