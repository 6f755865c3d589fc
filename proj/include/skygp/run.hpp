#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "skygp/chain.hpp"
#include "skygp/config.hpp"
#include "skygp/csv.hpp"
#include "skygp/newick.hpp"
#include "skygp/posterior.hpp"
#include "skygp/simulate.hpp"
#include "skygp/summarize.hpp"
#include "skygp/tables.hpp"

namespace skygp {

/// Missing or unreadable input file; the CLI maps this to exit code 2.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct LoadedInputs {
  std::vector<TimeTree> trees;
  Grid grid{};
  CoalescentData data;
  CovariateTable covariates;  // zero covariates when no file was given
  PriorSettings prior;
};

inline Grid grid_from_config(const RunConfig& cfg) {
  return cfg.grid_points.empty() ? Grid::equal_spacing(cfg.grid_cutoff, cfg.grid_intervals)
                                 : Grid::from_points(cfg.grid_points);
}

inline LoadedInputs load_inputs(const RunConfig& cfg) {
  cfg.validate();
  LoadedInputs out;
  out.grid = grid_from_config(cfg);
  for (std::size_t i = 0; i < cfg.tree_files.size(); ++i) {
    TimeTree tree = parse_newick(read_file(cfg.tree_files[i]));
    if (!cfg.tip_date_files.empty()) {
      const DateDirection dir = cfg.forward_dates() ? DateDirection::forward_calendar
                                                    : DateDirection::backward_age;
      tree = with_tip_dates(tree, read_file(cfg.tip_date_files[i]), dir);
    }
    out.trees.push_back(std::move(tree));
  }
  out.data = CoalescentData::from_trees(out.trees, out.grid);

  if (!cfg.covariates_file.empty())
    out.covariates = load_covariates(read_file(cfg.covariates_file), out.grid,
                                     cfg.standardize_covariates);

  out.prior.tau_shape = cfg.tau_prior_shape;
  out.prior.tau_scale = cfg.tau_prior_scale;
  out.prior.sigma2_rate = cfg.sigma2_prior_rate;
  out.prior.ell_rate = cfg.ell_prior_rate;
  out.prior.ell_min = cfg.ell_min;
  out.prior.anchor_sd = cfg.gmrf_level_anchor_sd;
  out.prior.jitter_base = cfg.kernel_jitter;
  out.prior.whiten = cfg.whiten;
  return out;
}

inline std::string trace_path(const RunConfig& cfg, int chain) {
  return cfg.out_dir + "/trace_" + std::to_string(chain + 1) + ".tsv";
}

inline std::string checkpoint_path(const RunConfig& cfg, int chain) {
  return cfg.out_dir + "/checkpoint_" + std::to_string(chain + 1) + ".ck";
}

inline void write_run_meta(const RunConfig& cfg, const std::string& config_text) {
  std::ofstream out(cfg.out_dir + "/run_meta.txt", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write run_meta.txt in " + cfg.out_dir);
  out << "program = skygp 0.1.0\n";
  out << "config_hash = " << fnv1a_hash(config_text) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "chains = " << cfg.chains << '\n';
  out << "warmup = " << cfg.warmup << '\n';
  out << "iterations = " << cfg.iterations << '\n';
  out << "thin = " << cfg.thin << '\n';
  out << "burn_in_default = " << cfg.burn_in << '\n';
}

inline ChainSettings chain_settings(const RunConfig& cfg, int chain) {
  ChainSettings s;
  s.leapfrog_steps = cfg.leapfrog_steps;
  s.step_size = cfg.step_size;
  s.target_accept = cfg.target_accept;
  switch (cfg.mass()) {
    case MassMode::identity: s.mass_mode = MassMatrixMode::identity; break;
    case MassMode::hessian_diagonal: s.mass_mode = MassMatrixMode::hessian_diagonal; break;
    case MassMode::hessian_tridiagonal: s.mass_mode = MassMatrixMode::hessian_tridiagonal; break;
  }
  s.mass_refresh = cfg.mass_refresh;
  s.warmup = cfg.warmup;
  s.iterations = cfg.iterations;
  s.thin = cfg.thin;
  s.checkpoint_every = cfg.checkpoint_every;
  s.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(chain));
  s.trace_path = trace_path(cfg, chain);
  s.checkpoint_path = checkpoint_path(cfg, chain);
  return s;
}

/// Runs warmup + sampling for every chain (concurrently when chains > 1) and
/// writes traces, checkpoints and run_meta.txt. With `resume` set, chains
/// continue from their checkpoints (an explicit checkpoint path may override
/// the canonical one for single-chain runs); `stop_after` ends each chain
/// early at that iteration (used to exercise kill/resume).
inline void run_inference(const RunConfig& cfg, const std::string& config_text,
                          bool resume = false,
                          std::optional<long> stop_after = std::nullopt,
                          const std::string& resume_checkpoint = {}) {
  const LoadedInputs in = load_inputs(cfg);
  const Model model(&in.data, in.covariates, in.prior);

  std::filesystem::create_directories(cfg.out_dir);
  if (!resume) write_run_meta(cfg, config_text);
  if (!resume_checkpoint.empty() && cfg.chains > 1)
    throw std::runtime_error(
        "an explicit --resume checkpoint only applies to single-chain runs; "
        "multi-chain runs resume from the checkpoints in out_dir");

  std::vector<std::string> errors(static_cast<std::size_t>(cfg.chains));
  const auto run_one = [&](int c) {
    try {
      Chain chain(model, chain_settings(cfg, c));
      if (resume)
        chain.restore(!resume_checkpoint.empty() && c == 0 ? resume_checkpoint
                                                           : checkpoint_path(cfg, c));
      else
        chain.start_fresh();
      chain.run(stop_after);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  };

  if (cfg.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    for (int c = 0; c < cfg.chains; ++c) workers.emplace_back(run_one, c);
    for (auto& w : workers) w.join();
  }
  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error(err);
}

/// Reads all chain traces, applies per-chain burn-in, pools, and writes the
/// summary CSVs. With several chains a Gelman-Rubin table is written as well
/// (reported, not enforced).
inline PosteriorSummary run_summarize(const RunConfig& cfg, double burn_in, double threshold) {
  const LoadedInputs in = load_inputs(cfg);

  std::vector<TraceData> traces;
  for (int c = 0; c < cfg.chains; ++c) traces.push_back(read_trace(trace_path(cfg, c)));

  TraceData pooled;
  pooled.columns = traces[0].columns;
  std::vector<std::size_t> kept_from;
  for (const auto& t : traces) {
    if (t.columns != pooled.columns) throw std::runtime_error("chain traces have mismatched columns");
    kept_from.push_back(static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(t.rows.size()))));
  }
  for (std::size_t c = 0; c < traces.size(); ++c)
    for (std::size_t r = kept_from[c]; r < traces[c].rows.size(); ++r)
      pooled.rows.push_back(traces[c].rows[r]);

  if (cfg.chains > 1) {
    std::ofstream out(cfg.out_dir + "/rhat.csv", std::ios::trunc);
    out << "parameter,rhat\n";
    std::size_t shortest = std::string::npos;
    for (std::size_t c = 0; c < traces.size(); ++c)
      shortest = std::min(shortest, traces[c].rows.size() - kept_from[c]);
    for (std::size_t col = 0; col < pooled.columns.size(); ++col) {
      const std::string& name = pooled.columns[col];
      if (name == "iteration" || name == "accept" || name == "divergent") continue;
      std::vector<std::vector<double>> per_chain;
      for (std::size_t c = 0; c < traces.size(); ++c) {
        std::vector<double> v = traces[c].column_values(static_cast<int>(col), kept_from[c]);
        v.resize(shortest);
        per_chain.push_back(std::move(v));
      }
      out << csv::join_row({name, csv::format(gelman_rubin(per_chain))});
    }
  }

  double root_hi = 0.0;
  for (const auto& ledger : in.data.ledgers) root_hi = std::max(root_hi, ledger.root_height);

  // curve x-values: first covariate, with missing entries at their posterior medians
  std::vector<double> z_at_grid;
  if (in.covariates.n_covariates() > 0) {
    const int m = in.grid.intervals();
    z_at_grid.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      if (!in.covariates.missing(0, k)) {
        z_at_grid[static_cast<std::size_t>(k)] = in.covariates.values(0, k);
      } else {
        const std::string col =
            "zmiss_" + in.covariates.names[0] + "_" + std::to_string(k + 1);
        z_at_grid[static_cast<std::size_t>(k)] =
            median_of(pooled.column_values(pooled.column(col)));
      }
    }
  }

  // burn-in already applied per chain above
  PosteriorSummary summary = summarize_trace(pooled, 0.0, in.grid, root_hi, z_at_grid, threshold);
  write_summary(summary, cfg.out_dir);
  return summary;
}

// ---- simulator front-end ----

struct SimulateConfig {
  std::string kind = "linear";  // linear | concave | table
  double a = 0.0, b = 1.0, c = -0.5;
  std::vector<double> theta_table;  // used by kind = table
  std::vector<double> covariate;
  std::string covariate_file;
  double grid_cutoff = 0.0;
  int grid_intervals = 0;
  std::vector<double> grid_points;
  int taxa = 200;
  std::uint64_t seed = 1;
  double sampling_span = 0.0;
  int sampling_batches = 40;
  std::string out_dir = ".";
};

inline SimulateConfig parse_simulate_config(const std::string& text) {
  SimulateConfig cfg;
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
    if (key == "kind") cfg.kind = value;
    else if (key == "a") cfg.a = detail::parse_num(value, key);
    else if (key == "b") cfg.b = detail::parse_num(value, key);
    else if (key == "c") cfg.c = detail::parse_num(value, key);
    else if (key == "theta") cfg.theta_table = detail::parse_num_list(value, key);
    else if (key == "covariate") cfg.covariate = detail::parse_num_list(value, key);
    else if (key == "covariate_file") cfg.covariate_file = value;
    else if (key == "grid_cutoff") cfg.grid_cutoff = detail::parse_num(value, key);
    else if (key == "grid_intervals") cfg.grid_intervals = static_cast<int>(detail::parse_num(value, key));
    else if (key == "grid_points") cfg.grid_points = detail::parse_num_list(value, key);
    else if (key == "taxa") cfg.taxa = static_cast<int>(detail::parse_num(value, key));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_num(value, key));
    else if (key == "sampling_span") cfg.sampling_span = detail::parse_num(value, key);
    else if (key == "sampling_batches") cfg.sampling_batches = static_cast<int>(detail::parse_num(value, key));
    else if (key == "out_dir") cfg.out_dir = value;
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

/// Writes the four scenario files (tree.nwk, tip_dates.csv, covariates.csv,
/// truth.csv) for a simulated dataset, directly consumable by `run`.
inline void write_scenario_files(const Scenario& scenario, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/tree.nwk", std::ios::trunc);
    out << serialize_newick(scenario.tree) << '\n';
  }
  {
    std::ofstream out(out_dir + "/tip_dates.csv", std::ios::trunc);
    out << "label,date\n";
    for (int i = 0; i < scenario.tree.n_tips(); ++i)
      out << csv::join_row({scenario.tree.tip_labels[static_cast<std::size_t>(i)],
                            csv::format(scenario.tree.nodes[static_cast<std::size_t>(i)].height,
                                        "%.17g")});
  }
  {
    std::ofstream out(out_dir + "/covariates.csv", std::ios::trunc);
    out << "z\n";
    for (Eigen::Index k = 0; k < scenario.covariate.size(); ++k)
      out << csv::join_row({csv::format(scenario.covariate[k], "%.17g")});
  }
  {
    std::ofstream out(out_dir + "/truth.csv", std::ios::trunc);
    out << "interval,z,theta_true\n";
    for (Eigen::Index k = 0; k < scenario.theta_true.size(); ++k)
      out << csv::join_row({std::to_string(k + 1), csv::format(scenario.covariate[k], "%.17g"),
                            csv::format(scenario.theta_true[k], "%.17g")});
  }
}

inline Scenario run_simulate(const SimulateConfig& cfg) {
  Grid grid = cfg.grid_points.empty() ? Grid::equal_spacing(cfg.grid_cutoff, cfg.grid_intervals)
                                      : Grid::from_points(cfg.grid_points);
  std::vector<double> z = cfg.covariate;
  if (z.empty() && !cfg.covariate_file.empty()) {
    const auto rows = csv::parse(read_file(cfg.covariate_file));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == 0 && !detail::is_number(rows[r][0])) continue;  // optional header
      z.push_back(detail::parse_double(rows[r][0], "covariate value"));
    }
  }
  if (static_cast<int>(z.size()) != grid.intervals())
    throw ConfigError("covariate series length " + std::to_string(z.size()) +
                      " must equal the grid interval count " + std::to_string(grid.intervals()));

  ScenarioSpec spec;
  spec.grid = grid;
  spec.covariate = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  spec.taxa = cfg.taxa;
  spec.seed = cfg.seed;
  spec.sampling_span = cfg.sampling_span;
  spec.sampling_batches = cfg.sampling_batches;
  spec.a = cfg.a;
  spec.b = cfg.b;
  spec.c = cfg.c;

  Scenario scenario;
  if (cfg.kind == "linear") {
    spec.kind = ScenarioKind::linear;
    scenario = make_scenario(spec);
  } else if (cfg.kind == "concave") {
    spec.kind = ScenarioKind::concave;
    scenario = make_scenario(spec);
  } else if (cfg.kind == "table") {
    if (static_cast<int>(cfg.theta_table.size()) != grid.intervals())
      throw ConfigError("theta table length must equal the grid interval count");
    scenario.grid = grid;
    scenario.covariate = spec.covariate;
    scenario.theta_true = Eigen::Map<const Eigen::VectorXd>(
        cfg.theta_table.data(), static_cast<Eigen::Index>(cfg.theta_table.size()));
    SimSpec sim;
    sim.ne.breaks = grid.points;
    for (Eigen::Index k = 0; k < scenario.theta_true.size(); ++k)
      sim.ne.levels.push_back(std::exp(scenario.theta_true[k]));
    sim.seed = cfg.seed;
    if (cfg.sampling_span > 0) {
      // sampling layout identical to make_scenario's
      const int batches = std::min(cfg.sampling_batches, cfg.taxa);
      const int base = cfg.taxa / batches;
      int remainder = cfg.taxa % batches;
      for (int i = 0; i < batches; ++i) {
        const double t = batches > 1 ? cfg.sampling_span * i / (batches - 1) : 0.0;
        int count = base + (remainder > 0 ? 1 : 0);
        if (remainder > 0) --remainder;
        if (count > 0) sim.sampling.push_back({t, count});
      }
    } else {
      sim.sampling.push_back({0.0, cfg.taxa});
    }
    scenario.tree = simulate_tree(sim);
  } else {
    throw ConfigError("kind must be linear, concave or table, got '" + cfg.kind + "'");
  }
  write_scenario_files(scenario, cfg.out_dir);
  return scenario;
}

}  // namespace skygp
