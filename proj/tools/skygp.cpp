// skygp: coalescent effective-population-size inference on fixed dated trees
// with a GMRF + Gaussian-process covariate prior and preconditioned HMC.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "skygp/run.hpp"

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const skygp::FileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

skygp::RunConfig load_run_config(const std::string& path, std::string& text_out,
                                 const std::optional<std::uint64_t>& seed,
                                 const std::string& out_dir) {
  text_out = skygp::read_file(path);
  skygp::RunConfig cfg = skygp::parse_config(text_out);
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skygp: nonparametric coalescent inference with covariate-driven GP priors"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_from, checkpoint, spec_path;
  std::optional<std::uint64_t> seed;
  double burn_in = -1.0;
  double threshold = 0.05;

  auto* run = app.add_subcommand("run", "run inference from a config file");
  run->add_option("--config", config_path, "run configuration file")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out-dir", out_dir, "override the config output directory");
  run->add_option("--resume", resume_from,
                  "resume from this checkpoint (single chain) instead of starting fresh");

  auto* resume = app.add_subcommand("resume", "continue chains from their checkpoints");
  resume->add_option("--config", config_path, "run configuration file")->required();
  resume->add_option("--out-dir", out_dir, "override the config output directory");
  resume->add_option("--checkpoint", checkpoint,
                     "explicit checkpoint path (single chain); defaults to the ones in out_dir");

  auto* summarize = app.add_subcommand("summarize", "summarize traces into CSV files");
  summarize->add_option("--config", config_path, "run configuration file")->required();
  summarize->add_option("--out-dir", out_dir, "override the config output directory");
  summarize->add_option("--burn-in", burn_in, "burn-in fraction (default: config value)");
  summarize->add_option("--threshold", threshold, "flattening-point derivative threshold");

  auto* simulate = app.add_subcommand("simulate", "simulate a coalescent scenario");
  simulate->add_option("--spec", spec_path, "simulation spec file")->required();
  simulate->add_option("--seed", seed, "override the spec seed");
  simulate->add_option("--out-dir", out_dir, "override the spec output directory");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return guarded([&] {
      std::string text;
      const skygp::RunConfig cfg = load_run_config(config_path, text, seed, out_dir);
      skygp::run_inference(cfg, text, !resume_from.empty(), std::nullopt, resume_from);
      std::cout << "run complete; traces in " << cfg.out_dir << '\n';
      return 0;
    });
  }
  if (resume->parsed()) {
    return guarded([&] {
      std::string text;
      const skygp::RunConfig cfg = load_run_config(config_path, text, std::nullopt, out_dir);
      skygp::run_inference(cfg, text, true, std::nullopt, checkpoint);
      std::cout << "resume complete; traces in " << cfg.out_dir << '\n';
      return 0;
    });
  }
  if (summarize->parsed()) {
    return guarded([&] {
      std::string text;
      const skygp::RunConfig cfg = load_run_config(config_path, text, std::nullopt, out_dir);
      const double frac = burn_in >= 0 ? burn_in : cfg.burn_in;
      const skygp::PosteriorSummary summary = skygp::run_summarize(cfg, frac, threshold);
      std::cout << "summary written to " << cfg.out_dir << " (" << summary.retained_rows
                << " retained draws)\n";
      return 0;
    });
  }
  if (simulate->parsed()) {
    return guarded([&] {
      skygp::SimulateConfig cfg = skygp::parse_simulate_config(skygp::read_file(spec_path));
      if (seed) cfg.seed = *seed;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const skygp::Scenario scenario = skygp::run_simulate(cfg);
      std::cout << "scenario written to " << cfg.out_dir << " (" << scenario.tree.n_tips()
                << " tips, root height " << scenario.tree.root_height() << ")\n";
      return 0;
    });
  }
  return 1;
}
