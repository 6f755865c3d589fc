#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skygp/checkpoint.hpp"
#include "skygp/hmc.hpp"
#include "skygp/mass.hpp"
#include "skygp/posterior.hpp"
#include "skygp/rng.hpp"
#include "skygp/slice.hpp"
#include "skygp/trace.hpp"

namespace skygp {

struct ChainSettings {
  int leapfrog_steps = 32;
  double step_size = 0.1;
  double target_accept = 0.8;
  MassMatrixMode mass_mode = MassMatrixMode::hessian_tridiagonal;
  int mass_refresh = 100;  // cadence during warmup; frozen afterwards
  int warmup = 1000;
  int iterations = 2000;
  int thin = 1;
  int checkpoint_every = 500;
  std::uint64_t seed = 1;
  std::string trace_path;       // empty disables trace output
  std::string checkpoint_path;  // empty disables checkpointing
};

/// One MCMC chain: a joint HMC move over the latent block interleaved with
/// univariate slice moves on the log-scale hyperparameters, dual-averaging
/// step-size adaptation during warmup, and trace/checkpoint output.
class Chain {
 public:
  Chain(const Model& model, ChainSettings settings)
      : model_(&model),
        settings_(settings),
        rng_(settings.seed),
        da_(settings.step_size, settings.target_accept),
        mass_(MassMatrix::identity(model.latent_dim())),
        eps_(settings.step_size) {
    if (settings_.warmup < 0 || settings_.iterations <= 0)
      throw std::invalid_argument("chain needs warmup >= 0 and iterations > 0");
    state_ = model_->initial_state();
    scratch_ = state_;
    parts_ = model_->log_posterior(state_);
    if (const std::string bad = parts_.component_error(); !bad.empty())
      throw std::runtime_error("log-posterior is non-finite at the initial state (component: " +
                               bad + ")");
  }

  long total_iterations() const {
    return static_cast<long>(settings_.warmup) + settings_.iterations;
  }
  long iteration() const { return iter_; }
  const ChainState& state() const { return state_; }
  const PosteriorParts& parts() const { return parts_; }
  double step_size() const { return eps_; }
  const MassMatrix& mass() const { return mass_; }
  long divergences() const { return divergences_; }
  double acceptance_rate() const {
    return transitions_ > 0 ? static_cast<double>(accepts_) / transitions_ : 0.0;
  }

  std::vector<std::string> columns() const {
    std::vector<std::string> cols{"iteration", "log_posterior", "log_likelihood", "tau"};
    const auto& names = model_->covariates().names;
    for (const auto& n : names) cols.push_back("sigma2_" + n);
    for (const auto& n : names) cols.push_back("ell_" + n);
    for (int k = 1; k <= model_->grid_size(); ++k) cols.push_back("theta_" + std::to_string(k));
    if (model_->has_gp())
      for (int k = 1; k <= model_->grid_size(); ++k) cols.push_back("g_" + std::to_string(k));
    for (const auto& b : model_->missing_blocks())
      for (int j = 0; j < b.count; ++j)
        cols.push_back("zmiss_" + names[static_cast<std::size_t>(b.covariate)] + "_" +
                       std::to_string(b.start + j + 1));
    cols.push_back("accept");
    cols.push_back("divergent");
    return cols;
  }

  void start_fresh() {
    if (!settings_.trace_path.empty()) trace_.open(settings_.trace_path, columns(), true);
  }

  void restore(const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path, rng_);
    state_ = ck.state;
    scratch_ = state_;
    iter_ = ck.iteration;
    eps_ = ck.eps;
    da_.restore(ck.da_mu, ck.da_log_eps, ck.da_log_eps_bar, ck.da_h_bar, ck.da_count);
    const auto mode = static_cast<MassMatrixMode>(ck.mass_mode);
    if (mode == MassMatrixMode::identity) {
      mass_ = MassMatrix::identity(model_->latent_dim());
    } else if (mode == MassMatrixMode::hessian_diagonal) {
      mass_ = MassMatrix::hessian_diag(ck.mass_diag, model_->latent_dim());
    } else {
      SpdTridiag t;
      t.diag = ck.mass_diag;
      t.off = ck.mass_off;
      mass_ = MassMatrix::hessian_tridiag(std::move(t), model_->latent_dim());
    }
    parts_ = model_->log_posterior(state_);
    const double scale = std::max(1.0, std::abs(ck.cached_logpost));
    if (std::abs(parts_.total() - ck.cached_logpost) > 1e-6 * scale)
      throw std::runtime_error("checkpoint log-posterior does not match recomputation; corrupt state");
    if (!settings_.trace_path.empty()) {
      trace_.open(settings_.trace_path, columns(), false);
      truncate_trace_after(settings_.trace_path, iter_);
    }
  }

  void save(const std::string& path) const {
    Checkpoint ck;
    ck.iteration = iter_;
    ck.eps = eps_;
    ck.da_mu = da_.mu();
    ck.da_log_eps = da_.log_eps();
    ck.da_log_eps_bar = da_.log_eps_bar();
    ck.da_h_bar = da_.h_bar();
    ck.da_count = da_.count();
    ck.state = state_;
    ck.mass_mode = static_cast<int>(mass_.mode());
    if (mass_.mode() == MassMatrixMode::hessian_diagonal) {
      ck.mass_diag = mass_.diagonal();
    } else if (mass_.mode() == MassMatrixMode::hessian_tridiagonal) {
      ck.mass_diag = mass_.tridiagonal().diag;
      ck.mass_off = mass_.tridiagonal().off;
    }
    ck.cached_logpost = parts_.total();
    ck.cached_loglik = parts_.loglik;
    save_checkpoint(path, ck, rng_);
  }

  /// One full iteration: mass refresh (warmup cadence), HMC transition over
  /// the latent block, slice moves on hyperparameters, adaptation, output.
  void step() {
    ++iter_;
    const long warmup = settings_.warmup;

    const bool refresh_due =
        iter_ == 1 || (settings_.mass_refresh > 0 && iter_ % settings_.mass_refresh == 0);
    if (refresh_due)
      mass_ = build_mass_matrix(settings_.mass_mode, state_.theta, model_->data(), model_->tau(state_),
                                model_->latent_dim());

    // jittered trajectory length avoids resonant ringing
    const int base_steps = settings_.leapfrog_steps;
    const int n_steps = std::max(1, static_cast<int>(std::lround(base_steps * rng_.uniform(0.8, 1.2))));

    scratch_ = state_;
    const auto logpost_fn = [&](const Eigen::VectorXd& q) {
      model_->unpack_latent(q, scratch_);
      return model_->log_posterior(scratch_).total();
    };
    const auto grad_fn = [&](const Eigen::VectorXd& q) {
      model_->unpack_latent(q, scratch_);
      return model_->grad_latent(scratch_);
    };

    Eigen::VectorXd q = model_->pack_latent(state_);
    const HmcResult res =
        hmc_transition(q, parts_.total(), logpost_fn, grad_fn, mass_, n_steps, eps_, rng_);
    if (res.accepted) model_->unpack_latent(q, state_);
    last_accept_ = res.accepted;
    last_divergent_ = res.divergent;
    ++transitions_;
    if (res.accepted) ++accepts_;
    if (res.divergent) ++divergences_;

    move_hyperparameters();

    if (iter_ <= warmup) {
      da_.observe(res.divergent ? 0.0 : res.accept_prob);
      eps_ = iter_ == warmup ? da_.frozen() : da_.current();
    }

    parts_ = model_->log_posterior(state_);

    if (iter_ > warmup && (iter_ - warmup) % settings_.thin == 0 && !settings_.trace_path.empty())
      trace_.append_row(row());
    if (settings_.checkpoint_every > 0 && !settings_.checkpoint_path.empty() &&
        iter_ % settings_.checkpoint_every == 0)
      save(settings_.checkpoint_path);

    if (iter_ % 1000 == 0) {
      const double fresh = model_->log_posterior(state_).total();
      const double scale = std::max(1.0, std::abs(fresh));
      if (std::abs(fresh - parts_.total()) > 1e-10 * scale)
        throw std::runtime_error("cached log-posterior diverged from recomputation");
    }
  }

  /// Runs to completion, or up to `stop_after` iterations (saving a
  /// checkpoint there so the run can be resumed).
  void run(std::optional<long> stop_after = std::nullopt) {
    const long goal = stop_after ? std::min(*stop_after, total_iterations()) : total_iterations();
    while (iter_ < goal) step();
    if (stop_after && !settings_.checkpoint_path.empty()) save(settings_.checkpoint_path);
  }

 private:
  void move_hyperparameters() {
    SliceOptions opts;
    {
      const double x0 = state_.log_tau;
      const auto logf = [&](double y) { return model_->conditional_log_tau(state_, y); };
      const SliceResult r = slice_sample(x0, logf(x0), logf, rng_, opts);
      if (!r.moved) warn_slice_stuck("log_tau");
      state_.log_tau = r.value;
    }
    for (int p = 0; p < model_->n_covariates(); ++p) {
      {
        const double x0 = state_.log_sigma2[p];
        const auto logf = [&](double y) {
          return model_->conditional_kernel(state_, p, y, state_.lambda_ell[p]);
        };
        const SliceResult r = slice_sample(x0, logf(x0), logf, rng_, opts);
        if (!r.moved) warn_slice_stuck("log_sigma2");
        state_.log_sigma2[p] = r.value;
      }
      {
        const double x0 = state_.lambda_ell[p];
        const auto logf = [&](double y) {
          return model_->conditional_kernel(state_, p, state_.log_sigma2[p], y);
        };
        const SliceResult r = slice_sample(x0, logf(x0), logf, rng_, opts);
        if (!r.moved) warn_slice_stuck("lambda_ell");
        state_.lambda_ell[p] = r.value;
      }
    }
  }

  void warn_slice_stuck(const char* what) {
    ++slice_stuck_;
    std::fprintf(stderr, "skygp: slice move on %s exhausted its shrinkage budget at iteration %ld; keeping the current value\n",
                 what, iter_);
  }

  std::vector<double> row() const {
    std::vector<double> v;
    v.push_back(static_cast<double>(iter_));
    v.push_back(parts_.total());
    v.push_back(parts_.loglik);
    v.push_back(model_->tau(state_));
    const KernelParams kp = model_->kernel_params(state_);
    for (int p = 0; p < model_->n_covariates(); ++p) v.push_back(kp.sigma2[p]);
    for (int p = 0; p < model_->n_covariates(); ++p) v.push_back(kp.ell[p]);
    for (int k = 0; k < model_->grid_size(); ++k) v.push_back(state_.theta[k]);
    if (model_->has_gp()) {
      const Eigen::VectorXd g = model_->g_of(state_);
      for (int k = 0; k < model_->grid_size(); ++k) v.push_back(g[k]);
    }
    for (int j = 0; j < model_->missing_count(); ++j) v.push_back(state_.zmiss[j]);
    v.push_back(last_accept_ ? 1.0 : 0.0);
    v.push_back(last_divergent_ ? 1.0 : 0.0);
    return v;
  }

  const Model* model_;
  ChainSettings settings_;
  Rng rng_;
  DualAveraging da_;
  MassMatrix mass_;
  ChainState state_, scratch_;
  PosteriorParts parts_;
  TraceWriter trace_;
  double eps_;
  long iter_ = 0;
  long transitions_ = 0, accepts_ = 0, divergences_ = 0, slice_stuck_ = 0;
  bool last_accept_ = false, last_divergent_ = false;
};

}  // namespace skygp
