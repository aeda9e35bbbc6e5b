#pragma once

#include "cbma/factor_model.hpp"
#include "cbma/hmc.hpp"
#include "cbma/likelihood.hpp"
#include "cbma/probit.hpp"

#include <string>
#include <vector>

namespace cbma {

struct HmcConfig {
  double L_mean = 25.0;  // leapfrog steps ~ Poisson(L_mean)
  double eps_init = 0.05;
  double target_accept = 0.65;
  int adapt_every = 10;
  int adapt_window = 100;
  double kappa = 0.1;
};

struct SamplerConfig {
  long n_iter = 10000;
  long burn_in = 5000;
  long thin = 20;
  HmcConfig hmc;
  std::uint64_t rng_seed = 1;
  MgpsHyper factor;
  ProbitPriors probit;
  bool use_probit = true;
  bool use_covariates = false;
  int n_threads = 1;
  // Test hook: drop the point-process likelihood so theta only sees its prior.
  bool use_likelihood = true;
  bool record_theta = true;
  long checkpoint_every = 0;  // 0 disables checkpoints
  std::string checkpoint_path;

  /// Throws Error("invalid_config").
  void validate() const;
  long retained_draws() const { return (n_iter - burn_in) / thin; }
};

/// Read-only inputs of a fit.
struct FitData {
  const VolumeGrid* grid = nullptr;
  const BasisSet* basis = nullptr;
  const std::vector<Study>* studies = nullptr;

  FitData(const VolumeGrid& g, const BasisSet& b, const std::vector<Study>& s) : grid(&g), basis(&b), studies(&s) {}
  Index n() const { return static_cast<Index>(studies->size()); }
  Labels labels() const;
  /// n x r covariate matrix (r = 0 when studies carry none).
  MatrixXd covariates() const;
};

/// One retained posterior draw.
struct Draw {
  long iteration = 0;
  MatrixXd theta;   // p x n (empty when theta is not recorded)
  MatrixXd lambda;  // p x k
  VectorXd sigma2;
  MatrixXd eta;     // n x k
  double alpha = 0.0;
  VectorXd gamma;
  MatrixXd beta;    // r x k
  Index k = 0;
};

struct ChainOutput {
  std::vector<Draw> draws;
  std::vector<double> accept_rate;     // per iteration, fraction of studies accepted
  std::vector<int> k_trace;            // per iteration
  std::vector<double> step_size_trace;  // per iteration, value used by the sweep
  std::vector<long> divergences;       // per iteration
  std::vector<std::uint64_t> kernel_hash;  // per iteration, hash of the transition-kernel tuning
  SamplerConfig config;
  std::vector<std::string> study_ids;
  Labels labels;
  double final_step_size = 0.0;
};

/// Step-size adaptation bookkeeping carried across sweeps.
struct AdaptationTrace {
  std::vector<double> accept_history;  // per iteration
};

/// Per-sweep outcome.
struct SweepStats {
  double accept_rate = 0.0;
  long divergences = 0;
  RankAdaptation rank;
};

/// Initial state: prior draw of the shared factor parameters with
/// k = hyper.k_init, sigma2 = b_sigma / a_sigma, theta_i constant term at
/// log(max(n_i, 0.5) / |B|), everything else at zero or its prior mean.
ModelState initial_state(const FitData& data, const SamplerConfig& config);

struct ThetaUpdate {
  VectorXd theta;
  bool accepted = false;
  bool divergent = false;
};

/// HMC update of study i's coefficients given the rest of the state.
ThetaUpdate hmc_update_theta(Index i, const ModelState& state, const FitData& data, const SamplerConfig& config,
                             Rng& rng);

/// Step size after the multiplicative rule, using the mean acceptance over
/// the trailing adapt_window iterations.
double adapt_stepsize(const AdaptationTrace& trace, double eps, const HmcConfig& hmc);

/// One full sweep at `iteration` (1-based). The state is replaced only when
/// the whole sweep succeeds.
SweepStats gibbs_sweep(const FitData& data, ModelState& state, const SamplerConfig& config, long iteration,
                       AdaptationTrace& trace);

/// Drives sweeps, burn-in, thinning, traces and checkpoints.
class ChainRunner {
 public:
  ChainRunner(const FitData& data, SamplerConfig config);
  /// Restores a run saved by save_checkpoint; the data must match.
  static ChainRunner from_checkpoint(const FitData& data, const std::string& path);

  void step();
  /// Runs until `iteration() == last` (clamped to n_iter).
  void run_until(long last);
  void run() { run_until(config_.n_iter); }

  void save_checkpoint(const std::string& path) const;

  long iteration() const { return iteration_; }
  const ModelState& state() const { return state_; }
  const ChainOutput& output() const { return output_; }
  ChainOutput take_output() { return std::move(output_); }
  const SamplerConfig& config() const { return config_; }

 private:
  FitData data_;
  SamplerConfig config_;
  ModelState state_;
  AdaptationTrace trace_;
  ChainOutput output_;
  long iteration_ = 0;
};

ChainOutput run_chain(const FitData& data, const SamplerConfig& config);

/// Hash of everything that parameterizes the transition kernel at a
/// given iteration (step size, adaptation activity, L_mean).
std::uint64_t kernel_hash(double step_size, bool adapting, const HmcConfig& hmc);

/// Runs fn(begin, end) over [0, n) split into contiguous chunks on up to
/// n_threads threads. Results must not depend on the split.
template <typename Fn>
void parallel_for(Index n, int n_threads, Fn&& fn);

}  // namespace cbma

#include "cbma/detail/parallel.hpp"
