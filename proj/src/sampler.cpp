#include "cbma/sampler.hpp"

#include <bit>
#include <cmath>
#include <numeric>

namespace cbma {

namespace {

// RNG stream purposes; every draw in a sweep comes from a stream keyed by
// (seed, iteration, study, purpose), so a run can resume from any
// checkpoint and threads never share a stream.
enum StreamTag : std::uint64_t { kInitStream = 1, kThetaStream = 2, kEtaStream = 3, kSharedStream = 4 };

}  // namespace

void SamplerConfig::validate() const {
  if (n_iter < 1) throw Error("invalid_config", "n_iter must be >= 1");
  if (burn_in < 0 || burn_in >= n_iter) throw Error("invalid_config", "burn_in must satisfy 0 <= burn_in < n_iter");
  if (thin < 1) throw Error("invalid_config", "thin must be >= 1");
  if (!(hmc.target_accept > 0.0 && hmc.target_accept < 1.0)) {
    throw Error("invalid_config", "target_accept must lie in (0, 1)");
  }
  if (!(hmc.eps_init > 0.0) || !(hmc.L_mean > 0.0)) throw Error("invalid_config", "eps_init and L_mean must be positive");
  if (hmc.adapt_every < 1 || hmc.adapt_window < 1) throw Error("invalid_config", "adaptation intervals must be >= 1");
  if (!(probit.v_alpha > 0.0) || !(probit.v_gamma > 0.0)) throw Error("invalid_config", "probit prior variances must be positive");
  if (n_threads < 1) throw Error("invalid_config", "n_threads must be >= 1");
  if (checkpoint_every > 0 && checkpoint_path.empty()) {
    throw Error("invalid_config", "checkpoint_every requires checkpoint_path");
  }
  factor.validate();
}

Labels FitData::labels() const {
  Labels out;
  out.reserve(studies->size());
  for (const Study& s : *studies) out.push_back(s.label);
  return out;
}

MatrixXd FitData::covariates() const {
  if (studies->empty() || !studies->front().covariates) return MatrixXd(n(), 0);
  const Index r = studies->front().covariates->size();
  MatrixXd z(n(), r);
  for (Index i = 0; i < n(); ++i) {
    const auto& c = (*studies)[static_cast<std::size_t>(i)].covariates;
    if (!c || c->size() != r) throw Error("invalid_data", "covariates must be present with equal length for every study");
    z.row(i) = c->transpose();
  }
  return z;
}

ModelState initial_state(const FitData& data, const SamplerConfig& config) {
  config.validate();
  const Index p = data.basis->p();
  const Index n = data.n();
  const Index k = config.factor.k_init;
  Rng rng(config.rng_seed, {kInitStream});

  ModelState s;
  s.factor = sample_factor_prior(p, n, k, config.factor, rng);
  s.factor.sigma2.setConstant(config.factor.b_sigma / config.factor.a_sigma);

  s.theta = MatrixXd::Zero(p, n);
  const double measure = data.grid->domain_measure();
  for (Index i = 0; i < n; ++i) {
    const double count = static_cast<double>((*data.studies)[static_cast<std::size_t>(i)].n_foci());
    s.theta(0, i) = std::log(std::max(count, 0.5) / measure);
  }

  const Index r = config.use_covariates ? data.covariates().cols() : 0;
  s.covariate.beta = MatrixXd::Zero(r, k);
  s.covariate.w = MatrixXd::Ones(k, r);

  s.probit.priors = config.probit;
  s.probit.alpha = config.probit.m_alpha;
  s.probit.gamma = VectorXd::Zero(k);
  s.probit.W = VectorXd::Zero(n);
  s.step_size = config.hmc.eps_init;
  return s;
}

ThetaUpdate hmc_update_theta(Index i, const ModelState& state, const FitData& data, const SamplerConfig& config,
                             Rng& rng) {
  const Study& study = (*data.studies)[static_cast<std::size_t>(i)];
  const FactorState& f = state.factor;
  ThetaTarget target(*data.basis, study, *data.grid, f.lambda * f.eta.row(i).transpose(), f.sigma2);
  target.use_likelihood = config.use_likelihood;
  const int steps = draw_leapfrog_steps(config.hmc.L_mean, rng);
  HmcResult r = hmc_transition(target, state.theta.col(i), state.step_size, steps, rng);
  return {std::move(r.position), r.accepted, r.divergent};
}

double adapt_stepsize(const AdaptationTrace& trace, double eps, const HmcConfig& hmc) {
  const auto& h = trace.accept_history;
  if (h.empty()) return eps;
  const std::size_t window = std::min<std::size_t>(h.size(), static_cast<std::size_t>(hmc.adapt_window));
  const double mean = std::accumulate(h.end() - static_cast<std::ptrdiff_t>(window), h.end(), 0.0) /
                      static_cast<double>(window);
  return adapted_step_size(eps, mean, hmc.target_accept, hmc.kappa);
}

SweepStats gibbs_sweep(const FitData& data, ModelState& state, const SamplerConfig& config, long iteration,
                       AdaptationTrace& trace) {
  const Index n = data.n();
  const std::uint64_t seed = config.rng_seed;
  const std::uint64_t it = static_cast<std::uint64_t>(iteration);
  const Labels labels = data.labels();
  const bool probit = config.use_probit;
  const MatrixXd z = config.use_covariates ? data.covariates() : MatrixXd(n, 0);
  const bool in_burn_in = iteration <= config.burn_in;

  ModelState next = state;
  SweepStats stats;

  // (1) theta_i by HMC.
  std::vector<char> accepted(static_cast<std::size_t>(n), 0);
  std::vector<char> divergent(static_cast<std::size_t>(n), 0);
  parallel_for(n, config.n_threads, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      Rng rng(seed, {it, static_cast<std::uint64_t>(i), kThetaStream});
      ThetaUpdate u = hmc_update_theta(i, state, data, config, rng);
      next.theta.col(i) = u.theta;
      accepted[static_cast<std::size_t>(i)] = u.accepted;
      divergent[static_cast<std::size_t>(i)] = u.divergent;
    }
  });

  // (2) eta_i, Gaussian full conditional.
  parallel_for(n, config.n_threads, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      Rng rng(seed, {it, static_cast<std::uint64_t>(i), kEtaStream});
      EtaExtras extras;
      const auto& y = labels[static_cast<std::size_t>(i)];
      if (probit && y) extras.probit = EtaExtras::Probit{state.probit.alpha, state.probit.gamma, state.probit.W(i)};
      if (z.cols() > 0) extras.prior_mean = VectorXd(state.covariate.beta.transpose() * z.row(i).transpose());
      next.factor.eta.row(i) = sample_eta(next.factor, next.theta.col(i), extras, rng).transpose();
    }
  });

  Rng shared(seed, {it, kSharedStream});
  // (3)-(6) loadings, shrinkage, residual variances.
  sample_lambda_rows(next.factor, next.theta, shared);
  sample_local_shrinkage(next.factor, config.factor, shared);
  sample_global_shrinkage(next.factor, config.factor, shared);
  sample_sigma(next.factor, next.theta, config.factor, shared);
  // (7) covariate regression.
  if (z.cols() > 0) sample_beta(next.covariate, next.factor.eta, z, shared);
  // (8)-(9) probit link.
  if (probit) {
    sample_W(next.probit, next.factor.eta, labels, shared);
    sample_alpha_gamma(next.probit, next.factor.eta, labels, shared);
  }
  // (10) rank adaptation, burn-in only.
  if (in_burn_in) {
    const double u = shared.uniform();
    stats.rank = adapt_rank(next, config.factor, iteration, u, shared);
  }

  long n_acc = 0;
  for (Index i = 0; i < n; ++i) {
    n_acc += accepted[static_cast<std::size_t>(i)];
    stats.divergences += divergent[static_cast<std::size_t>(i)];
  }
  stats.accept_rate = n > 0 ? static_cast<double>(n_acc) / static_cast<double>(n) : 0.0;

  // (11) step size, burn-in only.
  trace.accept_history.push_back(stats.accept_rate);
  if (in_burn_in && n > 0 && iteration % config.hmc.adapt_every == 0) {
    next.step_size = adapt_stepsize(trace, next.step_size, config.hmc);
  }

  state = std::move(next);
  return stats;
}

std::uint64_t kernel_hash(double step_size, bool adapting, const HmcConfig& hmc) {
  const std::uint64_t words[3] = {std::bit_cast<std::uint64_t>(step_size), adapting ? 1ULL : 0ULL,
                                  std::bit_cast<std::uint64_t>(hmc.L_mean)};
  return fnv1a64(words, sizeof(words));
}

ChainRunner::ChainRunner(const FitData& data, SamplerConfig config) : data_(data), config_(std::move(config)) {
  state_ = initial_state(data_, config_);
  output_.config = config_;
  for (const Study& s : *data_.studies) output_.study_ids.push_back(s.id);
  output_.labels = data_.labels();
  output_.final_step_size = state_.step_size;
}

void ChainRunner::step() {
  const long t = iteration_ + 1;
  if (t > config_.n_iter) return;
  const double eps_used = state_.step_size;
  const bool adapting = t <= config_.burn_in;

  const SweepStats stats = gibbs_sweep(data_, state_, config_, t, trace_);

  output_.accept_rate.push_back(stats.accept_rate);
  output_.k_trace.push_back(static_cast<int>(state_.k()));
  output_.step_size_trace.push_back(eps_used);
  output_.divergences.push_back(stats.divergences);
  output_.kernel_hash.push_back(kernel_hash(eps_used, adapting, config_.hmc));

  if (t > config_.burn_in && (t - config_.burn_in) % config_.thin == 0) {
    Draw d;
    d.iteration = t;
    if (config_.record_theta) d.theta = state_.theta;
    d.lambda = state_.factor.lambda;
    d.sigma2 = state_.factor.sigma2;
    d.eta = state_.factor.eta;
    d.alpha = state_.probit.alpha;
    d.gamma = state_.probit.gamma;
    d.beta = state_.covariate.beta;
    d.k = state_.k();
    output_.draws.push_back(std::move(d));
  }
  output_.final_step_size = state_.step_size;
  iteration_ = t;

  if (config_.checkpoint_every > 0 && t % config_.checkpoint_every == 0) save_checkpoint(config_.checkpoint_path);
}

void ChainRunner::run_until(long last) {
  last = std::min(last, config_.n_iter);
  while (iteration_ < last) step();
}

ChainOutput run_chain(const FitData& data, const SamplerConfig& config) {
  ChainRunner runner(data, config);
  runner.run();
  return runner.take_output();
}

}  // namespace cbma
