#include "cbma/classify.hpp"

#include <algorithm>
#include <cmath>

namespace cbma {

namespace {

constexpr std::uint64_t kClassifyStream = 5;
// Whitened coordinates have unit scale near the mode; this leaves a wide
// margin below the leapfrog stability limit of 2.
constexpr double kInnerStep = 0.4;

struct DrawOutcome {
  double prob = 0.0;
  bool discarded = false;
};

// theta_new with eta_new integrated out: Poisson likelihood times
// N(Lambda m, Lambda Lambda^T + Sigma), m the covariate prior mean of eta.
struct MarginalTarget {
  ThetaTarget likelihood;
  VectorXd mean;
  MatrixXd precision;

  double value_and_grad(const VectorXd& theta, VectorXd& grad) const {
    const double value = likelihood.value_and_grad(theta, grad);
    const VectorXd r = theta - mean;
    const VectorXd pr = precision * r;
    grad.noalias() -= pr;
    return value - 0.5 * r.dot(pr);
  }

  MatrixXd neg_hessian(const VectorXd& theta) const {
    const MatrixXd& B = likelihood.basis->voxel_design;
    const VectorXd mu = (B * theta).array().exp();
    MatrixXd h = precision;
    h.noalias() += likelihood.voxel_volume * (B.transpose() * mu.asDiagonal() * B);
    return h;
  }
};

// The target in whitened coordinates u, theta = mode + L^-T u with
// L L^T the negative Hessian at the mode.
struct WhitenedTarget {
  const MarginalTarget* target = nullptr;
  VectorXd mode;
  MatrixXd chol;  // lower L

  VectorXd theta(const VectorXd& u) const {
    return mode + chol.transpose().triangularView<Eigen::Upper>().solve(u);
  }
  double value_and_grad(const VectorXd& u, VectorXd& grad) const {
    VectorXd g;
    const double value = target->value_and_grad(theta(u), g);
    grad = chol.triangularView<Eigen::Lower>().solve(g);
    return value;
  }
};

// Damped Newton ascent; the target is log-concave. Returns false on
// non-finite values.
bool find_mode(const MarginalTarget& target, VectorXd& theta) {
  VectorXd grad;
  double value = target.value_and_grad(theta, grad);
  for (int it = 0; it < 100 && std::isfinite(value); ++it) {
    const VectorXd step = target.neg_hessian(theta).llt().solve(grad);
    if (!step.allFinite()) return false;
    if (grad.dot(step) < 1e-10) return true;
    double t = 1.0;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      VectorXd g;
      const VectorXd next = theta + t * step;
      const double v = target.value_and_grad(next, g);
      if (std::isfinite(v) && v >= value) {
        theta = next;
        value = v;
        grad = g;
        break;
      }
    }
  }
  return std::isfinite(value) && grad.allFinite();
}

DrawOutcome inner_sampler(const Study& study, const Draw& draw, const VolumeGrid& grid, const BasisSet& basis,
                          const ClassifyConfig& config) {
  Rng rng(config.rng_seed, {kClassifyStream, static_cast<std::uint64_t>(draw.iteration), fnv1a64(study.id)});
  FactorState f;
  f.lambda = draw.lambda;
  f.sigma2 = draw.sigma2;
  EtaExtras extras;
  VectorXd eta_mean = VectorXd::Zero(draw.k);
  if (study.covariates && draw.beta.rows() > 0) {
    if (study.covariates->size() != draw.beta.rows()) {
      throw Error("dimension_mismatch", "covariates of study " + study.id + " do not match the fitted model");
    }
    eta_mean = draw.beta.transpose() * *study.covariates;
    extras.prior_mean = eta_mean;
  }

  MarginalTarget target;
  target.likelihood.basis = &basis;
  target.likelihood.focus_sum = &study.focus_sum;
  target.likelihood.voxel_volume = grid.voxel_volume();
  target.likelihood.mean = VectorXd::Zero(basis.p());
  target.likelihood.precision = VectorXd::Zero(basis.p());
  target.mean = draw.lambda * eta_mean;
  MatrixXd cov = draw.lambda * draw.lambda.transpose();
  cov.diagonal() += draw.sigma2;
  target.precision = cov.llt().solve(MatrixXd::Identity(basis.p(), basis.p()));

  DrawOutcome out;
  WhitenedTarget white;
  white.target = &target;
  white.mode = target.mean;
  if (!target.precision.allFinite() || !find_mode(target, white.mode)) {
    out.discarded = true;
    return out;
  }
  const Eigen::LLT<MatrixXd> llt(target.neg_hessian(white.mode));
  if (llt.info() != Eigen::Success) {
    out.discarded = true;
    return out;
  }
  white.chol = llt.matrixL();

  VectorXd u = VectorXd::Zero(basis.p());
  double step_size = kInnerStep;
  double sum = 0.0;
  int kept = 0;
  for (int t = 0; t < config.n_sweeps; ++t) {
    const int steps = draw_leapfrog_steps(config.L_mean, rng);
    HmcResult r = hmc_transition(white, u, step_size, steps, rng);
    if (r.divergent && t < config.burn_in) {
      step_size *= 0.5;
      continue;
    }
    if (r.divergent) {
      out.discarded = true;
      return out;
    }
    u = std::move(r.position);
    if (t >= config.burn_in) {
      // E[Phi(alpha + gamma^T eta) | theta] for Gaussian eta | theta.
      const GaussianMoments m = eta_conditional(f, white.theta(u), extras);
      const double scale = std::sqrt(1.0 + draw.gamma.dot(m.covariance * draw.gamma));
      sum += normal_cdf((draw.alpha + draw.gamma.dot(m.mean)) / scale);
      ++kept;
    }
  }
  out.prob = sum / kept;
  return out;
}

}  // namespace

void ClassifyConfig::validate() const {
  if (n_sweeps < 1 || burn_in < 0 || burn_in >= n_sweeps) {
    throw Error("invalid_config", "classify needs n_sweeps >= 1 and 0 <= burn_in < n_sweeps");
  }
  if (max_draws < 0) throw Error("invalid_config", "max_draws must be >= 0");
  if (!(max_discard_fraction >= 0.0 && max_discard_fraction <= 1.0)) {
    throw Error("invalid_config", "max_discard_fraction must lie in [0, 1]");
  }
  if (n_threads < 1) throw Error("invalid_config", "n_threads must be >= 1");
  if (!(L_mean > 0.0)) throw Error("invalid_config", "L_mean must be positive");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("empty_input", "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<Prediction> classify_new(const std::vector<Study>& studies, const ChainOutput& chain,
                                     const VolumeGrid& grid, const BasisSet& basis, const ClassifyConfig& config) {
  config.validate();
  if (studies.empty()) return {};
  if (chain.draws.empty()) throw Error("empty_chain", "chain has no retained draws");

  std::vector<const Draw*> sorted;
  for (const Draw& d : chain.draws) sorted.push_back(&d);
  std::sort(sorted.begin(), sorted.end(), [](const Draw* a, const Draw* b) { return a->iteration < b->iteration; });
  std::vector<const Draw*> used = sorted;
  if (config.max_draws > 0 && static_cast<std::size_t>(config.max_draws) < sorted.size()) {
    used.clear();
    const double stride = static_cast<double>(sorted.size()) / config.max_draws;
    for (int j = 0; j < config.max_draws; ++j) used.push_back(sorted[static_cast<std::size_t>(j * stride)]);
  }
  for (const Draw* d : used) {
    if (d->lambda.rows() != basis.p()) throw Error("dimension_mismatch", "chain does not match the basis");
  }

  const Index n = static_cast<Index>(studies.size());
  const Index S = static_cast<Index>(used.size());
  MatrixXd probs(S, n);
  std::vector<std::uint8_t> discarded(static_cast<std::size_t>(S * n), 0);
  parallel_for(S * n, config.n_threads, [&](Index begin, Index end) {
    for (Index job = begin; job < end; ++job) {
      const Index i = job / S;
      const Index s = job % S;
      const DrawOutcome r =
          inner_sampler(studies[static_cast<std::size_t>(i)], *used[static_cast<std::size_t>(s)], grid, basis, config);
      probs(s, i) = r.prob;
      discarded[static_cast<std::size_t>(job)] = r.discarded;
    }
  });

  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Prediction p;
    p.study_id = studies[static_cast<std::size_t>(i)].id;
    std::vector<double> kept;
    for (Index s = 0; s < S; ++s) {
      if (discarded[static_cast<std::size_t>(i * S + s)]) {
        ++p.n_discarded;
      } else {
        kept.push_back(probs(s, i));
      }
    }
    if (static_cast<double>(p.n_discarded) > config.max_discard_fraction * static_cast<double>(S) || kept.empty()) {
      throw Error("too_many_discards", "study " + p.study_id + ": " + std::to_string(p.n_discarded) + " of " +
                                           std::to_string(S) + " posterior draws diverged");
    }
    p.n_used = static_cast<long>(kept.size());
    double sum = 0.0;
    for (double v : kept) sum += v;
    p.mean = sum / static_cast<double>(kept.size());
    p.lo95 = quantile(kept, 0.025);
    p.hi95 = quantile(kept, 0.975);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cbma
