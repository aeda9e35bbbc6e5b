#pragma once

#include "cbma/sampler.hpp"

#include <string>
#include <vector>

namespace cbma {

struct ClassifyConfig {
  int n_sweeps = 50;
  int burn_in = 25;
  // Use at most this many retained draws, evenly spaced; 0 uses all.
  int max_draws = 0;
  double max_discard_fraction = 0.2;
  std::uint64_t rng_seed = 1;
  int n_threads = 1;
  double L_mean = 25.0;

  void validate() const;
};

struct Prediction {
  std::string study_id;
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  long n_discarded = 0;
  long n_used = 0;
};

/// Posterior predictive P(type 1) for foci-only studies. For every selected
/// draw of the shared parameters an inner HMC chain samples theta_new with
/// eta_new integrated out (prior N(Lambda m, Lambda Lambda^T + Sigma), no
/// probit term); the draw contributes the mean over post-burn-in sweeps of
/// E[Phi(alpha + gamma^T eta_new) | theta_new], which is closed form because
/// eta_new | theta_new is Gaussian. The inner chain starts at the mode and
/// runs in coordinates whitened by the Hessian there, with a fixed step that
/// is halved on each divergence during inner burn-in. A draw is discarded
/// when its target is not finite at the start or its HMC diverges after
/// burn-in. Results depend only on the
/// study's foci, id and the draw set, not on study or draw order.
///
/// Throws Error("too_many_discards") when more than max_discard_fraction of a
/// study's draws are discarded.
std::vector<Prediction> classify_new(const std::vector<Study>& studies, const ChainOutput& chain,
                                     const VolumeGrid& grid, const BasisSet& basis, const ClassifyConfig& config);

/// Empirical quantile with linear interpolation (type 7); q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace cbma
