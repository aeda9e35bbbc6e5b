#pragma once

#include "cbma/basis.hpp"
#include "cbma/model_state.hpp"
#include "cbma/random.hpp"

#include <optional>

namespace cbma {

/// Optional extra terms in the eta_i full conditional.
struct EtaExtras {
  struct Probit {
    double alpha = 0.0;
    VectorXd gamma;
    double W = 0.0;
  };
  std::optional<Probit> probit;       // labeled study under the probit link
  std::optional<VectorXd> prior_mean;  // beta^T Z_i; zero when absent
};

struct GaussianMoments {
  VectorXd mean;
  MatrixXd covariance;
};

/// Full conditional of eta_i: precision I + L^T S^-1 L [+ g g^T], linear
/// term L^T S^-1 theta_i [+ g (W_i - alpha)] [+ beta^T Z_i].
GaussianMoments eta_conditional(const FactorState& f, const VectorXd& theta_i, const EtaExtras& extras = {});
VectorXd sample_eta(const FactorState& f, const VectorXd& theta_i, const EtaExtras& extras, Rng& rng);

/// Row-wise conjugate update of Lambda given eta and theta (p x n).
void sample_lambda_rows(FactorState& f, const MatrixXd& theta, Rng& rng);

void sample_local_shrinkage(FactorState& f, const MgpsHyper& hyper, Rng& rng);

/// Sequential delta_1..delta_k update; tau is recomputed after each draw.
void sample_global_shrinkage(FactorState& f, const MgpsHyper& hyper, Rng& rng);

/// Conjugate residual precision update given theta (p x n).
void sample_sigma(FactorState& f, const MatrixXd& theta, const MgpsHyper& hyper, Rng& rng);

/// beta columns given eta (n x k) and covariates Z (n x r), then w.
/// No-op when r == 0.
void sample_beta(CovariateState& c, const MatrixXd& eta, const MatrixXd& covariates, Rng& rng);

enum class RankChange { none, added, removed };

struct RankAdaptation {
  RankChange change = RankChange::none;
  Index columns_removed = 0;
};

/// Probability of attempting an adaptation at iteration t.
double adaptation_probability(const MgpsHyper& hyper, long iteration);

/// Adds one column when no column of Lambda is negligible, otherwise drops
/// every negligible column (k stays >= 1). Only runs when uniform_draw is
/// below adaptation_probability(iteration). New parameters come from their
/// priors. Aligned parameters (eta, iota, delta, gamma, beta, w) follow.
RankAdaptation adapt_rank(ModelState& state, const MgpsHyper& hyper, long iteration, double uniform_draw,
                          Rng& rng);

/// Initial shared state drawn from the prior with k = hyper.k_init.
FactorState sample_factor_prior(Index p, Index n, Index k, const MgpsHyper& hyper, Rng& rng);

/// Dictionary maps phi_l over masked voxels, V x k (voxel_design * Lambda).
MatrixXd dictionary(const FactorState& f, const BasisSet& basis);

/// Residual map r_i = voxel_design * (theta_i - Lambda eta_i).
VectorXd residual_map(const FactorState& f, const BasisSet& basis, const VectorXd& theta_i, Index i);

}  // namespace cbma
