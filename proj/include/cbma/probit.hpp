#pragma once

#include "cbma/model_state.hpp"
#include "cbma/random.hpp"

#include <optional>
#include <vector>

namespace cbma {

/// Labels per study; std::nullopt for unlabeled studies.
using Labels = std::vector<std::optional<int>>;

/// Latent W_i ~ N(alpha + gamma^T eta_i, 1) truncated to the side that
/// agrees with y_i. Unlabeled entries are left untouched.
void sample_W(ProbitState& state, const MatrixXd& eta, const Labels& labels, Rng& rng);

/// Joint conjugate draw of (alpha, gamma) from the unit-variance regression
/// of W on [1, eta] over labeled studies.
void sample_alpha_gamma(ProbitState& state, const MatrixXd& eta, const Labels& labels, Rng& rng);

/// Posterior moments used by sample_alpha_gamma, ordered (alpha, gamma).
struct AlphaGammaPosterior {
  VectorXd mean;
  MatrixXd precision;
};
AlphaGammaPosterior alpha_gamma_posterior(const ProbitState& state, const MatrixXd& eta, const Labels& labels);

/// Phi(alpha + gamma^T eta).
template <typename Derived>
double predict_prob(const Eigen::MatrixBase<Derived>& eta, double alpha, const VectorXd& gamma) {
  return normal_cdf(alpha + gamma.dot(eta.derived().template cast<double>()));
}

}  // namespace cbma
