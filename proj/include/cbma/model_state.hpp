#pragma once

#include "cbma/types.hpp"

namespace cbma {

/// Shrinkage and residual-precision hyperparameters of the factor model.
struct MgpsHyper {
  double rho = 3.0;      // local shrinkage iota ~ Gamma(rho/2, rho/2)
  double a1 = 2.1;       // delta_1 ~ Gamma(a1, 1)
  double a2 = 3.1;       // delta_l ~ Gamma(a2, 1), l >= 2
  double a_sigma = 1.0;  // sigma_m^-2 ~ Gamma(a_sigma, b_sigma), shape/rate
  double b_sigma = 3.0;
  int k_init = 10;
  double adapt_eps = 0.25;  // a column is dead when all |lambda_jh| < adapt_eps
  double adapt_p0 = -1.0;   // adaptation probability exp(p0 + p1 * t)
  double adapt_p1 = -5e-4;

  /// Throws Error("invalid_hyper") unless all values are positive,
  /// a2 > 1, k_init >= 1 and adapt_p1 < 0.
  void validate() const;
};

/// Latent factor decomposition theta_i = Lambda eta_i + zeta_i with the
/// multiplicative gamma process prior on Lambda.
struct FactorState {
  MatrixXd lambda;  // p x k
  MatrixXd eta;     // n x k
  VectorXd sigma2;  // p residual variances
  MatrixXd iota;    // p x k local precisions
  VectorXd delta;   // k
  VectorXd tau;     // k, tau_h = prod_{l <= h} delta_l

  Index p() const { return lambda.rows(); }
  Index k() const { return lambda.cols(); }
  Index n() const { return eta.rows(); }

  void recompute_tau();
};

/// Covariate regression eta_i = beta^T Z_i + Delta_i with Cauchy-type
/// (normal scale mixture) prior on beta.
struct CovariateState {
  MatrixXd beta;  // r x k
  MatrixXd w;     // k x r, prior precision of beta(j, l) is w(l, j)

  Index r() const { return beta.rows(); }
};

struct ProbitPriors {
  double m_alpha = 0.0;  // Phi^{-1}(0.5)
  double v_alpha = 1.0;
  double mu_gamma = 0.0;  // gamma ~ N(mu_gamma 1, v_gamma I)
  double v_gamma = 1.0;
};

/// Probit link P(y = 1) = Phi(alpha + gamma^T eta) with latent W.
struct ProbitState {
  double alpha = 0.0;
  VectorXd gamma;  // k
  VectorXd W;      // n; entries of unlabeled studies are unused
  ProbitPriors priors;
};

/// Every unknown of the sampler.
struct ModelState {
  MatrixXd theta;  // p x n, column i is theta_i
  FactorState factor;
  CovariateState covariate;
  ProbitState probit;
  double step_size = 0.05;

  Index k() const { return factor.k(); }
};

}  // namespace cbma
