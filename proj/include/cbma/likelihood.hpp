#pragma once

#include "cbma/study.hpp"

namespace cbma {

// Poisson-process log-likelihood of one study's foci,
//   sum_j b(x_ij)^T theta - M(B; theta),
// with the data-only constant dropped. M uses the voxel-center rule of
// intensity_integral, and the gradients below are exact for that rule.

double log_lik(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta);
VectorXd grad_log_lik(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta);

/// log_lik + log N(theta; mean, diag(sigma2)) up to a constant.
/// Throws Error("invalid_variance") for non-positive sigma2 entries.
double log_post_theta(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta,
                      const VectorXd& mean, const VectorXd& sigma2);
VectorXd grad_log_post_theta(const Study& study, const BasisSet& basis, const VolumeGrid& grid,
                             const VectorXd& theta, const VectorXd& mean, const VectorXd& sigma2);

/// Conditional target for one study's coefficients, evaluated in the HMC
/// inner loop. Never throws: overflow yields -inf.
struct ThetaTarget {
  const BasisSet* basis = nullptr;
  const VectorXd* focus_sum = nullptr;
  double voxel_volume = 1.0;
  VectorXd mean;
  VectorXd precision;  // 1 / sigma2
  bool use_likelihood = true;

  ThetaTarget() = default;
  ThetaTarget(const BasisSet& b, const Study& s, const VolumeGrid& grid, VectorXd mean_, const VectorXd& sigma2);

  /// Returns log density; writes its gradient.
  double value_and_grad(const VectorXd& theta, VectorXd& grad) const;
};

}  // namespace cbma
