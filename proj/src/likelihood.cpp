#include "cbma/likelihood.hpp"

#include <cmath>
#include <limits>

namespace cbma {

void attach_basis(Study& study, const BasisSet& basis) {
  study.focus_design = design_matrix(basis, study.foci);
  study.focus_sum = study.focus_design.colwise().sum().transpose();
}

Study make_study(std::string id, PointsXd foci, const BasisSet& basis, std::optional<int> label,
                 std::optional<VectorXd> covariates) {
  Study s;
  s.id = std::move(id);
  s.foci = std::move(foci);
  s.label = label;
  s.covariates = std::move(covariates);
  attach_basis(s, basis);
  return s;
}

namespace {

void check_dims(const Study& study, const BasisSet& basis, const VectorXd& theta) {
  if (theta.size() != basis.p() || study.focus_sum.size() != basis.p()) {
    throw Error("dimension_mismatch", "theta, basis and study design disagree on p");
  }
}

void check_variance(const VectorXd& mean, const VectorXd& sigma2, Index p) {
  if (mean.size() != p || sigma2.size() != p) throw Error("dimension_mismatch", "prior mean/variance length != p");
  if (!((sigma2.array() > 0.0).all())) throw Error("invalid_variance", "residual variances must be positive");
}

}  // namespace

double log_lik(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta) {
  check_dims(study, basis, theta);
  return study.focus_sum.dot(theta) - intensity_integral(basis, theta, grid);
}

VectorXd grad_log_lik(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta) {
  check_dims(study, basis, theta);
  const VectorXd log_mu = basis.voxel_design * theta;
  if (!(log_mu.maxCoeff() <= kMaxLogIntensity)) {
    throw Error("intensity_overflow", "intensity overflow: max log-intensity " + std::to_string(log_mu.maxCoeff()));
  }
  const VectorXd mu = log_mu.array().exp();
  return study.focus_sum - grid.voxel_volume() * (basis.voxel_design.transpose() * mu);
}

double log_post_theta(const Study& study, const BasisSet& basis, const VolumeGrid& grid, const VectorXd& theta,
                      const VectorXd& mean, const VectorXd& sigma2) {
  check_variance(mean, sigma2, basis.p());
  const auto r = (theta - mean).array();
  return log_lik(study, basis, grid, theta) - 0.5 * (r.square() / sigma2.array()).sum();
}

VectorXd grad_log_post_theta(const Study& study, const BasisSet& basis, const VolumeGrid& grid,
                             const VectorXd& theta, const VectorXd& mean, const VectorXd& sigma2) {
  check_variance(mean, sigma2, basis.p());
  return grad_log_lik(study, basis, grid, theta) - ((theta - mean).array() / sigma2.array()).matrix();
}

ThetaTarget::ThetaTarget(const BasisSet& b, const Study& s, const VolumeGrid& grid, VectorXd mean_,
                         const VectorXd& sigma2)
    : basis(&b), focus_sum(&s.focus_sum), voxel_volume(grid.voxel_volume()), mean(std::move(mean_)) {
  check_variance(mean, sigma2, b.p());
  precision = sigma2.cwiseInverse();
}

double ThetaTarget::value_and_grad(const VectorXd& theta, VectorXd& grad) const {
  const VectorXd r = theta - mean;
  grad = -(precision.array() * r.array()).matrix();
  double value = -0.5 * (precision.array() * r.array().square()).sum();
  if (!use_likelihood) return value;

  const VectorXd log_mu = basis->voxel_design * theta;
  if (!(log_mu.maxCoeff() <= kMaxLogIntensity)) {
    grad.setConstant(std::numeric_limits<double>::quiet_NaN());
    return -std::numeric_limits<double>::infinity();
  }
  const VectorXd mu = log_mu.array().exp();
  value += focus_sum->dot(theta) - voxel_volume * mu.sum();
  grad.noalias() += *focus_sum;
  grad.noalias() -= voxel_volume * (basis->voxel_design.transpose() * mu);
  return value;
}

}  // namespace cbma
