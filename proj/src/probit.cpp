#include "cbma/probit.hpp"

namespace cbma {

void sample_W(ProbitState& state, const MatrixXd& eta, const Labels& labels, Rng& rng) {
  const Index n = eta.rows();
  if (state.W.size() != n) state.W = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const auto& y = labels[static_cast<std::size_t>(i)];
    if (!y) continue;
    const double mean = state.alpha + state.gamma.dot(eta.row(i).transpose());
    state.W(i) = (*y == 1) ? truncated_normal_positive(mean, rng) : truncated_normal_nonpositive(mean, rng);
  }
}

namespace {

struct RegressionSystem {
  MatrixXd precision;
  VectorXd linear;
};

RegressionSystem alpha_gamma_system(const ProbitState& state, const MatrixXd& eta, const Labels& labels) {
  const Index k = eta.cols();
  const ProbitPriors& pr = state.priors;
  MatrixXd precision = MatrixXd::Zero(k + 1, k + 1);
  precision(0, 0) = 1.0 / pr.v_alpha;
  precision.diagonal().tail(k).setConstant(1.0 / pr.v_gamma);
  VectorXd linear(k + 1);
  linear(0) = pr.m_alpha / pr.v_alpha;
  linear.tail(k).setConstant(pr.mu_gamma / pr.v_gamma);

  Eigen::RowVectorXd x(k + 1);
  for (Index i = 0; i < eta.rows(); ++i) {
    if (!labels[static_cast<std::size_t>(i)]) continue;
    x(0) = 1.0;
    x.tail(k) = eta.row(i);
    precision.noalias() += x.transpose() * x;
    linear.noalias() += x.transpose() * state.W(i);
  }
  return {precision, linear};
}

}  // namespace

AlphaGammaPosterior alpha_gamma_posterior(const ProbitState& state, const MatrixXd& eta, const Labels& labels) {
  RegressionSystem s = alpha_gamma_system(state, eta, labels);
  return {gaussian_precision_mean(s.precision, s.linear), std::move(s.precision)};
}

void sample_alpha_gamma(ProbitState& state, const MatrixXd& eta, const Labels& labels, Rng& rng) {
  const RegressionSystem s = alpha_gamma_system(state, eta, labels);
  const VectorXd draw = sample_gaussian_precision(s.precision, s.linear, rng);
  state.alpha = draw(0);
  state.gamma = draw.tail(eta.cols());
}

}  // namespace cbma
