#include "cbma/factor_model.hpp"

#include <cmath>
#include <vector>

namespace cbma {

void MgpsHyper::validate() const {
  const bool positive = rho > 0 && a1 > 0 && a2 > 0 && a_sigma > 0 && b_sigma > 0 && adapt_eps > 0;
  if (!positive) throw Error("invalid_hyper", "shrinkage hyperparameters must be positive");
  if (!(a2 > 1.0)) throw Error("invalid_hyper", "a2 must exceed 1");
  if (k_init < 1) throw Error("invalid_hyper", "k_init must be >= 1");
  if (!(adapt_p1 < 0.0)) throw Error("invalid_hyper", "adapt_p1 must be negative (diminishing adaptation)");
}

void FactorState::recompute_tau() {
  tau.resize(delta.size());
  double acc = 1.0;
  for (Index h = 0; h < delta.size(); ++h) {
    acc *= delta(h);
    tau(h) = acc;
  }
}

namespace {

struct EtaSystem {
  MatrixXd precision;
  VectorXd linear;
};

EtaSystem eta_system(const FactorState& f, const VectorXd& theta_i, const EtaExtras& extras) {
  const Index k = f.k();
  const MatrixXd lt_sinv = f.lambda.transpose() * f.sigma2.cwiseInverse().asDiagonal();  // k x p
  EtaSystem s{MatrixXd::Identity(k, k) + lt_sinv * f.lambda, lt_sinv * theta_i};
  if (extras.probit) {
    s.precision.noalias() += extras.probit->gamma * extras.probit->gamma.transpose();
    s.linear.noalias() += extras.probit->gamma * (extras.probit->W - extras.probit->alpha);
  }
  if (extras.prior_mean) s.linear += *extras.prior_mean;
  return s;
}

}  // namespace

GaussianMoments eta_conditional(const FactorState& f, const VectorXd& theta_i, const EtaExtras& extras) {
  const EtaSystem s = eta_system(f, theta_i, extras);
  GaussianMoments out;
  out.mean = gaussian_precision_mean(s.precision, s.linear);
  out.covariance = s.precision.llt().solve(MatrixXd::Identity(f.k(), f.k()));
  return out;
}

VectorXd sample_eta(const FactorState& f, const VectorXd& theta_i, const EtaExtras& extras, Rng& rng) {
  const EtaSystem s = eta_system(f, theta_i, extras);
  return sample_gaussian_precision(s.precision, s.linear, rng);
}

void sample_lambda_rows(FactorState& f, const MatrixXd& theta, Rng& rng) {
  const Index p = f.p();
  const MatrixXd ete = f.eta.transpose() * f.eta;  // k x k
  const MatrixXd et_theta = f.eta.transpose() * theta.transpose();  // k x p
  for (Index j = 0; j < p; ++j) {
    const double prec_j = 1.0 / f.sigma2(j);
    MatrixXd precision = prec_j * ete;
    precision.diagonal() += (f.iota.row(j).transpose().array() * f.tau.array()).matrix();
    const VectorXd linear = prec_j * et_theta.col(j);
    f.lambda.row(j) = sample_gaussian_precision(precision, linear, rng).transpose();
  }
}

void sample_local_shrinkage(FactorState& f, const MgpsHyper& hyper, Rng& rng) {
  const double shape = 0.5 * (hyper.rho + 1.0);
  for (Index h = 0; h < f.k(); ++h) {
    for (Index j = 0; j < f.p(); ++j) {
      const double lam = f.lambda(j, h);
      f.iota(j, h) = rng.gamma(shape, 0.5 * (hyper.rho + f.tau(h) * lam * lam));
    }
  }
}

void sample_global_shrinkage(FactorState& f, const MgpsHyper& hyper, Rng& rng) {
  const Index k = f.k();
  const double p = static_cast<double>(f.p());
  // Column sums of iota * lambda^2.
  const VectorXd col_ss = (f.iota.array() * f.lambda.array().square()).colwise().sum().transpose();
  for (Index l = 0; l < k; ++l) {
    f.recompute_tau();
    double s = 0.0;
    for (Index h = l; h < k; ++h) s += f.tau(h) / f.delta(l) * col_ss(h);
    const double a = (l == 0) ? hyper.a1 : hyper.a2;
    const double shape = a + 0.5 * p * static_cast<double>(k - l);
    f.delta(l) = rng.gamma(shape, 1.0 + 0.5 * s);
  }
  f.recompute_tau();
}

void sample_sigma(FactorState& f, const MatrixXd& theta, const MgpsHyper& hyper, Rng& rng) {
  const Index n = theta.cols();
  VectorXd ss = VectorXd::Zero(f.p());
  if (n > 0) {
    const MatrixXd resid = theta - f.lambda * f.eta.transpose();
    ss = resid.rowwise().squaredNorm();
  }
  const double shape = hyper.a_sigma + 0.5 * static_cast<double>(n);
  for (Index j = 0; j < f.p(); ++j) {
    f.sigma2(j) = 1.0 / rng.gamma(shape, hyper.b_sigma + 0.5 * ss(j));
  }
}

void sample_beta(CovariateState& c, const MatrixXd& eta, const MatrixXd& covariates, Rng& rng) {
  const Index r = c.r();
  if (r == 0) return;
  const Index k = eta.cols();
  const MatrixXd ztz = covariates.transpose() * covariates;
  const MatrixXd zt_eta = covariates.transpose() * eta;  // r x k
  for (Index l = 0; l < k; ++l) {
    MatrixXd precision = ztz;
    precision.diagonal() += c.w.row(l).transpose();
    c.beta.col(l) = sample_gaussian_precision(precision, zt_eta.col(l), rng);
  }
  for (Index l = 0; l < k; ++l) {
    for (Index j = 0; j < r; ++j) {
      const double b = c.beta(j, l);
      c.w(l, j) = rng.gamma(1.0, 0.5 * (1.0 + b * b));
    }
  }
}

double adaptation_probability(const MgpsHyper& hyper, long iteration) {
  return std::exp(hyper.adapt_p0 + hyper.adapt_p1 * static_cast<double>(iteration));
}

namespace {

template <typename M>
M keep_columns(const M& m, const std::vector<Index>& keep) {
  M out(m.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Index>(c)) = m.col(keep[c]);
  return out;
}

VectorXd keep_entries(const VectorXd& v, const std::vector<Index>& keep) {
  VectorXd out(static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out(static_cast<Index>(c)) = v(keep[c]);
  return out;
}

}  // namespace

RankAdaptation adapt_rank(ModelState& state, const MgpsHyper& hyper, long iteration, double uniform_draw,
                          Rng& rng) {
  RankAdaptation result;
  if (!(uniform_draw < adaptation_probability(hyper, iteration))) return result;

  FactorState& f = state.factor;
  const Index k = f.k();
  const Index p = f.p();
  const Index n = f.n();

  std::vector<Index> keep;
  for (Index h = 0; h < k; ++h) {
    if (!(f.lambda.col(h).cwiseAbs().maxCoeff() < hyper.adapt_eps)) keep.push_back(h);
  }

  if (static_cast<Index>(keep.size()) == k) {
    // No negligible column: grow by one, drawing the new column from the prior.
    const double delta_new = rng.gamma(hyper.a2, 1.0);
    const double tau_new = (k > 0 ? f.tau(k - 1) : 1.0) * delta_new;
    f.delta.conservativeResize(k + 1);
    f.delta(k) = delta_new;
    f.iota.conservativeResize(p, k + 1);
    f.lambda.conservativeResize(p, k + 1);
    for (Index j = 0; j < p; ++j) {
      f.iota(j, k) = rng.gamma(0.5 * hyper.rho, 0.5 * hyper.rho);
      f.lambda(j, k) = rng.normal() / std::sqrt(f.iota(j, k) * tau_new);
    }
    f.eta.conservativeResize(n, k + 1);
    for (Index i = 0; i < n; ++i) f.eta(i, k) = rng.normal();
    f.recompute_tau();

    ProbitState& pr = state.probit;
    pr.gamma.conservativeResize(k + 1);
    pr.gamma(k) = pr.priors.mu_gamma + std::sqrt(pr.priors.v_gamma) * rng.normal();

    CovariateState& cv = state.covariate;
    const Index r = cv.r();
    if (r > 0) {
      cv.w.conservativeResize(k + 1, r);
      cv.beta.conservativeResize(r, k + 1);
      for (Index j = 0; j < r; ++j) {
        cv.w(k, j) = rng.gamma(0.5, 0.5);
        cv.beta(j, k) = rng.normal() / std::sqrt(cv.w(k, j));
      }
    } else {
      cv.beta.resize(0, k + 1);
      cv.w.resize(k + 1, 0);
    }
    result.change = RankChange::added;
    return result;
  }

  if (keep.empty()) keep.push_back(0);
  result.columns_removed = k - static_cast<Index>(keep.size());
  if (result.columns_removed == 0) return result;

  f.lambda = keep_columns(f.lambda, keep);
  f.iota = keep_columns(f.iota, keep);
  f.eta = keep_columns(f.eta, keep);
  f.delta = keep_entries(f.delta, keep);
  f.recompute_tau();
  state.probit.gamma = keep_entries(state.probit.gamma, keep);
  CovariateState& cv = state.covariate;
  if (cv.r() > 0) {
    cv.beta = keep_columns(cv.beta, keep);
    MatrixXd wt = keep_columns(MatrixXd(cv.w.transpose()), keep);
    cv.w = wt.transpose();
  } else {
    cv.beta.resize(0, static_cast<Index>(keep.size()));
    cv.w.resize(static_cast<Index>(keep.size()), 0);
  }
  result.change = RankChange::removed;
  return result;
}

FactorState sample_factor_prior(Index p, Index n, Index k, const MgpsHyper& hyper, Rng& rng) {
  FactorState f;
  f.delta.resize(k);
  for (Index l = 0; l < k; ++l) f.delta(l) = rng.gamma(l == 0 ? hyper.a1 : hyper.a2, 1.0);
  f.recompute_tau();
  f.iota.resize(p, k);
  f.lambda.resize(p, k);
  for (Index h = 0; h < k; ++h) {
    for (Index j = 0; j < p; ++j) {
      f.iota(j, h) = rng.gamma(0.5 * hyper.rho, 0.5 * hyper.rho);
      f.lambda(j, h) = rng.normal() / std::sqrt(f.iota(j, h) * f.tau(h));
    }
  }
  f.sigma2.resize(p);
  for (Index j = 0; j < p; ++j) f.sigma2(j) = 1.0 / rng.gamma(hyper.a_sigma, hyper.b_sigma);
  f.eta.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index h = 0; h < k; ++h) f.eta(i, h) = rng.normal();
  }
  return f;
}

MatrixXd dictionary(const FactorState& f, const BasisSet& basis) { return basis.voxel_design * f.lambda; }

VectorXd residual_map(const FactorState& f, const BasisSet& basis, const VectorXd& theta_i, Index i) {
  const VectorXd zeta = theta_i - f.lambda * f.eta.row(i).transpose();
  return basis.voxel_design * zeta;
}

}  // namespace cbma
