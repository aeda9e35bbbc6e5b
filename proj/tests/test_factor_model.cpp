#include "cbma/factor_model.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace cbma;

namespace {

FactorState small_state(Index p, Index n, Index k, Rng& rng) {
  MgpsHyper hyper;
  FactorState f = sample_factor_prior(p, n, k, hyper, rng);
  f.sigma2 = (rng.normal_vector(p).array().abs() + 0.3).matrix();
  return f;
}

// Mean and covariance of the columns of a k x N sample matrix.
std::pair<VectorXd, MatrixXd> moments(const MatrixXd& draws) {
  const VectorXd m = draws.rowwise().mean();
  const MatrixXd c = draws.colwise() - m;
  return {m, c * c.transpose() / static_cast<double>(draws.cols() - 1)};
}

}  // namespace

TEST_SUITE("factor_model") {
  TEST_CASE("eta is standard normal when Lambda = 0") {
    Rng rng(1);
    FactorState f = small_state(4, 1, 3, rng);
    f.lambda.setZero();
    const GaussianMoments m = eta_conditional(f, rng.normal_vector(4));
    CHECK(m.mean.norm() == 0.0);
    CHECK(m.covariance.isApprox(MatrixXd::Identity(3, 3)));

    MatrixXd draws(3, 20000);
    for (Index t = 0; t < draws.cols(); ++t) draws.col(t) = sample_eta(f, VectorXd::Zero(4), {}, rng);
    const auto [mean, cov] = moments(draws);
    CHECK(mean.cwiseAbs().maxCoeff() < 4.0 / std::sqrt(20000.0));
    CHECK((cov - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.05);
  }

  TEST_CASE("eta conditional, p = 2, k = 1 by hand") {
    FactorState f;
    f.lambda = (MatrixXd(2, 1) << 1.0, 2.0).finished();
    f.sigma2 = (VectorXd(2) << 0.5, 2.0).finished();
    const VectorXd theta = (VectorXd(2) << 1.0, -1.0).finished();
    // precision = 1 + 1/0.5 + 4/2 = 5, linear = 1/0.5 - 2/2 = 1
    GaussianMoments m = eta_conditional(f, theta);
    CHECK(m.mean(0) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(m.covariance(0, 0) == doctest::Approx(0.2).epsilon(1e-14));

    // Probit term adds gamma^2 to the precision and gamma (W - alpha) to the linear term;
    // the covariate mean adds beta^T Z.
    EtaExtras ex;
    ex.probit = EtaExtras::Probit{0.5, (VectorXd(1) << 2.0).finished(), 1.5};
    ex.prior_mean = (VectorXd(1) << 0.7).finished();
    m = eta_conditional(f, theta, ex);
    CHECK(m.covariance(0, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
    CHECK(m.mean(0) == doctest::Approx((1.0 + 2.0 + 0.7) / 9.0).epsilon(1e-14));

    Rng rng(2);
    std::vector<double> xs(20000);
    for (double& x : xs) x = sample_eta(f, theta, ex, rng)(0);
    CHECK(oracle::ks_distance(xs, [&](double x) { return oracle::normal_cdf((x - m.mean(0)) * 3.0); }) < 0.015);
  }

  TEST_CASE("Lambda rows follow their prior when eta = 0") {
    Rng rng(3);
    FactorState f = small_state(3, 10, 2, rng);
    f.eta.setZero();
    const MatrixXd theta = MatrixXd::Random(3, 10);
    const VectorXd prec = (f.iota.row(1).transpose().array() * f.tau.array()).matrix();
    const int N = 20000;
    MatrixXd draws(2, N);
    for (int t = 0; t < N; ++t) {
      sample_lambda_rows(f, theta, rng);
      draws.col(t) = f.lambda.row(1).transpose();
    }
    const auto [mean, cov] = moments(draws);
    for (Index h = 0; h < 2; ++h) {
      CHECK(std::abs(mean(h)) < 4.0 / std::sqrt(N * prec(h)));
      CHECK(cov(h, h) * prec(h) == doctest::Approx(1.0).epsilon(0.05));
    }
  }

  TEST_CASE("scalar Lambda row matches the conjugate formula") {
    FactorState f;
    f.eta = (MatrixXd(3, 1) << 1.0, -2.0, 0.5).finished();
    f.sigma2 = VectorXd::Constant(1, 0.5);
    f.iota = MatrixXd::Constant(1, 1, 2.0);
    f.delta = VectorXd::Constant(1, 1.5);
    f.recompute_tau();
    f.lambda = MatrixXd::Zero(1, 1);
    const MatrixXd theta = (MatrixXd(1, 3) << 0.8, -1.9, 0.2).finished();
    // precision = sum eta^2 / s2 + iota tau = 5.25 / 0.5 + 3 = 13.5
    const double prec = 13.5;
    const double mu = (0.8 + 3.8 + 0.1) / 0.5 / prec;
    Rng rng(4);
    std::vector<double> xs(10000);
    for (double& x : xs) {
      sample_lambda_rows(f, theta, rng);
      x = f.lambda(0, 0);
    }
    CHECK(oracle::ks_distance(xs, [&](double x) { return oracle::normal_cdf((x - mu) * std::sqrt(prec)); }) < 0.02);
  }

  TEST_CASE("huge tau shrinks Lambda to zero") {
    Rng rng(5);
    FactorState f = small_state(5, 30, 3, rng);
    f.delta(0) = 1e12;
    f.recompute_tau();
    sample_lambda_rows(f, MatrixXd::Random(5, 30) * 3.0, rng);
    CHECK(f.lambda.cwiseAbs().maxCoeff() < 1e-4);
  }

  TEST_CASE("local shrinkage moments and monotonicity") {
    MgpsHyper hyper;
    FactorState f;
    f.lambda = (MatrixXd(1, 2) << 0.1, 2.0).finished();
    f.delta = (VectorXd(2) << 1.5, 2.0).finished();
    f.recompute_tau();
    f.iota = MatrixXd::Ones(1, 2);
    Rng rng(6);
    const int N = 40000;
    double s0 = 0, s1 = 0;
    for (int t = 0; t < N; ++t) {
      sample_local_shrinkage(f, hyper, rng);
      s0 += f.iota(0, 0);
      s1 += f.iota(0, 1);
    }
    const double shape = (hyper.rho + 1) / 2;
    const double m0 = shape / (0.5 * (hyper.rho + 1.5 * 0.01));
    const double m1 = shape / (0.5 * (hyper.rho + 3.0 * 4.0));
    CHECK(s0 / N == doctest::Approx(m0).epsilon(0.02));
    CHECK(s1 / N == doctest::Approx(m1).epsilon(0.02));
    CHECK(m1 < m0);
  }

  TEST_CASE("global shrinkage with Lambda = 0 samples the prior") {
    MgpsHyper hyper;
    Rng rng(7);
    FactorState f = small_state(4, 0, 3, rng);
    f.lambda.setZero();
    const int N = 20000;
    VectorXd sum = VectorXd::Zero(3);
    for (int t = 0; t < N; ++t) {
      sample_global_shrinkage(f, hyper, rng);
      sum += f.delta;
      // tau stays the cumulative product.
      CHECK(f.tau(2) == doctest::Approx(f.delta(0) * f.delta(1) * f.delta(2)).epsilon(1e-14));
    }
    // Shape a + p (k - l) / 2, rate 1.
    CHECK(sum(0) / N == doctest::Approx(hyper.a1 + 6.0).epsilon(0.02));
    CHECK(sum(1) / N == doctest::Approx(hyper.a2 + 4.0).epsilon(0.02));
    CHECK(sum(2) / N == doctest::Approx(hyper.a2 + 2.0).epsilon(0.02));
  }

  TEST_CASE("residual variances") {
    MgpsHyper hyper;
    Rng rng(8);
    FactorState f = small_state(2, 0, 1, rng);
    const int N = 40000;
    double inv = 0.0;
    for (int t = 0; t < N; ++t) {
      sample_sigma(f, MatrixXd(2, 0), hyper, rng);
      inv += 1.0 / f.sigma2(0);
    }
    CHECK(inv / N == doctest::Approx(hyper.a_sigma / hyper.b_sigma).epsilon(0.02));

    // Zero residuals: precision ~ Gamma(a + n/2, b).
    FactorState g = small_state(2, 6, 1, rng);
    const MatrixXd theta = g.lambda * g.eta.transpose();
    inv = 0.0;
    for (int t = 0; t < N; ++t) {
      sample_sigma(g, theta, hyper, rng);
      inv += 1.0 / g.sigma2(1);
    }
    CHECK(inv / N == doctest::Approx((hyper.a_sigma + 3.0) / hyper.b_sigma).epsilon(0.02));
  }

  TEST_CASE("covariate coefficients") {
    Rng rng(9);
    CovariateState none;
    none.beta.resize(0, 2);
    none.w.resize(2, 0);
    sample_beta(none, MatrixXd::Random(5, 2), MatrixXd(5, 0), rng);
    CHECK(none.beta.size() == 0);

    // With Z = 0 the (beta, w) chain targets the prior, whose beta marginal is
    // standard Cauchy.
    CovariateState c;
    c.beta = MatrixXd::Zero(1, 1);
    c.w = MatrixXd::Ones(1, 1);
    const int N = 40000;
    std::vector<double> b(N);
    for (int t = 0; t < N; ++t) {
      sample_beta(c, MatrixXd::Zero(4, 1), MatrixXd::Zero(4, 1), rng);
      b[t] = c.beta(0, 0);
    }
    CHECK(oracle::ks_distance(b, [](double x) { return 0.5 + std::atan(x) / M_PI; }) < 0.03);
  }

  TEST_CASE("rank adaptation") {
    MgpsHyper hyper;
    Rng rng(10);
    ModelState s;
    s.factor = small_state(4, 6, 3, rng);
    s.probit.gamma = VectorXd::Ones(3);
    s.covariate.beta.resize(0, 3);
    s.covariate.w.resize(3, 0);

    SUBCASE("no attempt when the uniform exceeds the probability") {
      const auto before = s.factor.lambda;
      CHECK(adapt_rank(s, hyper, 10, 0.999, rng).change == RankChange::none);
      CHECK(s.factor.lambda == before);
    }
    SUBCASE("adds a column when none is negligible") {
      s.factor.lambda.array() += 1.0;
      const auto before = s.factor.lambda;
      CHECK(adapt_rank(s, hyper, 10, 0.0, rng).change == RankChange::added);
      CHECK(s.k() == 4);
      CHECK(s.factor.lambda.leftCols(3) == before);
      CHECK(s.factor.eta.cols() == 4);
      CHECK(s.factor.iota.cols() == 4);
      CHECK(s.probit.gamma.size() == 4);
      CHECK(s.covariate.beta.cols() == 4);
      CHECK(s.factor.tau(3) == doctest::Approx(s.factor.tau(2) * s.factor.delta(3)));
    }
    SUBCASE("drops every negligible column") {
      s.factor.lambda.array() += 1.0;
      s.factor.lambda.col(0).setConstant(1e-6);
      s.factor.lambda.col(2).setConstant(-1e-6);
      const VectorXd kept = s.factor.lambda.col(1);
      const double gamma1 = s.probit.gamma(1);
      const RankAdaptation r = adapt_rank(s, hyper, 10, 0.0, rng);
      CHECK(r.change == RankChange::removed);
      CHECK(r.columns_removed == 2);
      CHECK(s.k() == 1);
      CHECK(s.factor.lambda.col(0) == kept);
      CHECK(s.probit.gamma(0) == gamma1);
    }
    SUBCASE("k never drops below one") {
      s.factor.lambda.setZero();
      adapt_rank(s, hyper, 10, 0.0, rng);
      CHECK(s.k() == 1);
    }
  }

  TEST_CASE("adaptation probability decays") {
    MgpsHyper hyper;
    CHECK(adaptation_probability(hyper, 0) == doctest::Approx(std::exp(-1.0)));
    CHECK(adaptation_probability(hyper, 1000) < adaptation_probability(hyper, 100));
  }

  TEST_CASE("dictionary and residual identities") {
    Rng rng(11);
    const VolumeGrid grid = box_grid({6, 6, 1}, Vec3(4, 4, 1), Vec3::Zero());
    PointsXd centers(2, 3);
    centers << 4, 4, 0, 16, 12, 0;
    const BasisSet basis = build_basis(grid, centers, 0.01);
    FactorState f = small_state(3, 4, 2, rng);
    const MatrixXd phi = dictionary(f, basis);
    CHECK(phi.rows() == grid.masked_count());
    CHECK(phi.cols() == 2);
    // theta_i = Lambda eta_i + zeta_i maps to phi eta_i + r_i.
    const VectorXd theta = rng.normal_vector(3);
    const VectorXd lhs = basis.voxel_design * theta;
    const VectorXd rhs = phi * f.eta.row(2).transpose() + residual_map(f, basis, theta, 2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("prior draw shapes and eta moments") {
    MgpsHyper hyper;
    Rng rng(12);
    const FactorState f = sample_factor_prior(7, 5000, 4, hyper, rng);
    CHECK(f.lambda.rows() == 7);
    CHECK(f.lambda.cols() == 4);
    CHECK(f.iota.cols() == 4);
    CHECK(f.sigma2.size() == 7);
    CHECK((f.sigma2.array() > 0).all());
    CHECK(std::abs(f.eta.mean()) < 4.0 / std::sqrt(20000.0));
    CHECK(f.eta.array().square().mean() == doctest::Approx(1.0).epsilon(0.04));
  }

  TEST_CASE("hyperparameter validation") {
    MgpsHyper h;
    CHECK_NOTHROW(h.validate());
    h.a2 = 0.9;
    CHECK_THROWS_AS(h.validate(), Error);
    h = MgpsHyper{};
    h.k_init = 0;
    CHECK_THROWS_AS(h.validate(), Error);
    h = MgpsHyper{};
    h.adapt_p1 = 0.0;
    CHECK_THROWS_AS(h.validate(), Error);
    h = MgpsHyper{};
    h.rho = -1;
    try {
      h.validate();
    } catch (const Error& e) {
      CHECK(e.code() == "invalid_hyper");
    }
  }
}
