#include "cbma/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace cbma {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Tail sampler for N(0,1) restricted to (a, inf), a > 0.
double tail_normal(double a, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  while (true) {
    const double z = a + rng.exponential(lambda);
    const double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
    if (rng.uniform() <= rho) return z;
  }
}

// N(0,1) restricted to (a, inf) for any a.
double lower_truncated_std_normal(double a, Rng& rng) {
  if (a > 0.45) return tail_normal(a, rng);
  while (true) {
    const double z = rng.normal();
    if (z > a) return z;
  }
}

MatrixXd checked_llt_factor(const MatrixXd& precision, Eigen::LLT<MatrixXd>& llt) {
  llt.compute(precision);
  if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite()) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(precision, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "singular precision matrix (eigenvalue range " << es.eigenvalues().minCoeff() << " .. "
        << es.eigenvalues().maxCoeff() << ")";
    throw Error("singular_precision", msg.str());
  }
  return llt.matrixL();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }

double truncated_normal_positive(double mean, Rng& rng) {
  return mean + lower_truncated_std_normal(-mean, rng);
}

double truncated_normal_nonpositive(double mean, Rng& rng) {
  // W <= 0 with W = mean + Z  <=>  -Z >= mean.
  double w = mean - lower_truncated_std_normal(mean, rng);
  return std::min(w, 0.0);
}

VectorXd gaussian_precision_mean(const MatrixXd& precision, const VectorXd& linear) {
  Eigen::LLT<MatrixXd> llt;
  checked_llt_factor(precision, llt);
  return llt.solve(linear);
}

VectorXd sample_gaussian_precision(const MatrixXd& precision, const VectorXd& linear, Rng& rng) {
  Eigen::LLT<MatrixXd> llt;
  checked_llt_factor(precision, llt);
  const VectorXd mean = llt.solve(linear);
  const VectorXd z = rng.normal_vector(precision.rows());
  // P = L L^T, so L^{-T} z has covariance P^{-1}.
  return mean + llt.matrixU().solve(z);
}

}  // namespace cbma
