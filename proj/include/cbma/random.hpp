#pragma once

#include "cbma/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cbma {

/// Mixes a master seed with stream coordinates (iteration, study, purpose)
/// into an independent 64-bit seed (SplitMix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

/// Stable 64-bit FNV-1a hash; used to key RNG streams by string ids.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL);
inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

/// RNG stream. Draws go through the standard distributions so a fixed seed
/// is reproducible on a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  Rng(std::uint64_t master, std::initializer_list<std::uint64_t> coords) : engine_(derive_seed(master, coords)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Gamma with shape and rate (mean shape / rate).
  double gamma(double shape, double rate) { return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_); }
  long poisson(double mean) { return mean > 0.0 ? std::poisson_distribution<long>(mean)(engine_) : 0; }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }

  VectorXd normal_vector(Index n) {
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

double normal_cdf(double x);
double normal_log_pdf(double x);

/// N(mean, 1) restricted to (0, inf). Uses exponential rejection in the
/// tail (Robert 1995), so it stays finite for any mean.
double truncated_normal_positive(double mean, Rng& rng);
/// N(mean, 1) restricted to (-inf, 0].
double truncated_normal_nonpositive(double mean, Rng& rng);

/// Draw from N(P^{-1} h, P^{-1}) for a symmetric positive-definite precision
/// P. Throws Error("singular_precision") with a condition estimate.
VectorXd sample_gaussian_precision(const MatrixXd& precision, const VectorXd& linear, Rng& rng);
/// Mean P^{-1} h only (same failure mode).
VectorXd gaussian_precision_mean(const MatrixXd& precision, const VectorXd& linear);

}  // namespace cbma
