#pragma once

#include "cbma/random.hpp"

#include <cmath>
#include <limits>

namespace cbma {

/// Position, momentum and the cached log density / gradient at position.
struct PhaseState {
  VectorXd position;
  VectorXd momentum;
  VectorXd grad;
  double log_density = 0.0;

  double hamiltonian() const { return -log_density + 0.5 * momentum.squaredNorm(); }
};

/// `steps` leapfrog steps of size eps on H = -log p(q) + |r|^2 / 2 with
/// identity mass. Requires s.grad and s.log_density to be current. Returns
/// false as soon as the density or gradient stops being finite.
template <typename Target>
bool leapfrog(const Target& target, PhaseState& s, double eps, int steps) {
  for (int l = 0; l < steps; ++l) {
    s.momentum.noalias() += 0.5 * eps * s.grad;
    s.position.noalias() += eps * s.momentum;
    s.log_density = target.value_and_grad(s.position, s.grad);
    if (!std::isfinite(s.log_density) || !s.grad.allFinite()) return false;
    s.momentum.noalias() += 0.5 * eps * s.grad;
  }
  return true;
}

struct HmcResult {
  VectorXd position;
  bool accepted = false;
  bool divergent = false;
  double delta_h = 0.0;  // H(end) - H(start)
};

/// One HMC transition: momentum ~ N(0, I), `steps` leapfrog steps, and a
/// Metropolis test on the exact Hamiltonian difference. A non-finite
/// trajectory is rejected and flagged divergent.
template <typename Target>
HmcResult hmc_transition(const Target& target, const VectorXd& start, double eps, int steps, Rng& rng) {
  PhaseState s;
  s.position = start;
  s.log_density = target.value_and_grad(s.position, s.grad);
  s.momentum = rng.normal_vector(start.size());
  const double u = rng.uniform();

  HmcResult out;
  out.position = start;
  if (!std::isfinite(s.log_density) || !s.grad.allFinite()) {
    out.divergent = true;
    return out;
  }
  const double h0 = s.hamiltonian();
  if (!leapfrog(target, s, eps, steps)) {
    out.divergent = true;
    out.delta_h = std::numeric_limits<double>::infinity();
    return out;
  }
  out.delta_h = s.hamiltonian() - h0;
  if (!std::isfinite(out.delta_h)) {
    out.divergent = true;
    return out;
  }
  if (std::log(u) < -out.delta_h) {
    out.position = std::move(s.position);
    out.accepted = true;
  }
  return out;
}

/// L ~ Poisson(mean), clamped to >= 1.
inline int draw_leapfrog_steps(double mean, Rng& rng) {
  return static_cast<int>(std::max<long>(1, rng.poisson(mean)));
}

/// Multiplicative step-size rule eps * exp(kappa * (rate - target)).
inline double adapted_step_size(double eps, double mean_accept, double target_accept, double kappa = 1.0) {
  return eps * std::exp(kappa * (mean_accept - target_accept));
}

}  // namespace cbma
