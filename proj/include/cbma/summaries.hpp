#pragma once

#include "cbma/sampler.hpp"

#include <vector>

namespace cbma {

/// exp(voxel_design * theta) over masked voxels.
template <typename Derived>
VectorXd intensity_map(const BasisSet& basis, const Eigen::MatrixBase<Derived>& theta) {
  return (basis.voxel_design * theta).array().exp().matrix();
}

struct GroupIntensity {
  VectorXd mean;      // V, posterior mean over draws
  MatrixXd per_draw;  // V x S
};

/// Per draw, the intensity of the group-averaged coefficients
/// exp(b^T mean_{i in group} theta_i). Requires recorded theta.
GroupIntensity group_mean_intensity(const ChainOutput& chain, const std::vector<Index>& group, const BasisSet& basis);

struct DifferenceMaps {
  VectorXd mean;
  VectorXd sd;
  VectorXd standardized;           // mean / sd, 0 where sd == 0
  std::vector<std::uint8_t> zero_sd;  // 1 where sd == 0
};

DifferenceMaps difference_maps(const ChainOutput& chain, const std::vector<Index>& group_a,
                               const std::vector<Index>& group_b, const BasisSet& basis);

/// Intensity of study i in every draw, V x S.
MatrixXd study_intensity_draws(const ChainOutput& chain, Index study, const BasisSet& basis);

/// Posterior mean intensity of every study, V x n.
MatrixXd posterior_mean_intensities(const ChainOutput& chain, const BasisSet& basis);

/// Posterior mean of the dictionary maps, V x k (k is fixed after burn-in).
MatrixXd mean_dictionary(const ChainOutput& chain, const BasisSet& basis);

struct TraceSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double mcse = 0.0;  // batch means
  long n = 0;
};

/// Mean, SD and batch-means Monte Carlo standard error (floor(sqrt(n))
/// batches of equal size; the leftover head of the trace is dropped).
TraceSummary summarize_trace(const std::string& name, const std::vector<double>& trace);

struct Diagnostics {
  std::vector<TraceSummary> scalars;  // over retained draws
  double mean_accept_burn_in = 0.0;
  double mean_accept_sampling = 0.0;
  long total_divergences = 0;
  std::vector<int> k_trace;
  std::vector<double> accept_trace;
};

Diagnostics diagnostics(const ChainOutput& chain);

struct ChainComparison {
  MatrixXd mean_intensity;  // chains x voxels, all-study group mean
  VectorXd relative_spread;  // per voxel, (max - min) / mean over chains
};

/// Posterior mean intensity of the all-study group at the given masked
/// voxel positions for several chains of the same data.
ChainComparison compare_chains(const std::vector<const ChainOutput*>& chains, const std::vector<Index>& voxels,
                               const BasisSet& basis);

}  // namespace cbma
