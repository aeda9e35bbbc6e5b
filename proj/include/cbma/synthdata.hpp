#pragma once

#include "cbma/basis.hpp"
#include "cbma/random.hpp"
#include "cbma/study.hpp"

#include <string>
#include <vector>

namespace cbma {

/// Inhomogeneous Poisson pattern for an intensity over masked voxels:
/// N ~ Poisson(sum(lambda) * voxel_volume), voxels drawn proportionally to
/// lambda, a uniform position inside the voxel, then snapped.
PointsXd simulate_study(const VectorXd& intensity, const VolumeGrid& grid, Rng& rng);

/// Kernel layout and bandwidth of a fitted model.
struct ModelSettings {
  int nx = 6;
  int ny = 8;
  double bandwidth = 0.002;  // mm^-2
};

/// Synthetic multi-study dataset. Study i has log-intensity
///   c + g(v) + sum_l z_il (psi_l(v) + a),
/// where g is a shared mixture of Gaussian bumps, psi_l are smooth random
/// perturbation maps (k_true of them) and z_il ~ N(+-type_shift / 2, perturb_sd^2)
/// with the sign given by the study type. The type difference therefore lives
/// in the factor scores and the truths have latent rank 1 + k_true. c and a
/// are set so the mean expected focus count of each type equals its target;
/// without both types, scores or a shift, c is set per type and a = 0.
struct ScenarioConfig {
  Dims dims{40, 48, 1};
  Vec3 voxel_size{4.0, 4.0, 1.0};
  double z_mm = -20.0;
  int n_studies = 200;
  double type1_fraction = 0.7;
  int k_true = 3;
  int bumps_min = 3;
  int bumps_max = 6;
  double amp_min = 2.0;
  double amp_max = 3.5;
  double width_min = 16.0;  // bump SD, mm
  double width_max = 28.0;
  int perturb_bumps = 3;
  double perturb_width_min = 16.0;
  double perturb_width_max = 28.0;
  double perturb_sd = 0.5;
  double type_shift = 0.6;
  double expected_count_type1 = 7.5;
  double expected_count_type0 = 12.8;
  std::uint64_t seed = 1;

  void validate() const;
  /// round(type1_fraction * n_studies).
  int n_type1() const;
};

struct Scenario {
  ScenarioConfig config;
  VolumeGrid grid;
  MatrixXd truths;        // V x n true intensities
  MatrixXd group_log_mean;  // V x 2, log-intensity at the mean scores of type t
  MatrixXd perturbations;   // V x k_true, psi_l + a
  MatrixXd scores;          // n x k_true
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<PointsXd> foci;
};

/// Centered lattice at z = z_mm with an elliptical slice mask.
VolumeGrid scenario_grid(const ScenarioConfig& config);

/// Type-1 studies come first in index order (ids s0001...).
Scenario make_scenario(const ScenarioConfig& config);

/// Basis of the given settings on the scenario grid (single axial slice
/// lattice at each occupied z).
BasisSet scenario_basis(const VolumeGrid& grid, const ModelSettings& settings);

/// Studies with foci and labels attached to the basis.
std::vector<Study> scenario_studies(const Scenario& scenario, const BasisSet& basis);

/// (1/N) sum_i sum_v (truth - estimate)^2 * voxel_volume.
double imse(const MatrixXd& truths, const MatrixXd& estimates, const VolumeGrid& grid);

/// Per-study constant equal to the mean truth over the domain; the
/// constant intensity map with the smallest squared error.
MatrixXd best_constant_estimate(const MatrixXd& truths);

struct RocCurve {
  std::vector<double> thresholds;  // descending; a study is positive when score >= threshold
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// AUC by the Mann-Whitney statistic with tie-averaged ranks, curve by a
/// threshold sweep over the distinct scores. Labels must be 0/1 with both
/// classes present.
RocCurve roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

}  // namespace cbma
