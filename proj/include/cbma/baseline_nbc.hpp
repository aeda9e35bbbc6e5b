#pragma once

#include "cbma/grid.hpp"

#include <optional>
#include <vector>

namespace cbma {

/// Binary map over the masked voxels (0..V-1).
using ActivationMap = std::vector<std::uint8_t>;

/// 1 where the voxel center lies within the closed ball of `radius` mm
/// around some focus.
ActivationMap binary_activation_map(const PointsXd& foci, const VolumeGrid& grid, double radius);

struct ProbabilityMaps {
  VectorXd p1;  // P(active | type 1)
  VectorXd p0;  // P(active | type 0)
};

inline constexpr double kProbabilityClip = 1e-3;

/// Weighted average of the binary maps per class, clipped to
/// [clip, 1 - clip]. Weights default to 1; each class needs positive weight.
ProbabilityMaps group_probability_maps(const std::vector<ActivationMap>& maps, const std::vector<int>& labels,
                                       const std::vector<double>& weights = {}, double clip = kProbabilityClip);

/// Naive Bayes posterior probability of type 1 given prior P(type 1).
double nbc_predict(const ActivationMap& map, const ProbabilityMaps& probs, double prior_type1 = 0.5);

}  // namespace cbma
