#include "cbma/baseline_nbc.hpp"

#include <cmath>

namespace cbma {

ActivationMap binary_activation_map(const PointsXd& foci, const VolumeGrid& grid, double radius) {
  if (!(radius >= 0.0)) throw Error("invalid_radius", "radius must be >= 0");
  const PointsXd& centers = grid.masked_centers();
  const double r2 = radius * radius;
  ActivationMap map(static_cast<std::size_t>(centers.rows()), 0);
  for (Index v = 0; v < centers.rows(); ++v) {
    for (Index j = 0; j < foci.rows(); ++j) {
      if ((centers.row(v) - foci.row(j)).squaredNorm() <= r2) {
        map[static_cast<std::size_t>(v)] = 1;
        break;
      }
    }
  }
  return map;
}

ProbabilityMaps group_probability_maps(const std::vector<ActivationMap>& maps, const std::vector<int>& labels,
                                       const std::vector<double>& weights, double clip) {
  if (maps.size() != labels.size()) throw Error("dimension_mismatch", "one label per map required");
  if (!weights.empty() && weights.size() != maps.size()) throw Error("dimension_mismatch", "one weight per map required");
  if (maps.empty()) throw Error("empty_input", "no training maps");
  if (!(clip >= 0.0 && clip < 0.5)) throw Error("invalid_clip", "clip must lie in [0, 0.5)");
  const Index V = static_cast<Index>(maps.front().size());
  VectorXd sum[2] = {VectorXd::Zero(V), VectorXd::Zero(V)};
  double total[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("invalid_label", "labels must be 0 or 1");
    if (static_cast<Index>(maps[i].size()) != V) throw Error("dimension_mismatch", "maps differ in size");
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0)) throw Error("invalid_weight", "weights must be >= 0");
    for (Index v = 0; v < V; ++v) {
      if (maps[i][static_cast<std::size_t>(v)]) sum[labels[i]](v) += w;
    }
    total[labels[i]] += w;
  }
  if (!(total[0] > 0.0) || !(total[1] > 0.0)) throw Error("empty_class", "both classes need positive total weight");
  ProbabilityMaps out;
  out.p1 = (sum[1] / total[1]).cwiseMax(clip).cwiseMin(1.0 - clip);
  out.p0 = (sum[0] / total[0]).cwiseMax(clip).cwiseMin(1.0 - clip);
  return out;
}

double nbc_predict(const ActivationMap& map, const ProbabilityMaps& probs, double prior_type1) {
  if (!(prior_type1 > 0.0 && prior_type1 < 1.0)) throw Error("invalid_prior", "prior must lie in (0, 1)");
  if (static_cast<Index>(map.size()) != probs.p1.size() || probs.p1.size() != probs.p0.size()) {
    throw Error("dimension_mismatch", "activation map and probability maps differ in size");
  }
  double log_odds = std::log(prior_type1 / (1.0 - prior_type1));
  for (std::size_t v = 0; v < map.size(); ++v) {
    const double p1 = probs.p1(static_cast<Index>(v));
    const double p0 = probs.p0(static_cast<Index>(v));
    log_odds += map[v] ? std::log(p1 / p0) : std::log1p(-p1) - std::log1p(-p0);
  }
  return 1.0 / (1.0 + std::exp(-log_odds));
}

}  // namespace cbma
