#include "cbma/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace cbma {

namespace {

enum ScenarioStream : std::uint64_t { kGroupStream = 11, kPerturbStream = 12, kScoreStream = 13, kFociStream = 14 };

// Sum of Gaussian bumps amp * exp(-|v - c|^2 / (2 w^2)) with centers drawn
// uniformly from the masked voxel centers.
VectorXd bump_mixture(const VolumeGrid& grid, int n_bumps, double width_min, double width_max, bool signed_amp,
                      double amp_min, double amp_max, Rng& rng) {
  const PointsXd& centers = grid.masked_centers();
  const Index V = centers.rows();
  VectorXd field = VectorXd::Zero(V);
  for (int b = 0; b < n_bumps; ++b) {
    const Index c = std::min<Index>(V - 1, static_cast<Index>(rng.uniform() * static_cast<double>(V)));
    const double width = width_min + (width_max - width_min) * rng.uniform();
    const double amp = signed_amp ? rng.normal() : amp_min + (amp_max - amp_min) * rng.uniform();
    const double inv = 1.0 / (2.0 * width * width);
    for (Index v = 0; v < V; ++v) field(v) += amp * std::exp(-(centers.row(v) - centers.row(c)).squaredNorm() * inv);
  }
  return field;
}

}  // namespace

PointsXd simulate_study(const VectorXd& intensity, const VolumeGrid& grid, Rng& rng) {
  if (intensity.size() != grid.masked_count()) throw Error("dimension_mismatch", "intensity must cover the masked voxels");
  if (!intensity.allFinite() || (intensity.array() < 0.0).any()) {
    throw Error("invalid_intensity", "intensity must be finite and nonnegative");
  }
  const double total = intensity.sum() * grid.voxel_volume();
  if (!(total > 0.0)) return PointsXd(0, 3);
  const long n = rng.poisson(total);
  std::discrete_distribution<Index> pick(intensity.data(), intensity.data() + intensity.size());
  const PointsXd& centers = grid.masked_centers();
  PointsXd out(n, 3);
  for (long j = 0; j < n; ++j) {
    const Index v = pick(rng.engine());
    Vec3 x = centers.row(v).transpose();
    for (int a = 0; a < 3; ++a) x[a] += (rng.uniform() - 0.5) * grid.voxel_size()[a];
    out.row(j) = snap_focus(grid, x).position.transpose();
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (n_studies < 0) throw Error("invalid_scenario", "n_studies must be >= 0");
  if (!(type1_fraction >= 0.0 && type1_fraction <= 1.0)) throw Error("invalid_scenario", "type1_fraction must lie in [0, 1]");
  if (k_true < 0) throw Error("invalid_scenario", "k_true must be >= 0");
  if (bumps_min < 1 || bumps_max < bumps_min) throw Error("invalid_scenario", "need 1 <= bumps_min <= bumps_max");
  if (!(amp_min >= 0.0 && amp_max >= amp_min)) throw Error("invalid_scenario", "need 0 <= amp_min <= amp_max");
  if (!(width_min > 0.0 && width_max >= width_min) || !(perturb_width_min > 0.0 && perturb_width_max >= perturb_width_min)) {
    throw Error("invalid_scenario", "bump widths must be positive and ordered");
  }
  if (perturb_bumps < 0 || !(perturb_sd >= 0.0) || !std::isfinite(type_shift)) throw Error("invalid_scenario", "perturbation settings must be >= 0");
  if (!(expected_count_type1 > 0.0) || !(expected_count_type0 > 0.0)) {
    throw Error("invalid_scenario", "expected counts must be positive");
  }
}

int ScenarioConfig::n_type1() const {
  return static_cast<int>(std::lround(type1_fraction * n_studies));
}

VolumeGrid scenario_grid(const ScenarioConfig& config) {
  Vec3 origin;
  for (int a = 0; a < 2; ++a) origin[a] = -0.5 * (config.dims[a] - 1) * config.voxel_size[a];
  origin[2] = config.z_mm - 0.5 * (config.dims[2] - 1) * config.voxel_size[2];
  return ellipse_grid(config.dims, config.voxel_size, origin);
}

Scenario make_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario sc;
  sc.config = config;
  sc.grid = scenario_grid(config);
  const Index V = sc.grid.masked_count();
  const int n = config.n_studies;
  const int n1 = config.n_type1();

  VectorXd shared;
  {
    Rng rng(config.seed, {kGroupStream});
    const int span = config.bumps_max - config.bumps_min + 1;
    const int n_bumps = config.bumps_min + std::min(span - 1, static_cast<int>(rng.uniform() * span));
    shared = bump_mixture(sc.grid, n_bumps, config.width_min, config.width_max, false, config.amp_min, config.amp_max, rng);
  }
  sc.perturbations.resize(V, config.k_true);
  for (int l = 0; l < config.k_true; ++l) {
    Rng rng(config.seed, {kPerturbStream, static_cast<std::uint64_t>(l)});
    sc.perturbations.col(l) = bump_mixture(sc.grid, config.perturb_bumps, config.perturb_width_min,
                                           config.perturb_width_max, true, 0.0, 0.0, rng);
  }
  auto score_mean = [&](int y) { return (y == 1 ? 0.5 : -0.5) * config.type_shift; };

  sc.scores.resize(n, config.k_true);
  sc.labels.resize(static_cast<std::size_t>(n));
  sc.ids.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = i < n1 ? 1 : 0;
    Rng score_rng(config.seed, {kScoreStream, static_cast<std::uint64_t>(i)});
    for (int l = 0; l < config.k_true; ++l) sc.scores(i, l) = score_mean(y) + config.perturb_sd * score_rng.normal();
    char id[32];
    std::snprintf(id, sizeof(id), "s%04d", i + 1);
    sc.ids[static_cast<std::size_t>(i)] = id;
    sc.labels[static_cast<std::size_t>(i)] = y;
  }

  // Count calibration. The type-specific level rides on the perturbations as a
  // constant a added to every psi_l, so the type-1 vs type-0 offset is
  // a * (sum of scores) and the truths keep rank 1 + k_true. a and the common
  // level c solve: mean expected count of each type equals its target.
  const double vv = sc.grid.voxel_volume();
  VectorXd log_mass(n), score_sum(n);
  for (int i = 0; i < n; ++i) {
    const VectorXd log_shape = shared + sc.perturbations * sc.scores.row(i).transpose();
    const double top = log_shape.maxCoeff();
    log_mass(i) = top + std::log((log_shape.array() - top).exp().sum() * vv);
    score_sum(i) = sc.scores.row(i).sum();
  }
  // log of the mean over studies of type y of exp(a * score_sum + log_mass).
  auto log_mean_count = [&](int y, double a) {
    const int lo = y == 1 ? 0 : n1, hi = y == 1 ? n1 : n;
    const VectorXd e = a * score_sum.segment(lo, hi - lo) + log_mass.segment(lo, hi - lo);
    const double top = e.maxCoeff();
    return top + std::log((e.array() - top).exp().mean());
  };
  const double want = std::log(config.expected_count_type1 / config.expected_count_type0);
  auto gap = [&](double a) { return log_mean_count(1, a) - log_mean_count(0, a) - want; };
  double a = 0.0;
  double level[2] = {0.0, 0.0};  // c for types 0 and 1
  const bool both = n1 > 0 && n1 < n;
  if (both && config.k_true > 0 && config.type_shift != 0.0) {
    double lo = -20.0, hi = 20.0;
    if (gap(lo) > 0.0) std::swap(lo, hi);
    if (gap(lo) > 0.0 || gap(hi) < 0.0) throw Error("invalid_scenario", "type_shift cannot produce the per-type counts");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    a = 0.5 * (lo + hi);
    level[0] = level[1] = std::log(config.expected_count_type1) - log_mean_count(1, a);
  } else {
    // No score direction to carry the type offset: separate levels per type.
    if (n1 > 0) level[1] = std::log(config.expected_count_type1) - log_mean_count(1, 0.0);
    if (n1 < n) level[0] = std::log(config.expected_count_type0) - log_mean_count(0, 0.0);
  }
  sc.perturbations.array() += a;
  sc.group_log_mean.resize(V, 2);
  for (int t = 0; t < 2; ++t) {
    sc.group_log_mean.col(t) = (shared + score_mean(t) * sc.perturbations.rowwise().sum()).array() + level[t];
  }

  sc.truths.resize(V, n);
  sc.foci.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = sc.labels[static_cast<std::size_t>(i)];
    sc.truths.col(i) = ((shared + sc.perturbations * sc.scores.row(i).transpose()).array() + level[y]).exp().matrix();
    Rng foci_rng(config.seed, {kFociStream, static_cast<std::uint64_t>(i)});
    sc.foci[static_cast<std::size_t>(i)] = simulate_study(sc.truths.col(i), sc.grid, foci_rng);
  }
  return sc;
}

BasisSet scenario_basis(const VolumeGrid& grid, const ModelSettings& settings) {
  std::set<double> zs;
  for (Index v = 0; v < grid.masked_count(); ++v) zs.insert(grid.masked_centers()(v, 2));
  return build_basis(grid, default_kernel_layout(grid, std::vector<double>(zs.begin(), zs.end()), settings.nx, settings.ny),
                     settings.bandwidth);
}

std::vector<Study> scenario_studies(const Scenario& scenario, const BasisSet& basis) {
  std::vector<Study> out;
  out.reserve(scenario.ids.size());
  for (std::size_t i = 0; i < scenario.ids.size(); ++i) {
    out.push_back(make_study(scenario.ids[i], scenario.foci[i], basis, scenario.labels[i]));
  }
  return out;
}

double imse(const MatrixXd& truths, const MatrixXd& estimates, const VolumeGrid& grid) {
  if (truths.rows() != estimates.rows() || truths.cols() != estimates.cols()) {
    throw Error("dimension_mismatch", "truth and estimate shapes differ");
  }
  if (truths.rows() != grid.masked_count()) throw Error("dimension_mismatch", "maps must cover the masked voxels");
  if (truths.cols() == 0) throw Error("empty_input", "no studies");
  return (truths - estimates).squaredNorm() * grid.voxel_volume() / static_cast<double>(truths.cols());
}

MatrixXd best_constant_estimate(const MatrixXd& truths) {
  MatrixXd out(truths.rows(), truths.cols());
  for (Index i = 0; i < truths.cols(); ++i) out.col(i).setConstant(truths.col(i).mean());
  return out;
}

RocCurve roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw Error("dimension_mismatch", "one score per label required");
  const std::size_t n = labels.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("invalid_label", "labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw Error("invalid_score", "scores must be finite");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("single_class", "AUC needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tie-averaged ranks (1-based) in ascending score order.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) {
      if (labels[order[m]] == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  RocCurve roc;
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  roc.auc = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);

  // Descending sweep over distinct thresholds.
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t r = n; r > 0;) {
    const double s = scores[order[r - 1]];
    while (r > 0 && scores[order[r - 1]] == s) {
      (labels[order[r - 1]] == 1 ? tp : fp) += 1;
      --r;
    }
    roc.thresholds.push_back(s);
    roc.fpr.push_back(static_cast<double>(fp) / nn);
    roc.tpr.push_back(static_cast<double>(tp) / np);
  }
  return roc;
}

}  // namespace cbma
