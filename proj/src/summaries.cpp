#include "cbma/summaries.hpp"

#include <cmath>

namespace cbma {

namespace {

void require_theta(const ChainOutput& chain) {
  if (chain.draws.empty()) throw Error("empty_chain", "chain has no retained draws");
  for (const Draw& d : chain.draws) {
    if (d.theta.size() == 0) throw Error("missing_theta", "chain was run without recording theta");
  }
}

VectorXd group_theta(const MatrixXd& theta, const std::vector<Index>& group) {
  if (group.empty()) throw Error("empty_group", "group has no studies");
  VectorXd sum = VectorXd::Zero(theta.rows());
  for (Index i : group) {
    if (i < 0 || i >= theta.cols()) throw Error("invalid_group", "study index out of range");
    sum += theta.col(i);
  }
  return sum / static_cast<double>(group.size());
}

}  // namespace

GroupIntensity group_mean_intensity(const ChainOutput& chain, const std::vector<Index>& group, const BasisSet& basis) {
  require_theta(chain);
  const Index S = static_cast<Index>(chain.draws.size());
  GroupIntensity out;
  out.per_draw.resize(basis.voxel_design.rows(), S);
  for (Index s = 0; s < S; ++s) {
    out.per_draw.col(s) = intensity_map(basis, group_theta(chain.draws[static_cast<std::size_t>(s)].theta, group));
  }
  out.mean = out.per_draw.rowwise().mean();
  return out;
}

DifferenceMaps difference_maps(const ChainOutput& chain, const std::vector<Index>& group_a,
                               const std::vector<Index>& group_b, const BasisSet& basis) {
  const MatrixXd d = group_mean_intensity(chain, group_a, basis).per_draw -
                     group_mean_intensity(chain, group_b, basis).per_draw;
  const Index V = d.rows();
  const double S = static_cast<double>(d.cols());
  DifferenceMaps out;
  out.mean = d.rowwise().mean();
  out.sd.resize(V);
  out.standardized.resize(V);
  out.zero_sd.assign(static_cast<std::size_t>(V), 0);
  for (Index v = 0; v < V; ++v) {
    const double ss = (d.row(v).array() - out.mean(v)).square().sum();
    out.sd(v) = S > 1 ? std::sqrt(ss / (S - 1)) : 0.0;
    if (out.sd(v) > 0.0) {
      out.standardized(v) = out.mean(v) / out.sd(v);
    } else {
      out.standardized(v) = 0.0;
      out.zero_sd[static_cast<std::size_t>(v)] = 1;
    }
  }
  return out;
}

MatrixXd study_intensity_draws(const ChainOutput& chain, Index study, const BasisSet& basis) {
  require_theta(chain);
  const Index S = static_cast<Index>(chain.draws.size());
  MatrixXd out(basis.voxel_design.rows(), S);
  for (Index s = 0; s < S; ++s) {
    const MatrixXd& theta = chain.draws[static_cast<std::size_t>(s)].theta;
    if (study < 0 || study >= theta.cols()) throw Error("invalid_group", "study index out of range");
    out.col(s) = intensity_map(basis, theta.col(study));
  }
  return out;
}

MatrixXd posterior_mean_intensities(const ChainOutput& chain, const BasisSet& basis) {
  require_theta(chain);
  const Index n = chain.draws.front().theta.cols();
  MatrixXd out = MatrixXd::Zero(basis.voxel_design.rows(), n);
  for (const Draw& d : chain.draws) out += (basis.voxel_design * d.theta).array().exp().matrix();
  return out / static_cast<double>(chain.draws.size());
}

MatrixXd mean_dictionary(const ChainOutput& chain, const BasisSet& basis) {
  if (chain.draws.empty()) throw Error("empty_chain", "chain has no retained draws");
  const Index k = chain.draws.front().k;
  MatrixXd sum = MatrixXd::Zero(basis.voxel_design.rows(), k);
  for (const Draw& d : chain.draws) {
    if (d.k != k) throw Error("rank_changed", "retained draws differ in k");
    sum += basis.voxel_design * d.lambda;
  }
  return sum / static_cast<double>(chain.draws.size());
}

TraceSummary summarize_trace(const std::string& name, const std::vector<double>& trace) {
  TraceSummary t;
  t.name = name;
  t.n = static_cast<long>(trace.size());
  if (trace.empty()) return t;
  const Eigen::Map<const VectorXd> x(trace.data(), static_cast<Index>(trace.size()));
  t.mean = x.mean();
  t.sd = t.n > 1 ? std::sqrt((x.array() - t.mean).square().sum() / static_cast<double>(t.n - 1)) : 0.0;

  const long batches = static_cast<long>(std::floor(std::sqrt(static_cast<double>(t.n))));
  const long size = batches > 0 ? t.n / batches : 0;
  if (batches < 2 || size < 1) {
    t.mcse = t.n > 0 ? t.sd / std::sqrt(static_cast<double>(t.n)) : 0.0;
    return t;
  }
  const long skip = t.n - batches * size;
  VectorXd means(batches);
  for (long b = 0; b < batches; ++b) means(b) = x.segment(skip + b * size, size).mean();
  const double m = means.mean();
  const double var = (means.array() - m).square().sum() / static_cast<double>(batches - 1);
  t.mcse = std::sqrt(var / static_cast<double>(batches));
  return t;
}

Diagnostics diagnostics(const ChainOutput& chain) {
  Diagnostics d;
  d.k_trace = chain.k_trace;
  d.accept_trace = chain.accept_rate;
  const long burn = std::min<long>(chain.config.burn_in, static_cast<long>(chain.accept_rate.size()));
  double a_burn = 0.0, a_samp = 0.0;
  for (long t = 0; t < static_cast<long>(chain.accept_rate.size()); ++t) {
    (t < burn ? a_burn : a_samp) += chain.accept_rate[static_cast<std::size_t>(t)];
  }
  const long n_samp = static_cast<long>(chain.accept_rate.size()) - burn;
  d.mean_accept_burn_in = burn > 0 ? a_burn / static_cast<double>(burn) : 0.0;
  d.mean_accept_sampling = n_samp > 0 ? a_samp / static_cast<double>(n_samp) : 0.0;
  for (long v : chain.divergences) d.total_divergences += v;

  std::vector<double> alpha, k, log_sigma2, theta_intercept;
  for (const Draw& draw : chain.draws) {
    alpha.push_back(draw.alpha);
    k.push_back(static_cast<double>(draw.k));
    log_sigma2.push_back(draw.sigma2.array().log().mean());
    if (draw.theta.size() > 0) theta_intercept.push_back(draw.theta.row(0).mean());
  }
  d.scalars.push_back(summarize_trace("alpha", alpha));
  d.scalars.push_back(summarize_trace("k", k));
  d.scalars.push_back(summarize_trace("mean_log_sigma2", log_sigma2));
  if (!theta_intercept.empty()) d.scalars.push_back(summarize_trace("mean_theta_intercept", theta_intercept));
  return d;
}

ChainComparison compare_chains(const std::vector<const ChainOutput*>& chains, const std::vector<Index>& voxels,
                               const BasisSet& basis) {
  ChainComparison out;
  const Index C = static_cast<Index>(chains.size());
  const Index m = static_cast<Index>(voxels.size());
  out.mean_intensity.resize(C, m);
  for (Index c = 0; c < C; ++c) {
    const ChainOutput& chain = *chains[static_cast<std::size_t>(c)];
    require_theta(chain);
    std::vector<Index> all(static_cast<std::size_t>(chain.draws.front().theta.cols()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
    const VectorXd mean = group_mean_intensity(chain, all, basis).mean;
    for (Index j = 0; j < m; ++j) {
      const Index v = voxels[static_cast<std::size_t>(j)];
      if (v < 0 || v >= mean.size()) throw Error("invalid_voxel", "voxel position out of range");
      out.mean_intensity(c, j) = mean(v);
    }
  }
  out.relative_spread.resize(m);
  for (Index j = 0; j < m; ++j) {
    const auto col = out.mean_intensity.col(j);
    const double mu = C > 0 ? col.mean() : 0.0;
    out.relative_spread(j) = C > 0 && mu != 0.0 ? (col.maxCoeff() - col.minCoeff()) / mu : 0.0;
  }
  return out;
}

}  // namespace cbma
