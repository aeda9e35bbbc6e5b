#include "cbma/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cbma {

MatrixXd design_matrix(const BasisSet& basis, const PointsXd& points) {
  const Index n = points.rows();
  MatrixXd d(n, basis.p());
  d.col(0).setOnes();
  for (Index m = 0; m < basis.centers.rows(); ++m) {
    const auto diff = points.rowwise() - basis.centers.row(m);
    d.col(m + 1) = (-basis.bandwidth * diff.rowwise().squaredNorm()).array().exp();
  }
  return d;
}

PointsXd default_kernel_layout(const VolumeGrid& grid, const std::vector<double>& z_slices, int nx, int ny) {
  if (nx < 1 || ny < 1) throw Error("invalid_layout", "kernel lattice needs nx, ny >= 1");
  if (z_slices.empty()) throw Error("invalid_layout", "kernel layout needs at least one z slice");

  std::vector<Vec3> out;
  const auto& dims = grid.dims();
  for (double z : z_slices) {
    const int k = static_cast<int>(std::lround((z - grid.origin().z()) / grid.voxel_size().z()));
    if (k < 0 || k >= dims[2]) continue;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    bool any = false;
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        if (grid.masked_position(grid.linear_index(i, j, k)) < 0) continue;
        const Vec3 c = grid.world(i, j, k);
        xmin = std::min(xmin, c.x());
        xmax = std::max(xmax, c.x());
        ymin = std::min(ymin, c.y());
        ymax = std::max(ymax, c.y());
        any = true;
      }
    }
    if (!any) continue;

    auto lattice = [](double lo, double hi, int n, int a) {
      return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * a / (n - 1);
    };
    for (int a = 0; a < nx; ++a) {
      for (int b = 0; b < ny; ++b) {
        const Vec3 c(lattice(xmin, xmax, nx, a), lattice(ymin, ymax, ny, b), z);
        const auto idx = grid.nearest_ijk(c);
        if (!grid.in_lattice(idx[0], idx[1], idx[2])) continue;
        if (grid.masked_position(grid.linear_index(idx[0], idx[1], idx[2])) < 0) continue;
        out.push_back(c);
      }
    }
  }

  PointsXd centers(static_cast<Index>(out.size()), 3);
  for (std::size_t m = 0; m < out.size(); ++m) centers.row(static_cast<Index>(m)) = out[m].transpose();
  return centers;
}

BasisSet build_basis(const VolumeGrid& grid, const PointsXd& centers, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error("invalid_bandwidth", "kernel bandwidth must be positive");
  }
  BasisSet basis;
  basis.centers = centers;
  basis.bandwidth = bandwidth;
  basis.voxel_design = design_matrix(basis, grid.masked_centers());
  for (Index m = 1; m < basis.p(); ++m) {
    if (basis.voxel_design.col(m).maxCoeff() < 1e-12) {
      std::ostringstream msg;
      msg << "kernel outside domain: kernel " << m << " at (" << centers.row(m - 1)
          << ") has no support on the mask";
      throw Error("kernel_outside_domain", msg.str());
    }
  }
  return basis;
}

VectorXd eval_log_intensity(const BasisSet& basis, const VectorXd& theta, const PointsXd& points) {
  if (theta.size() != basis.p()) throw Error("dimension_mismatch", "theta length differs from basis size p");
  return design_matrix(basis, points) * theta;
}

namespace {

double checked_exp_sum(const VectorXd& log_mu) {
  const double top = log_mu.maxCoeff();
  if (!(top <= kMaxLogIntensity)) {
    std::ostringstream msg;
    msg << "intensity overflow: max log-intensity " << top;
    throw Error("intensity_overflow", msg.str());
  }
  return log_mu.array().exp().sum();
}

}  // namespace

double intensity_integral(const BasisSet& basis, const VectorXd& theta, const VolumeGrid& grid) {
  if (theta.size() != basis.p()) throw Error("dimension_mismatch", "theta length differs from basis size p");
  const VectorXd log_mu = basis.voxel_design * theta;
  return checked_exp_sum(log_mu) * grid.voxel_volume();
}

double intensity_integral_refined(const BasisSet& basis, const VectorXd& theta, const VolumeGrid& grid,
                                  int refine) {
  if (theta.size() != basis.p()) throw Error("dimension_mismatch", "theta length differs from basis size p");
  if (refine < 1) throw Error("invalid_argument", "refinement factor must be >= 1");
  const bool planar = grid.dims()[2] == 1;
  const int rz = planar ? 1 : refine;
  const Vec3& h = grid.voxel_size();

  std::vector<Vec3> offsets;
  for (int a = 0; a < refine; ++a) {
    for (int b = 0; b < refine; ++b) {
      for (int c = 0; c < rz; ++c) {
        const Vec3 frac((a + 0.5) / refine - 0.5, (b + 0.5) / refine - 0.5, planar ? 0.0 : (c + 0.5) / rz - 0.5);
        offsets.push_back(frac.cwiseProduct(h));
      }
    }
  }

  const PointsXd& centers = grid.masked_centers();
  double total = 0.0;
  for (const Vec3& off : offsets) {
    PointsXd pts = centers.rowwise() + off.transpose();
    total += checked_exp_sum(design_matrix(basis, pts) * theta);
  }
  return total * grid.voxel_volume() / static_cast<double>(offsets.size());
}

}  // namespace cbma
