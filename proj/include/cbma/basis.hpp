#pragma once

#include "cbma/grid.hpp"

#include <vector>

namespace cbma {

/// Constant basis plus isotropic Gaussian kernels exp(-b ||v - c||^2),
/// with the design matrix over masked voxel centers precomputed.
///
/// Column 0 of every design matrix is the constant basis; column m >= 1 is
/// the kernel centered at centers.row(m - 1). The bandwidth b is in mm^-2.
struct BasisSet {
  PointsXd centers;      // (p - 1) x 3
  double bandwidth = 0;  // mm^-2
  MatrixXd voxel_design;  // V x p

  Index p() const { return centers.rows() + 1; }
};

/// Single Gaussian kernel value at squared distance d2.
template <typename Scalar>
inline Scalar gaussian_kernel(Scalar bandwidth, Scalar d2) {
  using std::exp;
  return exp(-bandwidth * d2);
}

/// Basis row b(x)^T for one point; works on any 3-vector expression.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> basis_row(const BasisSet& basis,
                                                                     const Eigen::MatrixBase<Derived>& point) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row(basis.p());
  row(0) = Scalar(1);
  for (Index m = 0; m < basis.centers.rows(); ++m) {
    const Scalar d2 = (point.transpose() - basis.centers.row(m).template cast<Scalar>()).squaredNorm();
    row(m + 1) = gaussian_kernel<Scalar>(Scalar(basis.bandwidth), d2);
  }
  return row;
}

/// Design matrix (n x p) for arbitrary points.
MatrixXd design_matrix(const BasisSet& basis, const PointsXd& points);

/// Kernel centers on axial slices: an nx x ny equally spaced lattice over
/// the (x, y) bounding box of the masked voxel centers of each slice.
/// Centers whose nearest voxel is unmasked are dropped, as are slices that
/// miss the lattice or have no masked voxels.
PointsXd default_kernel_layout(const VolumeGrid& grid, const std::vector<double>& z_slices, int nx, int ny);

/// Throws Error("invalid_bandwidth") for b <= 0 and Error("kernel_outside_domain")
/// for a kernel whose values at every masked voxel are below 1e-12.
BasisSet build_basis(const VolumeGrid& grid, const PointsXd& centers, double bandwidth);

/// log-intensity b(x)^T theta at every point.
VectorXd eval_log_intensity(const BasisSet& basis, const VectorXd& theta, const PointsXd& points);

/// M(B; theta) = sum over masked voxels of exp(b(v)^T theta) * voxel_volume.
/// Throws Error("intensity_overflow") reporting the max log-intensity.
double intensity_integral(const BasisSet& basis, const VectorXd& theta, const VolumeGrid& grid);

/// Same integral with every voxel split into refine^d sub-voxels (d = 2 for
/// single-slice grids, 3 otherwise). Validation only; the sampler always
/// uses the voxel-center rule.
double intensity_integral_refined(const BasisSet& basis, const VectorXd& theta, const VolumeGrid& grid,
                                  int refine);

/// Largest log-intensity accepted before exp() is treated as overflow.
inline constexpr double kMaxLogIntensity = 700.0;

}  // namespace cbma
