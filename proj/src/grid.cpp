#include "cbma/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbma {

std::array<int, 3> VolumeGrid::ijk(Index linear) const {
  const Index nx = dims_[0];
  const Index ny = dims_[1];
  return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny),
          static_cast<int>(linear / (nx * ny))};
}

Vec3 VolumeGrid::world(int i, int j, int k) const {
  return origin_ + Vec3(i, j, k).cwiseProduct(voxel_size_);
}

std::array<int, 3> VolumeGrid::nearest_ijk(const Vec3& w) const {
  const Vec3 rel = (w - origin_).cwiseQuotient(voxel_size_);
  return {static_cast<int>(std::lround(rel.x())), static_cast<int>(std::lround(rel.y())),
          static_cast<int>(std::lround(rel.z()))};
}

bool VolumeGrid::in_bounding_box(const Vec3& w) const {
  for (int a = 0; a < 3; ++a) {
    const double lo = origin_[a] - 0.5 * voxel_size_[a];
    const double hi = origin_[a] + (dims_[a] - 0.5) * voxel_size_[a];
    if (!(w[a] >= lo && w[a] <= hi)) return false;
  }
  return true;
}

VolumeGrid build_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin,
                      std::vector<std::uint8_t> mask) {
  for (int d : dims) {
    if (d < 1) throw Error("invalid_grid", "grid dims must be positive");
  }
  if ((voxel_size.array() <= 0.0).any() || !voxel_size.allFinite()) {
    throw Error("invalid_grid", "voxel size must be positive");
  }
  const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (mask.size() != total) throw Error("invalid_grid", "mask shape does not match dims");

  VolumeGrid g;
  g.dims_ = dims;
  g.voxel_size_ = voxel_size;
  g.origin_ = origin;
  g.voxel_volume_ = voxel_size.prod();
  g.mask_ = std::move(mask);
  g.masked_lookup_.assign(total, -1);
  for (std::size_t l = 0; l < total; ++l) {
    if (g.mask_[l]) {
      g.mask_[l] = 1;
      g.masked_lookup_[l] = static_cast<Index>(g.masked_linear_.size());
      g.masked_linear_.push_back(static_cast<Index>(l));
    }
  }
  if (g.masked_linear_.empty()) throw Error("empty_domain", "empty domain: mask has no voxels");

  g.masked_centers_.resize(g.masked_count(), 3);
  for (Index v = 0; v < g.masked_count(); ++v) {
    const auto c = g.ijk(g.masked_linear_[static_cast<std::size_t>(v)]);
    g.masked_centers_.row(v) = g.world(c[0], c[1], c[2]).transpose();
  }
  return g;
}

VolumeGrid box_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin) {
  const std::size_t total = static_cast<std::size_t>(std::max(dims[0], 0)) * std::max(dims[1], 0) *
                            std::max(dims[2], 0);
  return build_grid(dims, voxel_size, origin, std::vector<std::uint8_t>(total, 1));
}

VolumeGrid ellipse_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin) {
  const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<std::uint8_t> mask(total, 0);
  const double cx = 0.5 * (dims[0] - 1);
  const double cy = 0.5 * (dims[1] - 1);
  const double rx = 0.5 * dims[0];
  const double ry = 0.5 * dims[1];
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const double u = (i - cx) / rx;
        const double v = (j - cy) / ry;
        if (u * u + v * v <= 1.0) {
          mask[static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k)] = 1;
        }
      }
    }
  }
  return build_grid(dims, voxel_size, origin, std::move(mask));
}

SnapResult snap_focus(const VolumeGrid& grid, const Vec3& w) {
  if (!w.allFinite() || !grid.in_bounding_box(w)) {
    throw Error("focus_out_of_bounds", "focus outside the grid bounding box");
  }
  auto c = grid.nearest_ijk(w);
  for (int a = 0; a < 3; ++a) c[a] = std::clamp(c[a], 0, grid.dims()[a] - 1);
  const Index lin = grid.linear_index(c[0], c[1], c[2]);
  SnapResult r;
  r.masked = grid.masked_position(lin);
  if (r.masked >= 0) {
    r.position = grid.world(c[0], c[1], c[2]);
    return r;
  }
  // Off-mask: nearest masked center by Euclidean distance, ties to lowest index.
  const PointsXd& centers = grid.masked_centers();
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index v = 0; v < centers.rows(); ++v) {
    const double d = (centers.row(v).transpose() - w).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  r.masked = best;
  r.position = centers.row(best).transpose();
  r.moved_off_mask = true;
  return r;
}

}  // namespace cbma
