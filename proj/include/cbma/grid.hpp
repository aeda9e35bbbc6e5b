#pragma once

#include "cbma/types.hpp"

#include <optional>
#include <vector>

namespace cbma {

/// Rectangular voxel lattice with a boolean inclusion mask.
///
/// Voxels are stored x-fastest: linear = x + nx * (y + ny * z). The world
/// coordinate of voxel (i, j, k) is origin + (i, j, k) * voxel_size (voxel
/// centers). The masked voxels, in ascending linear order, form the
/// integration domain; everything downstream indexes them 0..V-1.
class VolumeGrid {
 public:
  VolumeGrid() = default;

  const Dims& dims() const { return dims_; }
  const Vec3& voxel_size() const { return voxel_size_; }
  const Vec3& origin() const { return origin_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  double voxel_volume() const { return voxel_volume_; }

  Index total_voxels() const { return static_cast<Index>(mask_.size()); }
  /// Number of masked voxels V.
  Index masked_count() const { return static_cast<Index>(masked_linear_.size()); }
  /// |B| = V * voxel_volume.
  double domain_measure() const { return static_cast<double>(masked_count()) * voxel_volume_; }

  /// Masked voxel centers, V x 3.
  const PointsXd& masked_centers() const { return masked_centers_; }
  const std::vector<Index>& masked_linear() const { return masked_linear_; }

  Index linear_index(int i, int j, int k) const {
    return static_cast<Index>(i) + static_cast<Index>(dims_[0]) * (j + static_cast<Index>(dims_[1]) * k);
  }
  std::array<int, 3> ijk(Index linear) const;
  bool in_lattice(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  Vec3 world(int i, int j, int k) const;
  /// Nearest lattice index (rounded). May be out of the lattice.
  std::array<int, 3> nearest_ijk(const Vec3& world) const;

  /// Masked position (0..V-1) of a linear voxel index, or -1 when unmasked.
  Index masked_position(Index linear) const { return masked_lookup_[static_cast<std::size_t>(linear)]; }

  /// Axis-aligned bounding box of the lattice including the half voxel
  /// around the outermost centers.
  bool in_bounding_box(const Vec3& world) const;

  friend VolumeGrid build_grid(const Dims&, const Vec3&, const Vec3&, std::vector<std::uint8_t>);

 private:
  Dims dims_{1, 1, 1};
  Vec3 voxel_size_ = Vec3::Ones();
  Vec3 origin_ = Vec3::Zero();
  std::vector<std::uint8_t> mask_;
  double voxel_volume_ = 1.0;
  std::vector<Index> masked_linear_;
  std::vector<Index> masked_lookup_;
  PointsXd masked_centers_;
};

/// Throws Error("empty_domain") for an all-false mask and
/// Error("invalid_grid") on shape or size violations.
VolumeGrid build_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin,
                      std::vector<std::uint8_t> mask);

/// Full rectangular mask.
VolumeGrid box_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin);

/// Axial ellipse inscribed in the (x, y) extent of every slice. Used as a
/// brain-like slice mask by the synthetic scenarios.
VolumeGrid ellipse_grid(const Dims& dims, const Vec3& voxel_size, const Vec3& origin);

struct SnapResult {
  Vec3 position;     // voxel center
  Index masked = -1;  // position in 0..V-1
  bool moved_off_mask = false;
};

/// Snaps a focus to the nearest voxel center; a focus landing outside the
/// mask moves to the nearest masked center. Throws Error("focus_out_of_bounds")
/// when the point is outside the lattice bounding box.
SnapResult snap_focus(const VolumeGrid& grid, const Vec3& world);

}  // namespace cbma
