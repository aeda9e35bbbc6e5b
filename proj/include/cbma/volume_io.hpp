#pragma once

#include "cbma/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cbma {

// Volumes are stored as <base>.raw (little-endian samples, x fastest, then
// y, z, then volume) next to a <base>.json sidecar with the lattice, dtype
// and names. Masks use the same layout with uint8 samples.

/// Accepts "<base>", "<base>.json" or "<base>.raw" and returns <base>.
std::string volume_base(const std::string& path);

void save_mask(const std::string& path, const VolumeGrid& grid);
VolumeGrid load_mask(const std::string& path);

struct PngSlices {
  std::vector<int> slices;  // axial indices k
  double vmin = 0.0;
  double vmax = 1.0;
};

struct VolumeWriteOptions {
  std::string value_name = "value";
  std::string dtype = "float32";  // or "float64"
  std::vector<std::string> volume_names;  // one per column, optional
  std::optional<PngSlices> png;
};

/// Writes the V x m masked values as m full volumes (0 outside the mask).
/// With png set, also writes <base>_<volume>_z<k>.png per requested slice.
void save_volumes(const std::string& path, const VolumeGrid& grid, const MatrixXd& masked_values,
                  const VolumeWriteOptions& options = {});

struct LoadedVolumes {
  Dims dims{1, 1, 1};
  Vec3 voxel_size = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::string value_name;
  std::string dtype;
  std::vector<std::string> volume_names;
  MatrixXd values;  // total_voxels x m
};

LoadedVolumes load_volumes(const std::string& path);

/// Rows of `values` at the grid's masked voxels; the lattice must match.
MatrixXd masked_values(const VolumeGrid& grid, const LoadedVolumes& volumes);

/// 8-bit grayscale rendering of axial slice k: vmin -> 0, vmax -> 255,
/// clamped; unmasked voxels are 0. Rows run from high y to low y.
void write_png_slice(const std::string& path, const VolumeGrid& grid, const VectorXd& masked, int k, double vmin,
                     double vmax);

}  // namespace cbma
