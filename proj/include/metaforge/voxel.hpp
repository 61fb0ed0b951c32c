#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "metaforge/common.hpp"

namespace metaforge {

/// Cubic occupancy field for one metamaterial unit. Values live in [0, 1];
/// a grid with binary_flag set contains only exact 0s and 1s. Storage is
/// flat with z slowest and x fastest: index = (z * l + y) * l + x.
struct VoxelGrid {
  int edge_voxels = 0;
  std::vector<double> occupancy;
  bool binary_flag = false;

  VoxelGrid() = default;
  VoxelGrid(int edge, double fill, bool binary)
      : edge_voxels(edge),
        occupancy(static_cast<std::size_t>(edge) * edge * edge, fill),
        binary_flag(binary) {}

  std::size_t size() const { return occupancy.size(); }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * edge_voxels + y) * edge_voxels + x;
  }
  double& at(int x, int y, int z) { return occupancy[index(x, y, z)]; }
  double at(int x, int y, int z) const { return occupancy[index(x, y, z)]; }

  void validate() const;
};

/// One octant of a full unit (edge = l/2). Mirrored three times to build the
/// full cubic-symmetric cell.
struct EighthCell {
  int edge_voxels = 0;
  std::vector<double> occupancy;

  EighthCell() = default;
  EighthCell(int edge, double fill)
      : edge_voxels(edge),
        occupancy(static_cast<std::size_t>(edge) * edge * edge, fill) {}

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * edge_voxels + y) * edge_voxels + x;
  }
  double& at(int x, int y, int z) { return occupancy[index(x, y, z)]; }
  double at(int x, int y, int z) const { return occupancy[index(x, y, z)]; }
};

enum class Connectivity { Faces6 = 6, All26 = 26 };

/// Reflect an eighth cell across the three mid-planes into the full unit.
/// Output edge is twice the input edge.
VoxelGrid mirror_eighth(const EighthCell& eighth);

/// Extract the low-corner octant of a full grid (inverse of mirror_eighth for
/// symmetric grids).
EighthCell extract_octant(const VoxelGrid& grid);

/// Mean occupancy.
double volume_fraction(const VoxelGrid& grid);
double volume_fraction(const EighthCell& eighth);

/// Threshold to {0,1}. threshold must lie in (0, 1].
VoxelGrid binarize(const VoxelGrid& grid, double threshold = 0.5);

/// Keep only the largest connected solid component; adjacency wraps around
/// periodically. Returns the cleaned grid and the number of voxels removed.
/// Throws EmptyStructure when the grid has no solid voxel.
std::pair<VoxelGrid, std::int64_t> largest_component(
    const VoxelGrid& grid, Connectivity conn = Connectivity::Faces6);

/// True when the grid equals its reflection along each of the three axes.
bool is_mirror_symmetric(const VoxelGrid& grid, double tol = 0.0);

}  // namespace metaforge
