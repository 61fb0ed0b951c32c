#include "metaforge/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace metaforge {

void VoxelGrid::validate() const {
  if (edge_voxels <= 0) throw InvalidArgument("edge_voxels must be positive");
  if (occupancy.size() != static_cast<std::size_t>(edge_voxels) * edge_voxels * edge_voxels)
    throw ShapeMismatch("occupancy length does not match edge_voxels^3");
  for (double v : occupancy) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("occupancy outside [0,1]");
    if (binary_flag && v != 0.0 && v != 1.0)
      throw InvalidArgument("binary_flag set but value not in {0,1}");
  }
}

VoxelGrid mirror_eighth(const EighthCell& eighth) {
  const int h = eighth.edge_voxels;
  if (h <= 0) throw InvalidArgument("eighth cell is empty");
  const int l = 2 * h;
  VoxelGrid out(l, 0.0, true);
  auto fold = [h](int i) { return i < h ? i : 2 * h - 1 - i; };
  bool binary = true;
  for (int z = 0; z < l; ++z)
    for (int y = 0; y < l; ++y)
      for (int x = 0; x < l; ++x) {
        const double v = eighth.at(fold(x), fold(y), fold(z));
        out.at(x, y, z) = v;
        if (v != 0.0 && v != 1.0) binary = false;
      }
  out.binary_flag = binary;
  return out;
}

EighthCell extract_octant(const VoxelGrid& grid) {
  if (grid.edge_voxels % 2 != 0)
    throw InvalidArgument("octant extraction needs an even edge");
  const int h = grid.edge_voxels / 2;
  EighthCell out(h, 0.0);
  for (int z = 0; z < h; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) out.at(x, y, z) = grid.at(x, y, z);
  return out;
}

double volume_fraction(const VoxelGrid& grid) {
  if (grid.occupancy.empty()) throw InvalidArgument("empty grid");
  const double sum = std::accumulate(grid.occupancy.begin(), grid.occupancy.end(), 0.0);
  return sum / static_cast<double>(grid.occupancy.size());
}

double volume_fraction(const EighthCell& eighth) {
  if (eighth.occupancy.empty()) throw InvalidArgument("empty eighth cell");
  const double sum = std::accumulate(eighth.occupancy.begin(), eighth.occupancy.end(), 0.0);
  return sum / static_cast<double>(eighth.occupancy.size());
}

VoxelGrid binarize(const VoxelGrid& grid, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw InvalidArgument("threshold must lie in (0,1]");
  VoxelGrid out = grid;
  for (double& v : out.occupancy) v = v >= threshold ? 1.0 : 0.0;
  out.binary_flag = true;
  return out;
}

namespace {

// Face neighbors first so the 6-connectivity case reads the same table.
constexpr int kOffsets26[26][3] = {
    {1, 0, 0},  {-1, 0, 0}, {0, 1, 0},  {0, -1, 0}, {0, 0, 1},  {0, 0, -1},
    {1, 1, 0},  {1, -1, 0}, {-1, 1, 0}, {-1, -1, 0}, {1, 0, 1},  {1, 0, -1},
    {-1, 0, 1}, {-1, 0, -1}, {0, 1, 1},  {0, 1, -1}, {0, -1, 1}, {0, -1, -1},
    {1, 1, 1},  {1, 1, -1}, {1, -1, 1}, {1, -1, -1}, {-1, 1, 1}, {-1, 1, -1},
    {-1, -1, 1}, {-1, -1, -1}};

}  // namespace

std::pair<VoxelGrid, std::int64_t> largest_component(const VoxelGrid& grid,
                                                     Connectivity conn) {
  if (!grid.binary_flag) throw InvalidArgument("largest_component needs a binary grid");
  const int l = grid.edge_voxels;
  const std::size_t n = grid.size();
  const int n_neighbors = conn == Connectivity::Faces6 ? 6 : 26;

  std::vector<std::int32_t> label(n, -1);
  std::int64_t total_solid = 0;
  std::int32_t best_label = -1;
  std::int64_t best_size = 0;
  std::int32_t next_label = 0;
  std::vector<std::size_t> stack;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (grid.occupancy[seed] == 0.0) continue;
    ++total_solid;
    if (label[seed] != -1) continue;
    // flood fill with periodic wrap
    std::int64_t comp_size = 0;
    label[seed] = next_label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++comp_size;
      const int x = static_cast<int>(cur % l);
      const int y = static_cast<int>((cur / l) % l);
      const int z = static_cast<int>(cur / (static_cast<std::size_t>(l) * l));
      for (int k = 0; k < n_neighbors; ++k) {
        const int nx = (x + kOffsets26[k][0] + l) % l;
        const int ny = (y + kOffsets26[k][1] + l) % l;
        const int nz = (z + kOffsets26[k][2] + l) % l;
        const std::size_t ni = grid.index(nx, ny, nz);
        if (grid.occupancy[ni] != 0.0 && label[ni] == -1) {
          label[ni] = next_label;
          stack.push_back(ni);
        }
      }
    }
    if (comp_size > best_size) {
      best_size = comp_size;
      best_label = next_label;
    }
    ++next_label;
  }

  if (total_solid == 0) throw EmptyStructure("no solid voxel");

  VoxelGrid out(l, 0.0, true);
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] == best_label) out.occupancy[i] = 1.0;
  return {out, total_solid - best_size};
}

bool is_mirror_symmetric(const VoxelGrid& grid, double tol) {
  const int l = grid.edge_voxels;
  for (int z = 0; z < l; ++z)
    for (int y = 0; y < l; ++y)
      for (int x = 0; x < l; ++x) {
        const double v = grid.at(x, y, z);
        if (std::abs(v - grid.at(l - 1 - x, y, z)) > tol) return false;
        if (std::abs(v - grid.at(x, l - 1 - y, z)) > tol) return false;
        if (std::abs(v - grid.at(x, y, l - 1 - z)) > tol) return false;
      }
  return true;
}

}  // namespace metaforge
