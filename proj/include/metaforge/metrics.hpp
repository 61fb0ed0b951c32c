#pragma once

#include <string>
#include <vector>

#include "metaforge/voxel.hpp"

namespace metaforge {

struct MetricReport {
  std::string name;
  double value = 0.0;
  int n_samples = 0;
};

/// Fraction of matching voxels over paired binary grids (1 = identical).
double recon_accuracy(const std::vector<VoxelGrid>& originals,
                      const std::vector<VoxelGrid>& reconstructions);
double recon_accuracy(const VoxelGrid& original, const VoxelGrid& reconstruction);

/// 1 - SSE/SST. Throws ConstantTruth when the truth has no variance.
double r_squared(const std::vector<double>& truth, const std::vector<double>& predictions);

/// RMSE / (range_max - range_min); the range is taken over the union of the
/// train and validation labels by the callers.
double nrmse(const std::vector<double>& truth, const std::vector<double>& predictions,
             double range_min, double range_max);

/// Mean over generated grids of sum|O - R| / (solid voxels of O).
double relative_voxel_difference(const VoxelGrid& original,
                                 const std::vector<VoxelGrid>& generated);

/// 100 * sample std / |mean| (percent). Throws ZeroMean.
double coefficient_of_variation(const std::vector<double>& values);

}  // namespace metaforge
