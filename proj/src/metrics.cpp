#include "metaforge/metrics.hpp"

#include <cmath>

namespace metaforge {

double recon_accuracy(const VoxelGrid& original, const VoxelGrid& reconstruction) {
  if (original.edge_voxels != reconstruction.edge_voxels)
    throw ShapeMismatch("recon_accuracy grids differ in edge");
  double mismatch = 0.0;
  for (std::size_t i = 0; i < original.occupancy.size(); ++i)
    mismatch += std::abs(original.occupancy[i] - reconstruction.occupancy[i]);
  return 1.0 - mismatch / static_cast<double>(original.occupancy.size());
}

double recon_accuracy(const std::vector<VoxelGrid>& originals,
                      const std::vector<VoxelGrid>& reconstructions) {
  if (originals.size() != reconstructions.size() || originals.empty())
    throw ShapeMismatch("recon_accuracy batch sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < originals.size(); ++i)
    acc += recon_accuracy(originals[i], reconstructions[i]);
  return acc / static_cast<double>(originals.size());
}

double r_squared(const std::vector<double>& truth,
                 const std::vector<double>& predictions) {
  if (truth.size() != predictions.size() || truth.size() < 2)
    throw ShapeMismatch("r_squared needs paired series of length >= 2");
  double mean = 0.0;
  for (double y : truth) mean += y;
  mean /= static_cast<double>(truth.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (truth[i] - predictions[i]) * (truth[i] - predictions[i]);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  if (sst == 0.0) throw ConstantTruth("truth series has zero variance");
  return 1.0 - sse / sst;
}

double nrmse(const std::vector<double>& truth, const std::vector<double>& predictions,
             double range_min, double range_max) {
  if (truth.size() != predictions.size() || truth.empty())
    throw ShapeMismatch("nrmse needs paired series");
  if (!(range_max > range_min)) throw ZeroRange();
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    acc += (predictions[i] - truth[i]) * (predictions[i] - truth[i]);
  return std::sqrt(acc / static_cast<double>(truth.size())) / (range_max - range_min);
}

double relative_voxel_difference(const VoxelGrid& original,
                                 const std::vector<VoxelGrid>& generated) {
  if (generated.empty()) throw ShapeMismatch("no generated grids");
  double solid = 0.0;
  for (double v : original.occupancy) solid += v;
  if (solid == 0.0) throw EmptyStructure("original has no solid voxel");
  double acc = 0.0;
  for (const auto& g : generated) {
    if (g.edge_voxels != original.edge_voxels)
      throw ShapeMismatch("generated grid edge differs");
    double diff = 0.0;
    for (std::size_t i = 0; i < original.occupancy.size(); ++i)
      diff += std::abs(original.occupancy[i] - g.occupancy[i]);
    acc += diff / solid;
  }
  return acc / static_cast<double>(generated.size());
}

double coefficient_of_variation(const std::vector<double>& values) {
  if (values.size() < 2) throw ShapeMismatch("coefficient_of_variation needs >= 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (mean == 0.0) throw ZeroMean();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size() - 1);
  return 100.0 * std::sqrt(var) / std::abs(mean);
}

}  // namespace metaforge
