#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "metaforge/generators.hpp"
#include "metaforge/voxel.hpp"

namespace metaforge {

/// Homogenized elastic constants of a unit.
struct ElasticProps {
  double E = 0.0;   // MPa
  double nu = 0.0;
  double G = 0.0;   // MPa
};

/// Macroscopic strain driving one periodic cell problem. Voigt order
/// [xx, yy, zz, yz, xz, xy] with engineering shear components.
struct LoadCase {
  std::array<double, 6> macro_strain{};

  static LoadCase uniaxial(int axis, double eps = 1.0);
  static LoadCase shear_xy(double gamma = 1.0);
};

struct SolverConfig {
  double cg_tolerance = 1e-8;    // relative residual
  int max_iterations = 0;        // 0 -> 10 * sqrt(n_dof)
  double soft_void_rel = 1e-9;   // void stiffness as a fraction of base E
};

/// Periodic fluctuation displacements (3 per voxel node, node (x,y,z) at
/// index (z*l+y)*l+x like VoxelGrid storage).
struct FieldSolution {
  std::vector<double> displacements;
  bool converged = false;
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Solve one cell problem with trilinear brick elements and matrix-free
/// Jacobi-preconditioned CG. An optional warm start (a solution of a nearby
/// problem) cuts the iteration count for repeated material draws.
FieldSolution solve_case(const VoxelGrid& grid, const MaterialSample& material,
                         const LoadCase& load, const SolverConfig& cfg = {},
                         const FieldSolution* warm_start = nullptr);

/// Everything the four cell problems (three axial, one shear) yield.
struct EffectiveDetail {
  ElasticProps props;                        // axis-averaged
  std::array<double, 3> youngs_by_axis{};    // E_x, E_y, E_z
  std::array<std::array<double, 3>, 3> normal_stiffness{};  // C_ab, a,b in {xx,yy,zz}
  double shear_stiffness = 0.0;              // C_xyxy
  int total_iterations = 0;
};

/// Reusable per-grid fields for repeated solves on the same structure.
struct WarmCache {
  std::array<FieldSolution, 4> cases{};
};

EffectiveDetail effective_detail(const VoxelGrid& grid, const MaterialSample& material,
                                 const SolverConfig& cfg = {}, WarmCache* warm = nullptr);

ElasticProps effective_properties(const VoxelGrid& grid, const MaterialSample& material,
                                  const SolverConfig& cfg = {});

/// K = E / (3(1-2nu)). Throws IncompressibleLimit when 1-2nu <= 1e-9.
double bulk_modulus(const ElasticProps& props);

struct AleatoricStudy {
  ElasticProps mean;
  ElasticProps stddev;  // sample std (n-1 denominator)
  int n = 0;
};

/// Empirical spread of the effective properties under material noise: run
/// effective_properties n times with Gaussian material draws (std =
/// std_factor * mean). n must be >= 2.
AleatoricStudy true_aleatoric_study(const VoxelGrid& grid, const MaterialSample& base,
                                    int n, std::uint64_t seed,
                                    const SolverConfig& cfg = {},
                                    double std_factor = 0.01);

/// One labeled dataset row (manifest row + homogenized labels).
struct LabeledRow {
  ManifestRow unit;
  double E_mean = 0.0, nu_mean = 0.0, G_mean = 0.0;
  double E_std = 0.0, nu_std = 0.0;
  bool ok = false;
  std::string error;
};

/// Label every manifest row with n-draw means and stds. Rows whose voxel file
/// fails to load or whose solve fails are returned with ok=false. Parallel
/// over rows (METAFORGE_THREADS caps the worker count).
std::vector<LabeledRow> label_manifest(const DatasetManifest& manifest,
                                       const std::filesystem::path& data_dir,
                                       const MaterialSample& base, int draws,
                                       std::uint64_t seed, const SolverConfig& cfg = {});

void write_labeled_csv(const std::filesystem::path& path,
                       const std::vector<LabeledRow>& rows,
                       const std::string& run_id = "");
std::vector<LabeledRow> read_labeled_csv(const std::filesystem::path& path);

}  // namespace metaforge
