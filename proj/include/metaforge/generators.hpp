#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "metaforge/rng.hpp"
#include "metaforge/voxel.hpp"

namespace metaforge {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

enum class StrutFamily { Octet, Octahedral, Bcc };

struct StrutSpec {
  StrutFamily family = StrutFamily::Bcc;
  double radius = 1.5;  // voxel units
};

enum class LevelSetFamily { Gyroid, SchwarzP, Diamond };

struct LevelSetSpec {
  LevelSetFamily family = LevelSetFamily::Gyroid;
  double iso_level = 0.0;
  bool shell = false;
  double shell_thickness = 0.0;
};

/// Small in-house parametric family: plates/frames/crosses with hole and
/// fillet-like parameters, composed on the eighth cell and mirrored.
///   0 axis_cross   params: [beam thickness, corner cube size]
///   1 center_plates params: [plate thickness, hole radius]
///   2 edge_frame   params: [beam thickness, center sphere radius]
///   3 face_shell   params: [shell thickness, window radius]
/// All params are normalized to [0,1].
struct TemplateSpec {
  int template_id = 0;
  std::vector<double> params;  // each in [0,1]
};

constexpr int kTemplateCount = 4;

struct MaterialSample {
  double youngs_modulus = 68300.0;  // MPa
  double poisson_ratio = 0.3;

  bool valid() const {
    return youngs_modulus > 0.0 && poisson_ratio > -1.0 && poisson_ratio < 0.5;
  }
};

struct GeneratorConfig {
  int edge_voxels = 16;
  double vf_min = 0.05;
  double vf_max = 0.4;
  std::uint64_t seed = 0;
  int count = 0;
};

struct FamilyMix {
  double strut = 1.0 / 3.0;
  double levelset = 1.0 / 3.0;
  double template_based = 1.0 / 3.0;
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

VoxelGrid generate_strut(const StrutSpec& spec, int edge_voxels);
VoxelGrid generate_levelset(const LevelSetSpec& spec, int edge_voxels);
VoxelGrid generate_template(const TemplateSpec& spec, int edge_voxels);

/// Distance from every voxel center to the family skeleton (periodic, voxel
/// units). generate_strut thresholds this field at the spec radius; exposing
/// it lets callers pick a radius for an exact volume-fraction target.
std::vector<double> strut_distance_field(StrutFamily family, int edge_voxels);

/// Structure-factor field values on the eighth cell (phase in [0, pi] per
/// axis); the full unit is the mirrored eighth.
std::vector<double> levelset_field(LevelSetFamily family, int eighth_edge);

/// Gaussian perturbation of the base properties; each property is redrawn
/// independently with std = std_factor * |mean| until physically valid.
/// Throws NonPhysicalBase after 100 rejected redraws of one property.
MaterialSample sample_material(const MaterialSample& base, std::uint64_t rng_seed,
                               double std_factor = 0.01);
MaterialSample sample_material(const MaterialSample& base, Rng& rng,
                               double std_factor = 0.01);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct ManifestRow {
  std::string id;
  std::string family;     // "strut", "levelset", "template"
  std::string spec_json;  // serialized spec
  int edge_voxels = 0;
  double volume_fraction = 0.0;
  std::string voxel_path;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest,
                    const std::string& run_id = "");

/// Generate `config.count` units, write voxel files under out_dir, and return
/// the manifest. Units whose volume fraction cannot be placed in
/// [vf_min, vf_max] are skipped (reported through on_skip). Deterministic
/// given config.seed.
DatasetManifest build_dataset(
    const GeneratorConfig& config, const FamilyMix& mix,
    const std::filesystem::path& out_dir, const std::string& run_id = "",
    const std::function<void(const std::string&)>& on_skip = {});

}  // namespace metaforge
