#include "metaforge/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "metaforge/io.hpp"

namespace metaforge {

namespace {

struct Segment {
  std::array<double, 3> a, b;
};

// Skeletons in unit coordinates [0,1]^3. All three families are invariant
// under axis reflections and permutations, which carries cubic symmetry
// through to the voxelization.
std::vector<Segment> skeleton(StrutFamily family) {
  std::vector<Segment> segs;
  const std::array<double, 3> center{0.5, 0.5, 0.5};
  auto corner = [](int i) {
    return std::array<double, 3>{static_cast<double>(i & 1),
                                 static_cast<double>((i >> 1) & 1),
                                 static_cast<double>((i >> 2) & 1)};
  };
  // face centers, one per cube face
  const std::array<std::array<double, 3>, 6> faces{{{0.0, 0.5, 0.5},
                                                    {1.0, 0.5, 0.5},
                                                    {0.5, 0.0, 0.5},
                                                    {0.5, 1.0, 0.5},
                                                    {0.5, 0.5, 0.0},
                                                    {0.5, 0.5, 1.0}}};
  auto add_octahedron_edges = [&] {
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) {
        // adjacent face centers differ in two coordinates by 0.5
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double d = faces[i][k] - faces[j][k];
          d2 += d * d;
        }
        if (std::abs(d2 - 0.5) < 1e-12) segs.push_back({faces[i], faces[j]});
      }
  };
  switch (family) {
    case StrutFamily::Bcc:
      for (int i = 0; i < 8; ++i) segs.push_back({corner(i), center});
      break;
    case StrutFamily::Octahedral:
      add_octahedron_edges();
      break;
    case StrutFamily::Octet:
      add_octahedron_edges();
      // corner tetrahedra: each corner connects to its three adjacent faces
      for (int i = 0; i < 8; ++i) {
        const auto c = corner(i);
        for (const auto& f : faces) {
          int shared = 0;
          for (int k = 0; k < 3; ++k)
            if (std::abs(f[k] - c[k]) < 1e-12) ++shared;
          if (shared == 1) segs.push_back({c, f});
        }
      }
      break;
  }
  return segs;
}

double point_segment_dist2(double px, double py, double pz, const Segment& s) {
  const double dx = s.b[0] - s.a[0], dy = s.b[1] - s.a[1], dz = s.b[2] - s.a[2];
  const double wx = px - s.a[0], wy = py - s.a[1], wz = pz - s.a[2];
  const double len2 = dx * dx + dy * dy + dz * dz;
  double t = len2 > 0.0 ? (wx * dx + wy * dy + wz * dz) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = wx - t * dx, ey = wy - t * dy, ez = wz - t * dz;
  return ex * ex + ey * ey + ez * ez;
}

}  // namespace

std::vector<double> strut_distance_field(StrutFamily family, int edge_voxels) {
  if (edge_voxels <= 0) throw InvalidArgument("edge_voxels must be positive");
  const int l = edge_voxels;
  const auto segs = skeleton(family);
  std::vector<double> dist(static_cast<std::size_t>(l) * l * l);
  for (int z = 0; z < l; ++z)
    for (int y = 0; y < l; ++y)
      for (int x = 0; x < l; ++x) {
        // voxel center in unit coords
        const double px = (x + 0.5) / l, py = (y + 0.5) / l, pz = (z + 0.5) / l;
        double best = 1e30;
        // periodic images of the query point
        for (int ox = -1; ox <= 1; ++ox)
          for (int oy = -1; oy <= 1; ++oy)
            for (int oz = -1; oz <= 1; ++oz)
              for (const auto& s : segs) {
                const double d2 = point_segment_dist2(px + ox, py + oy, pz + oz, s);
                best = std::min(best, d2);
              }
        dist[(static_cast<std::size_t>(z) * l + y) * l + x] = std::sqrt(best) * l;
      }
  return dist;
}

VoxelGrid generate_strut(const StrutSpec& spec, int edge_voxels) {
  if (!(spec.radius > 0.0) || spec.radius >= edge_voxels / 2.0)
    throw InvalidArgument("strut radius out of range");
  const auto dist = strut_distance_field(spec.family, edge_voxels);
  VoxelGrid grid(edge_voxels, 0.0, true);
  std::size_t solid = 0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] <= spec.radius) {
      grid.occupancy[i] = 1.0;
      ++solid;
    }
  if (solid == 0 || solid == dist.size())
    throw DegenerateGeometry("strut unit is fully void or fully solid");
  return grid;
}

// ---------------------------------------------------------------------------
// Level-set units. The field is evaluated on the eighth cell with phases in
// [0, pi]; even reflection across the mid-planes makes the full unit both
// mirror-symmetric and periodic.
// ---------------------------------------------------------------------------

namespace {

double structure_factor(LevelSetFamily family, double X, double Y, double Z) {
  switch (family) {
    case LevelSetFamily::Gyroid:
      return std::sin(X) * std::cos(Y) + std::sin(Y) * std::cos(Z) +
             std::sin(Z) * std::cos(X);
    case LevelSetFamily::SchwarzP:
      return std::cos(X) + std::cos(Y) + std::cos(Z);
    case LevelSetFamily::Diamond:
      return std::sin(X) * std::sin(Y) * std::sin(Z) +
             std::sin(X) * std::cos(Y) * std::cos(Z) +
             std::cos(X) * std::sin(Y) * std::cos(Z) +
             std::cos(X) * std::cos(Y) * std::sin(Z);
  }
  return 0.0;
}

}  // namespace

std::vector<double> levelset_field(LevelSetFamily family, int eighth_edge) {
  if (eighth_edge <= 0) throw InvalidArgument("eighth_edge must be positive");
  const int h = eighth_edge;
  std::vector<double> field(static_cast<std::size_t>(h) * h * h);
  for (int z = 0; z < h; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) {
        const double X = std::numbers::pi * (x + 0.5) / h;
        const double Y = std::numbers::pi * (y + 0.5) / h;
        const double Z = std::numbers::pi * (z + 0.5) / h;
        field[(static_cast<std::size_t>(z) * h + y) * h + x] =
            structure_factor(family, X, Y, Z);
      }
  return field;
}

VoxelGrid generate_levelset(const LevelSetSpec& spec, int edge_voxels) {
  if (edge_voxels <= 0 || edge_voxels % 2 != 0)
    throw InvalidArgument("level-set units need an even edge");
  if (spec.shell && !(spec.shell_thickness > 0.0))
    throw InvalidArgument("shell variant needs a positive thickness");
  const int h = edge_voxels / 2;
  const auto field = levelset_field(spec.family, h);
  EighthCell eighth(h, 0.0);
  std::size_t solid = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const bool on = spec.shell ? std::abs(field[i] - spec.iso_level) < spec.shell_thickness
                               : field[i] > spec.iso_level;
    eighth.occupancy[i] = on ? 1.0 : 0.0;
    if (on) ++solid;
  }
  if (solid == 0 || solid == field.size())
    throw DegenerateGeometry("level-set unit is fully void or fully solid");
  return mirror_eighth(eighth);
}

// ---------------------------------------------------------------------------
// Template units. Coordinates (u,v,w) on the eighth cell run from 0 at the
// cell corner to 1 at the mid-planes; all shapes are symmetric in (u,v,w).
// ---------------------------------------------------------------------------

namespace {

struct TemplateRanges {
  double main_lo, main_hi;     // thickness-like parameter
  double aux_lo, aux_hi;       // hole / feature parameter
};

TemplateRanges template_ranges(int id) {
  switch (id) {
    case 0: return {0.10, 0.60, 0.0, 0.50};   // axis_cross
    case 1: return {0.06, 0.50, 0.0, 0.70};   // center_plates
    case 2: return {0.10, 0.55, 0.0, 0.80};   // edge_frame
    case 3: return {0.06, 0.50, 0.0, 0.70};   // face_shell
    default: throw InvalidArgument("unknown template_id");
  }
}

bool template_solid(int id, double t, double aux, double u, double v, double w) {
  switch (id) {
    case 0: {  // beams along the axes through the cell center + corner cube
      const bool beam = (v > 1 - t && w > 1 - t) || (u > 1 - t && w > 1 - t) ||
                        (u > 1 - t && v > 1 - t);
      const bool corner = u < aux && v < aux && w < aux;
      return beam || corner;
    }
    case 1: {  // plates on the three mid-planes with a circular hole each
      auto plate = [&](double n, double p, double q) {
        if (n <= 1 - t) return false;
        const double r2 = (1 - p) * (1 - p) + (1 - q) * (1 - q);
        return r2 >= aux * aux;
      };
      return plate(u, v, w) || plate(v, u, w) || plate(w, u, v);
    }
    case 2: {  // frame along the cell edges + sphere at the cell center
      const bool frame = (u < t && v < t) || (v < t && w < t) || (u < t && w < t);
      const double du = 1 - u, dv = 1 - v, dw = 1 - w;
      const bool ball = du * du + dv * dv + dw * dw < aux * aux;
      return frame || ball;
    }
    case 3: {  // shells on the outer faces with a circular window each
      auto shell = [&](double n, double p, double q) {
        if (n >= t) return false;
        const double r2 = (1 - p) * (1 - p) + (1 - q) * (1 - q);
        return r2 >= aux * aux;
      };
      return shell(u, v, w) || shell(v, u, w) || shell(w, u, v);
    }
    default:
      throw InvalidArgument("unknown template_id");
  }
}

}  // namespace

VoxelGrid generate_template(const TemplateSpec& spec, int edge_voxels) {
  if (edge_voxels <= 0 || edge_voxels % 2 != 0)
    throw InvalidArgument("template units need an even edge");
  if (spec.template_id < 0 || spec.template_id >= kTemplateCount)
    throw InvalidArgument("unknown template_id");
  double p0 = spec.params.size() > 0 ? spec.params[0] : 0.0;
  double p1 = spec.params.size() > 1 ? spec.params[1] : 0.0;
  if (p0 < 0.0 || p0 > 1.0 || p1 < 0.0 || p1 > 1.0)
    throw InvalidArgument("template params must lie in [0,1]");
  const auto r = template_ranges(spec.template_id);
  const double t = r.main_lo + p0 * (r.main_hi - r.main_lo);
  const double aux = r.aux_lo + p1 * (r.aux_hi - r.aux_lo);

  const int h = edge_voxels / 2;
  EighthCell eighth(h, 0.0);
  std::size_t solid = 0;
  for (int z = 0; z < h; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) {
        const double u = (x + 0.5) / h, v = (y + 0.5) / h, w = (z + 0.5) / h;
        if (template_solid(spec.template_id, t, aux, u, v, w)) {
          eighth.at(x, y, z) = 1.0;
          ++solid;
        }
      }
  if (solid == 0 || solid == eighth.occupancy.size())
    throw DegenerateGeometry("template unit is fully void or fully solid");
  return mirror_eighth(eighth);
}

// ---------------------------------------------------------------------------
// Material sampling
// ---------------------------------------------------------------------------

MaterialSample sample_material(const MaterialSample& base, Rng& rng, double std_factor) {
  if (!base.valid()) throw NonPhysicalBase("base material is invalid");
  MaterialSample out;
  auto draw = [&](double mean, auto ok) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double v = rng.normal(mean, std_factor * std::abs(mean));
      if (ok(v)) return v;
    }
    throw NonPhysicalBase("rejected 100 redraws");
  };
  out.youngs_modulus = draw(base.youngs_modulus, [](double v) { return v > 0.0; });
  out.poisson_ratio =
      draw(base.poisson_ratio, [](double v) { return v > -1.0 && v < 0.5; });
  return out;
}

MaterialSample sample_material(const MaterialSample& base, std::uint64_t rng_seed,
                               double std_factor) {
  Rng rng(rng_seed);
  return sample_material(base, rng, std_factor);
}

// ---------------------------------------------------------------------------
// Dataset building
// ---------------------------------------------------------------------------

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int ci = table.column("id"), cf = table.column("family"),
            cs = table.column("spec_json"), ce = table.column("edge_voxels"),
            cv = table.column("volume_fraction"), cp = table.column("voxel_path");
  if (ci < 0 || cf < 0 || cs < 0 || ce < 0 || cv < 0 || cp < 0)
    throw IoError("manifest missing required columns: " + path.string());
  DatasetManifest m;
  for (const auto& row : table.rows) {
    ManifestRow r;
    r.id = row[ci];
    r.family = row[cf];
    r.spec_json = row[cs];
    r.edge_voxels = std::stoi(row[ce]);
    r.volume_fraction = std::stod(row[cv]);
    r.voxel_path = row[cp];
    m.rows.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest,
                    const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = {"id", "family", "spec_json", "edge_voxels", "volume_fraction",
                  "voxel_path"};
  for (const auto& r : manifest.rows)
    table.rows.push_back({r.id, r.family, r.spec_json, std::to_string(r.edge_voxels),
                          format_double(r.volume_fraction), r.voxel_path});
  write_csv(path, table);
}

namespace {

// Pick the threshold placing exactly round(target * n) samples inside, which
// realizes the volume-fraction target as closely as the grid allows.
double quantile_threshold(std::vector<double> values, double target) {
  const std::size_t n = values.size();
  std::size_t k = static_cast<std::size_t>(std::llround(target * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n - 1);
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

struct GeneratedUnit {
  VoxelGrid grid;
  std::string family;
  std::string spec_json;
  bool ok = false;
  std::string error;
};

GeneratedUnit generate_one(const GeneratorConfig& config, const FamilyMix& mix,
                           Rng rng) {
  GeneratedUnit out;
  const double total = mix.strut + mix.levelset + mix.template_based;
  if (!(total > 0.0)) throw InvalidArgument("family mix weights must be positive");
  const double pick = rng.uniform() * total;
  const double target_vf = rng.uniform(config.vf_min, config.vf_max);
  nlohmann::json spec;
  try {
    if (pick < mix.strut) {
      out.family = "strut";
      const auto family = static_cast<StrutFamily>(rng.uniform_int(3));
      const auto dist = strut_distance_field(family, config.edge_voxels);
      const double radius = quantile_threshold(dist, target_vf);
      StrutSpec s{family, radius};
      out.grid = generate_strut(s, config.edge_voxels);
      spec = {{"family", static_cast<int>(family)}, {"radius", radius}};
    } else if (pick < mix.strut + mix.levelset) {
      out.family = "levelset";
      const auto family = static_cast<LevelSetFamily>(rng.uniform_int(3));
      const bool shell = rng.uniform() < 0.3;
      const auto field = levelset_field(family, config.edge_voxels / 2);
      LevelSetSpec s;
      s.family = family;
      s.shell = shell;
      if (shell) {
        // shell around a random iso level; thickness realizes the target vf
        std::vector<double> sorted(field);
        std::sort(sorted.begin(), sorted.end());
        s.iso_level = sorted[static_cast<std::size_t>(
            rng.uniform(0.3, 0.7) * static_cast<double>(sorted.size() - 1))];
        std::vector<double> gap(field.size());
        for (std::size_t i = 0; i < field.size(); ++i)
          gap[i] = std::abs(field[i] - s.iso_level);
        s.shell_thickness =
            quantile_threshold(gap, target_vf) + 1e-12;
      } else {
        // solid where field > iso; higher iso -> smaller vf
        std::vector<double> neg(field.size());
        for (std::size_t i = 0; i < field.size(); ++i) neg[i] = -field[i];
        s.iso_level = -quantile_threshold(neg, target_vf);
      }
      out.grid = generate_levelset(s, config.edge_voxels);
      spec = {{"family", static_cast<int>(family)},
              {"iso_level", s.iso_level},
              {"shell", s.shell},
              {"shell_thickness", s.shell_thickness}};
    } else {
      out.family = "template";
      TemplateSpec s;
      s.template_id = static_cast<int>(rng.uniform_int(kTemplateCount));
      const double aux = rng.uniform();
      // bisect the thickness parameter toward the target volume fraction
      double lo = 0.0, hi = 1.0;
      VoxelGrid best;
      for (int it = 0; it < 18; ++it) {
        const double mid = 0.5 * (lo + hi);
        s.params = {mid, aux};
        try {
          VoxelGrid g = generate_template(s, config.edge_voxels);
          const double vf = volume_fraction(g);
          if (vf < target_vf)
            lo = mid;
          else
            hi = mid;
          best = std::move(g);
        } catch (const DegenerateGeometry&) {
          lo = mid;  // fully void at this thickness
        }
      }
      s.params = {0.5 * (lo + hi), aux};
      out.grid = generate_template(s, config.edge_voxels);
      spec = {{"template_id", s.template_id}, {"params", s.params}};
    }
    out.spec_json = spec.dump();
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

DatasetManifest build_dataset(const GeneratorConfig& config, const FamilyMix& mix,
                              const std::filesystem::path& out_dir,
                              const std::string& run_id,
                              const std::function<void(const std::string&)>& on_skip) {
  if (!(config.vf_min > 0.0 && config.vf_min < config.vf_max && config.vf_max < 1.0))
    throw InvalidArgument("need 0 < vf_min < vf_max < 1");
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  for (int i = 0; i < config.count; ++i) {
    GeneratedUnit unit;
    // a few retries with derived streams if a draw lands degenerate
    for (int attempt = 0; attempt < 5 && !unit.ok; ++attempt) {
      unit = generate_one(config, mix,
                          Rng::substream(config.seed, {static_cast<std::uint64_t>(i),
                                                       static_cast<std::uint64_t>(attempt)}));
      if (unit.ok) {
        const double vf = volume_fraction(unit.grid);
        if (vf < config.vf_min || vf > config.vf_max) {
          unit.ok = false;
          unit.error = "volume fraction " + format_double(vf) + " outside range";
        }
      }
    }
    if (!unit.ok) {
      if (on_skip) on_skip("unit " + std::to_string(i) + ": " + unit.error);
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof name, "u%05d", i);
    ManifestRow row;
    row.id = name;
    row.family = unit.family;
    row.spec_json = unit.spec_json;
    row.edge_voxels = config.edge_voxels;
    row.volume_fraction = volume_fraction(unit.grid);
    row.voxel_path = std::string(name) + ".vox";
    save_voxel(out_dir / row.voxel_path, unit.grid, run_id);
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

}  // namespace metaforge
