#include "metaforge/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "metaforge/io.hpp"
#include "metaforge/parallel.hpp"

namespace metaforge {

LoadCase LoadCase::uniaxial(int axis, double eps) {
  LoadCase lc;
  lc.macro_strain[axis] = eps;
  return lc;
}

LoadCase LoadCase::shear_xy(double gamma) {
  LoadCase lc;
  lc.macro_strain[5] = gamma;
  return lc;
}

namespace {

// ---------------------------------------------------------------------------
// Trilinear 8-node brick on the unit cube, 2x2x2 Gauss quadrature.
// Node order: (0,0,0) (1,0,0) (0,1,0) (1,1,0) (0,0,1) (1,0,1) (0,1,1) (1,1,1).
// ---------------------------------------------------------------------------

constexpr int kNodeOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};

struct HexKernel {
  double Ke[24][24] = {};  // unit base modulus
  double Fe[24][6] = {};   // integral of B^T D over the element
  double D[6][6] = {};     // constitutive matrix, unit base modulus

  explicit HexKernel(double nu) {
    const double E = 1.0;
    const double lam = E * nu / ((1 + nu) * (1 - 2 * nu));
    const double mu = E / (2 * (1 + nu));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) D[i][j] = lam;
    for (int i = 0; i < 3; ++i) D[i][i] = lam + 2 * mu;
    for (int i = 3; i < 6; ++i) D[i][i] = mu;

    const double gp[2] = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
    for (double s : gp)
      for (double t : gp)
        for (double p : gp) {
          double dN[8][3];
          for (int i = 0; i < 8; ++i) {
            const double sx = 2.0 * kNodeOffset[i][0] - 1.0;
            const double sy = 2.0 * kNodeOffset[i][1] - 1.0;
            const double sz = 2.0 * kNodeOffset[i][2] - 1.0;
            // N_i = (1+sx s)(1+sy t)(1+sz p)/8 on [-1,1]^3; d(natural)/d(phys)=2
            dN[i][0] = sx * (1 + sy * t) * (1 + sz * p) / 8.0 * 2.0;
            dN[i][1] = sy * (1 + sx * s) * (1 + sz * p) / 8.0 * 2.0;
            dN[i][2] = sz * (1 + sx * s) * (1 + sy * t) / 8.0 * 2.0;
          }
          double B[6][24] = {};
          for (int i = 0; i < 8; ++i) {
            B[0][3 * i + 0] = dN[i][0];
            B[1][3 * i + 1] = dN[i][1];
            B[2][3 * i + 2] = dN[i][2];
            B[3][3 * i + 1] = dN[i][2];  // yz
            B[3][3 * i + 2] = dN[i][1];
            B[4][3 * i + 0] = dN[i][2];  // xz
            B[4][3 * i + 2] = dN[i][0];
            B[5][3 * i + 0] = dN[i][1];  // xy
            B[5][3 * i + 1] = dN[i][0];
          }
          const double w = 1.0 / 8.0;  // detJ = 1/8, unit weights
          double DB[6][24];
          for (int a = 0; a < 6; ++a)
            for (int c = 0; c < 24; ++c) {
              double acc = 0.0;
              for (int b = 0; b < 6; ++b) acc += D[a][b] * B[b][c];
              DB[a][c] = acc;
            }
          for (int r = 0; r < 24; ++r)
            for (int c = 0; c < 24; ++c) {
              double acc = 0.0;
              for (int a = 0; a < 6; ++a) acc += B[a][r] * DB[a][c];
              Ke[r][c] += w * acc;
            }
          for (int r = 0; r < 24; ++r)
            for (int a = 0; a < 6; ++a) Fe[r][a] += w * DB[a][r];
        }
  }
};

// Periodic mesh bookkeeping shared by every case on the same grid.
struct PeriodicMesh {
  int l = 0;
  std::size_t n_elem = 0, n_dof = 0;
  std::vector<std::int32_t> edofs;  // 24 per element
  std::vector<double> scale;        // per-element stiffness factor

  PeriodicMesh(const VoxelGrid& grid, double soft_rel) {
    l = grid.edge_voxels;
    n_elem = grid.size();
    n_dof = 3 * n_elem;
    edofs.resize(n_elem * 24);
    scale.resize(n_elem);
    std::size_t e = 0;
    for (int z = 0; z < l; ++z)
      for (int y = 0; y < l; ++y)
        for (int x = 0; x < l; ++x, ++e) {
          scale[e] = grid.occupancy[e] != 0.0 ? 1.0 : soft_rel;
          for (int a = 0; a < 8; ++a) {
            const int nx = (x + kNodeOffset[a][0]) % l;
            const int ny = (y + kNodeOffset[a][1]) % l;
            const int nz = (z + kNodeOffset[a][2]) % l;
            const std::size_t node = (static_cast<std::size_t>(nz) * l + ny) * l + nx;
            for (int c = 0; c < 3; ++c)
              edofs[e * 24 + 3 * a + c] = static_cast<std::int32_t>(3 * node + c);
          }
        }
  }

  void matvec(const HexKernel& k, const double* u, double* out) const {
    std::memset(out, 0, n_dof * sizeof(double));
    double ue[24], fe[24];
    for (std::size_t e = 0; e < n_elem; ++e) {
      const std::int32_t* dof = &edofs[e * 24];
      for (int i = 0; i < 24; ++i) ue[i] = u[dof[i]];
      const double s = scale[e];
      for (int r = 0; r < 24; ++r) {
        double acc = 0.0;
        const double* row = k.Ke[r];
        for (int c = 0; c < 24; ++c) acc += row[c] * ue[c];
        fe[r] = s * acc;
      }
      for (int i = 0; i < 24; ++i) out[dof[i]] += fe[i];
    }
  }

  std::vector<double> jacobi_diag(const HexKernel& k) const {
    std::vector<double> diag(n_dof, 0.0);
    for (std::size_t e = 0; e < n_elem; ++e) {
      const std::int32_t* dof = &edofs[e * 24];
      for (int i = 0; i < 24; ++i) diag[dof[i]] += scale[e] * k.Ke[i][i];
    }
    return diag;
  }

  // Assembled load for a unit macro strain: f = -sum_e scale_e * Fe * e_macro.
  std::vector<double> load(const HexKernel& k, const std::array<double, 6>& emac) const {
    double fe[24];
    for (int r = 0; r < 24; ++r) {
      double acc = 0.0;
      for (int a = 0; a < 6; ++a) acc += k.Fe[r][a] * emac[a];
      fe[r] = acc;
    }
    std::vector<double> b(n_dof, 0.0);
    for (std::size_t e = 0; e < n_elem; ++e) {
      const std::int32_t* dof = &edofs[e * 24];
      const double s = scale[e];
      for (int i = 0; i < 24; ++i) b[dof[i]] -= s * fe[i];
    }
    return b;
  }

  // Volume-averaged stress for unit base modulus.
  std::array<double, 6> average_stress(const HexKernel& k,
                                       const std::array<double, 6>& emac,
                                       const double* u) const {
    std::array<double, 6> sig{};
    double ue[24];
    for (std::size_t e = 0; e < n_elem; ++e) {
      const std::int32_t* dof = &edofs[e * 24];
      for (int i = 0; i < 24; ++i) ue[i] = u[dof[i]];
      const double s = scale[e];
      for (int a = 0; a < 6; ++a) {
        double acc = 0.0;
        for (int b = 0; b < 6; ++b) acc += k.D[a][b] * emac[b];
        for (int r = 0; r < 24; ++r) acc += k.Fe[r][a] * ue[r];
        sig[a] += s * acc;
      }
    }
    for (double& v : sig) v /= static_cast<double>(n_elem);
    return sig;
  }
};

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

FieldSolution pcg(const PeriodicMesh& mesh, const HexKernel& kernel,
                  const std::vector<double>& b, const SolverConfig& cfg,
                  const FieldSolution* warm) {
  FieldSolution sol;
  const std::size_t n = mesh.n_dof;
  sol.displacements.assign(n, 0.0);
  const double nb = norm2(b);
  // homogeneous loads assemble to zero up to roundoff
  if (nb <= 1e-10 * std::sqrt(static_cast<double>(n))) {
    sol.converged = true;
    sol.iterations = 0;
    sol.rel_residual = 0.0;
    return sol;
  }
  if (warm && warm->displacements.size() == n)
    sol.displacements = warm->displacements;

  const int max_iter = cfg.max_iterations > 0
                           ? cfg.max_iterations
                           : static_cast<int>(10.0 * std::sqrt(static_cast<double>(n)));
  const std::vector<double> diag = mesh.jacobi_diag(kernel);
  std::vector<double> r(n), z(n), p(n), Ap(n);
  mesh.matvec(kernel, sol.displacements.data(), Ap.data());
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  double rnorm = norm2(r);
  int it = 0;
  while (rnorm > cfg.cg_tolerance * nb && it < max_iter) {
    mesh.matvec(kernel, p.data(), Ap.data());
    double pAp = 0.0;
    for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    if (!(pAp > 0.0)) break;  // stagnation / loss of positivity
    const double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      sol.displacements[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] / diag[i];
      rz_next += r[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = norm2(r);
    ++it;
  }
  sol.iterations = it;
  sol.rel_residual = rnorm / nb;
  sol.converged = rnorm <= cfg.cg_tolerance * nb;
  return sol;
}

bool invert3(const std::array<std::array<double, 3>, 3>& m,
             std::array<std::array<double, 3>, 3>& inv) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-300) return false;
  const double id = 1.0 / det;
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id;
  return true;
}

}  // namespace

FieldSolution solve_case(const VoxelGrid& grid, const MaterialSample& material,
                         const LoadCase& load, const SolverConfig& cfg,
                         const FieldSolution* warm_start) {
  if (!grid.binary_flag) throw InvalidArgument("solver needs a binary grid");
  if (!material.valid()) throw NonPhysicalBase("material out of range");
  bool any_solid = false;
  for (double v : grid.occupancy)
    if (v != 0.0) {
      any_solid = true;
      break;
    }
  if (!any_solid) throw EmptyStructure("cannot solve an empty cell");

  const HexKernel kernel(material.poisson_ratio);
  const PeriodicMesh mesh(grid, cfg.soft_void_rel);
  const std::vector<double> b = mesh.load(kernel, load.macro_strain);
  return pcg(mesh, kernel, b, cfg, warm_start);
}

EffectiveDetail effective_detail(const VoxelGrid& grid, const MaterialSample& material,
                                 const SolverConfig& cfg, WarmCache* warm) {
  if (!grid.binary_flag) throw InvalidArgument("solver needs a binary grid");
  if (!material.valid()) throw NonPhysicalBase("material out of range");
  bool any_solid = false;
  for (double v : grid.occupancy)
    if (v != 0.0) {
      any_solid = true;
      break;
    }
  if (!any_solid) throw EmptyStructure("cannot homogenize an empty cell");

  const HexKernel kernel(material.poisson_ratio);
  const PeriodicMesh mesh(grid, cfg.soft_void_rel);

  const std::array<LoadCase, 4> cases{LoadCase::uniaxial(0), LoadCase::uniaxial(1),
                                      LoadCase::uniaxial(2), LoadCase::shear_xy()};
  EffectiveDetail out;
  std::array<std::array<double, 6>, 4> stress{};
  for (int c = 0; c < 4; ++c) {
    const std::vector<double> b = mesh.load(kernel, cases[c].macro_strain);
    const FieldSolution* ws = warm ? &warm->cases[c] : nullptr;
    FieldSolution sol = pcg(mesh, kernel, b, cfg, ws);
    if (!sol.converged)
      throw NotConverged("case " + std::to_string(c) + " residual " +
                         format_double(sol.rel_residual));
    out.total_iterations += sol.iterations;
    stress[c] = mesh.average_stress(kernel, cases[c].macro_strain,
                                    sol.displacements.data());
    if (warm) warm->cases[c] = std::move(sol);
  }

  const double E0 = material.youngs_modulus;
  // normal stiffness block, symmetrized
  for (int a = 0; a < 3; ++a)
    for (int bx = 0; bx < 3; ++bx)
      out.normal_stiffness[a][bx] = 0.5 * E0 * (stress[bx][a] + stress[a][bx]);
  out.shear_stiffness = E0 * stress[3][5];

  std::array<std::array<double, 3>, 3> S;
  if (invert3(out.normal_stiffness, S) && S[0][0] > 0 && S[1][1] > 0 && S[2][2] > 0) {
    for (int a = 0; a < 3; ++a) out.youngs_by_axis[a] = 1.0 / S[a][a];
    double nu_acc = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int bx = 0; bx < 3; ++bx)
        if (a != bx) nu_acc += -S[a][bx] / S[bx][bx];
    out.props.nu = nu_acc / 6.0;
    out.props.E =
        (out.youngs_by_axis[0] + out.youngs_by_axis[1] + out.youngs_by_axis[2]) / 3.0;
  } else {
    // disconnected load path: no measurable stiffness
    out.youngs_by_axis = {0.0, 0.0, 0.0};
    out.props.E = 0.0;
    out.props.nu = 0.0;
  }
  out.props.G = out.shear_stiffness;
  return out;
}

ElasticProps effective_properties(const VoxelGrid& grid, const MaterialSample& material,
                                  const SolverConfig& cfg) {
  return effective_detail(grid, material, cfg).props;
}

double bulk_modulus(const ElasticProps& props) {
  const double denom = 1.0 - 2.0 * props.nu;
  if (denom <= 1e-9) throw IncompressibleLimit("nu too close to 0.5");
  return props.E / (3.0 * denom);
}

AleatoricStudy true_aleatoric_study(const VoxelGrid& grid, const MaterialSample& base,
                                    int n, std::uint64_t seed, const SolverConfig& cfg,
                                    double std_factor) {
  if (n < 2) throw InvalidSampleCount("need at least 2 draws");
  WarmCache warm;
  std::vector<ElasticProps> draws;
  draws.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(i)});
    const MaterialSample mat = sample_material(base, rng, std_factor);
    draws.push_back(effective_detail(grid, mat, cfg, &warm).props);
  }
  AleatoricStudy study;
  study.n = n;
  auto accum = [&](auto get) {
    double mean = 0.0;
    for (const auto& d : draws) mean += get(d);
    mean /= n;
    double var = 0.0;
    for (const auto& d : draws) {
      const double dd = get(d) - mean;
      var += dd * dd;
    }
    var /= (n - 1);
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  std::tie(study.mean.E, study.stddev.E) = accum([](const ElasticProps& p) { return p.E; });
  std::tie(study.mean.nu, study.stddev.nu) =
      accum([](const ElasticProps& p) { return p.nu; });
  std::tie(study.mean.G, study.stddev.G) = accum([](const ElasticProps& p) { return p.G; });
  return study;
}

std::vector<LabeledRow> label_manifest(const DatasetManifest& manifest,
                                       const std::filesystem::path& data_dir,
                                       const MaterialSample& base, int draws,
                                       std::uint64_t seed, const SolverConfig& cfg) {
  std::vector<LabeledRow> rows(manifest.rows.size());
  parallel_for(manifest.rows.size(), [&](std::size_t i) {
    LabeledRow& out = rows[i];
    out.unit = manifest.rows[i];
    try {
      VoxelGrid grid = load_voxel(data_dir / out.unit.voxel_path);
      if (!grid.binary_flag) grid = binarize(grid, 0.5);
      grid = largest_component(grid).first;
      const std::uint64_t row_seed =
          seed ^ fnv1a(out.unit.id);  // stable per-unit stream
      if (draws >= 2) {
        const AleatoricStudy study = true_aleatoric_study(grid, base, draws, row_seed, cfg);
        out.E_mean = study.mean.E;
        out.nu_mean = study.mean.nu;
        out.G_mean = study.mean.G;
        out.E_std = study.stddev.E;
        out.nu_std = study.stddev.nu;
      } else {
        const ElasticProps p = effective_properties(grid, base, cfg);
        out.E_mean = p.E;
        out.nu_mean = p.nu;
        out.G_mean = p.G;
      }
      out.ok = true;
    } catch (const Error& e) {
      out.error = e.what();
    }
  });
  return rows;
}

void write_labeled_csv(const std::filesystem::path& path,
                       const std::vector<LabeledRow>& rows, const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = {"id",    "family", "spec_json", "edge_voxels", "volume_fraction",
                  "voxel_path", "E_mean", "nu_mean",   "G_mean",      "E_std",
                  "nu_std"};
  for (const auto& r : rows) {
    if (!r.ok) continue;
    table.rows.push_back({r.unit.id, r.unit.family, r.unit.spec_json,
                          std::to_string(r.unit.edge_voxels),
                          format_double(r.unit.volume_fraction), r.unit.voxel_path,
                          format_double(r.E_mean), format_double(r.nu_mean),
                          format_double(r.G_mean), format_double(r.E_std),
                          format_double(r.nu_std)});
  }
  write_csv(path, table);
}

std::vector<LabeledRow> read_labeled_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int ci = table.column("id"), cf = table.column("family"),
            cs = table.column("spec_json"), ce = table.column("edge_voxels"),
            cv = table.column("volume_fraction"), cp = table.column("voxel_path");
  const int cE = table.column("E_mean"), cn = table.column("nu_mean"),
            cG = table.column("G_mean"), cEs = table.column("E_std"),
            cns = table.column("nu_std");
  if (ci < 0 || cE < 0 || cn < 0) throw IoError("labeled csv missing columns");
  std::vector<LabeledRow> rows;
  for (const auto& r : table.rows) {
    LabeledRow row;
    row.unit.id = r[ci];
    if (cf >= 0) row.unit.family = r[cf];
    if (cs >= 0) row.unit.spec_json = r[cs];
    if (ce >= 0) row.unit.edge_voxels = std::stoi(r[ce]);
    if (cv >= 0) row.unit.volume_fraction = std::stod(r[cv]);
    if (cp >= 0) row.unit.voxel_path = r[cp];
    row.E_mean = std::stod(r[cE]);
    row.nu_mean = std::stod(r[cn]);
    if (cG >= 0) row.G_mean = std::stod(r[cG]);
    if (cEs >= 0) row.E_std = std::stod(r[cEs]);
    if (cns >= 0) row.nu_std = std::stod(r[cns]);
    row.ok = true;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace metaforge
