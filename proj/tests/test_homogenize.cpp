#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "metaforge/generators.hpp"
#include "metaforge/homogenize.hpp"
#include "metaforge/rng.hpp"

using namespace metaforge;

namespace {

// ---------------------------------------------------------------------------
// Independent dense oracle: explicit element stiffness by quadrature, dense
// periodic assembly, Gaussian elimination with node-0 pinned.
// ---------------------------------------------------------------------------

struct DenseOracle {
  int l;
  std::vector<std::vector<double>> K;
  std::vector<double> f;

  static std::array<std::array<double, 24>, 24> element_stiffness(double E, double nu) {
    std::array<std::array<double, 24>, 24> ke{};
    const double lam = E * nu / ((1 + nu) * (1 - 2 * nu));
    const double mu = E / (2 * (1 + nu));
    double D[6][6] = {};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) D[i][j] = lam + (i == j ? 2 * mu : 0.0);
    for (int i = 3; i < 6; ++i) D[i][i] = mu;
    const double gp[2] = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
    const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                              {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    for (double s : gp)
      for (double t : gp)
        for (double p : gp) {
          double B[6][24] = {};
          for (int i = 0; i < 8; ++i) {
            const double sx = corner[i][0] ? 1.0 : -1.0;
            const double sy = corner[i][1] ? 1.0 : -1.0;
            const double sz = corner[i][2] ? 1.0 : -1.0;
            const double gx = 0.25 * sx * (1 + sy * t) * (1 + sz * p);
            const double gy = 0.25 * sy * (1 + sx * s) * (1 + sz * p);
            const double gz = 0.25 * sz * (1 + sx * s) * (1 + sy * t);
            B[0][3 * i] = gx;
            B[1][3 * i + 1] = gy;
            B[2][3 * i + 2] = gz;
            B[3][3 * i + 1] = gz;
            B[3][3 * i + 2] = gy;
            B[4][3 * i] = gz;
            B[4][3 * i + 2] = gx;
            B[5][3 * i] = gy;
            B[5][3 * i + 1] = gx;
          }
          for (int r = 0; r < 24; ++r)
            for (int c = 0; c < 24; ++c) {
              double acc = 0;
              for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) acc += B[a][r] * D[a][b] * B[b][c];
              ke[r][c] += acc / 8.0;
            }
        }
    return ke;
  }

  DenseOracle(const VoxelGrid& grid, double E_base, double nu, double soft,
              const std::array<double, 6>& emac) {
    l = grid.edge_voxels;
    const int n = l * l * l;
    K.assign(3 * n, std::vector<double>(3 * n, 0.0));
    f.assign(3 * n, 0.0);
    const auto ke = element_stiffness(1.0, nu);
    auto node = [&](int x, int y, int z) {
      return ((z % l) * l + (y % l)) * l + (x % l);
    };
    const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                              {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    for (int z = 0; z < l; ++z)
      for (int y = 0; y < l; ++y)
        for (int x = 0; x < l; ++x) {
          const double s =
              grid.at(x, y, z) != 0.0 ? E_base : E_base * soft;
          int dofs[24];
          double uaff[24];
          for (int i = 0; i < 8; ++i) {
            const int nx = x + corner[i][0], ny = y + corner[i][1], nz = z + corner[i][2];
            const int nid = node(nx, ny, nz);
            for (int c = 0; c < 3; ++c) dofs[3 * i + c] = 3 * nid + c;
            // affine displacement for the macro strain (engineering shears)
            uaff[3 * i + 0] = emac[0] * nx + 0.5 * emac[4] * nz + 0.5 * emac[5] * ny;
            uaff[3 * i + 1] = emac[1] * ny + 0.5 * emac[3] * nz + 0.5 * emac[5] * nx;
            uaff[3 * i + 2] = emac[2] * nz + 0.5 * emac[3] * ny + 0.5 * emac[4] * nx;
          }
          for (int r = 0; r < 24; ++r) {
            double load = 0;
            for (int c = 0; c < 24; ++c) {
              K[dofs[r]][dofs[c]] += s * ke[r][c];
              load += s * ke[r][c] * uaff[c];
            }
            f[dofs[r]] -= load;
          }
        }
  }

  // pin node 0 (3 dofs) and solve by Gaussian elimination
  std::vector<double> solve() {
    const int n = static_cast<int>(f.size());
    std::vector<int> free;
    for (int i = 3; i < n; ++i) free.push_back(i);
    const int m = static_cast<int>(free.size());
    std::vector<std::vector<double>> A(m, std::vector<double>(m + 1, 0.0));
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) A[r][c] = K[free[r]][free[c]];
      A[r][m] = f[free[r]];
    }
    for (int col = 0; col < m; ++col) {
      int piv = col;
      for (int r = col + 1; r < m; ++r)
        if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
      std::swap(A[col], A[piv]);
      for (int r = col + 1; r < m; ++r) {
        const double factor = A[r][col] / A[col][col];
        if (factor == 0.0) continue;
        for (int c = col; c <= m; ++c) A[r][c] -= factor * A[col][c];
      }
    }
    std::vector<double> x(m);
    for (int r = m - 1; r >= 0; --r) {
      double acc = A[r][m];
      for (int c = r + 1; c < m; ++c) acc -= A[r][c] * x[c];
      x[r] = acc / A[r][r];
    }
    std::vector<double> full(n, 0.0);
    for (int r = 0; r < m; ++r) full[free[r]] = x[r];
    return full;
  }
};

VoxelGrid random_connected(int edge, double fill, std::uint64_t seed) {
  Rng rng(seed);
  VoxelGrid g(edge, 0.0, true);
  for (double& v : g.occupancy) v = rng.uniform() < fill ? 1.0 : 0.0;
  g.at(0, 0, 0) = 1.0;
  return largest_component(g).first;
}

}  // namespace

TEST_CASE("fully solid cube returns the base material") {
  const VoxelGrid g(8, 1.0, true);
  const MaterialSample base;
  const FieldSolution sol = solve_case(g, base, LoadCase::uniaxial(0));
  CHECK(sol.converged);
  CHECK(sol.iterations <= 2);

  const ElasticProps props = effective_properties(g, base);
  CHECK(props.E == doctest::Approx(68300.0).epsilon(0.001));
  CHECK(props.nu == doctest::Approx(0.3).epsilon(0.0034));
  CHECK(std::abs(props.nu - 0.3) < 0.001);
  CHECK(props.G == doctest::Approx(68300.0 / 2.6).epsilon(0.001));
}

TEST_CASE("solver residual honors the configured tolerance") {
  VoxelGrid g(4, 1.0, true);
  g.at(1, 1, 1) = 0.0;  // one void voxel
  SolverConfig cfg;
  const FieldSolution sol = solve_case(g, {}, LoadCase::uniaxial(0), cfg);
  CHECK(sol.converged);
  CHECK(sol.rel_residual <= cfg.cg_tolerance);
}

TEST_CASE("matrix-free CG matches a dense direct solve on a 6^3 unit") {
  const VoxelGrid g = random_connected(6, 0.6, 31);
  const MaterialSample base;
  SolverConfig cfg;
  cfg.cg_tolerance = 1e-12;
  const LoadCase lc = LoadCase::uniaxial(0);
  const FieldSolution sol = solve_case(g, base, lc, cfg);
  REQUIRE(sol.converged);

  DenseOracle oracle(g, base.youngs_modulus, base.poisson_ratio, cfg.soft_void_rel,
                     lc.macro_strain);
  const std::vector<double> ref = oracle.solve();

  // both solutions float on the translation null space: align per component
  double shift[3] = {};
  const std::size_t n_nodes = g.size();
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (int c = 0; c < 3; ++c) shift[c] += sol.displacements[3 * i + c] - ref[3 * i + c];
  for (double& s : shift) s /= static_cast<double>(n_nodes);

  double norm = 0, err = 0;
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (int c = 0; c < 3; ++c) {
      const double r = ref[3 * i + c];
      const double d = sol.displacements[3 * i + c] - shift[c] - r;
      norm += r * r;
      err += d * d;
    }
  CHECK(std::sqrt(err) <= 1e-6 * std::sqrt(norm));
}

TEST_CASE("two-phase laminates match the closed forms") {
  // layers normal to x: x < 2 stiff, x >= 2 compliant
  auto laminate = [](double E2_rel, double nu) {
    VoxelGrid g(4, 1.0, true);
    MaterialSample mat{68300.0, nu};
    // emulate the second phase by scaling: solve twice is not possible with a
    // binary grid, so build the mix from two solves via superposition is not
    // valid either; instead use the soft-void channel as the second phase.
    SolverConfig cfg;
    cfg.soft_void_rel = E2_rel;
    for (int z = 0; z < 4; ++z)
      for (int y = 0; y < 4; ++y)
        for (int x = 2; x < 4; ++x) g.at(x, y, z) = 0.0;
    const EffectiveDetail detail = effective_detail(g, mat, cfg);
    return detail;
  };

  SUBCASE("nu = 0 gives the series (Reuss) modulus across the layers") {
    const double rel = 0.01;  // phase 2 at 1% of E
    const EffectiveDetail d = laminate(rel, 0.0);
    const double E1 = 68300.0, E2 = rel * 68300.0;
    const double reuss = 1.0 / (0.5 / E1 + 0.5 / E2);
    CHECK(d.youngs_by_axis[0] == doctest::Approx(reuss).epsilon(0.02));
    // in-plane response is the Voigt mean when nu = 0
    CHECK(d.youngs_by_axis[1] == doctest::Approx(0.5 * (E1 + E2)).epsilon(0.02));
  }
  SUBCASE("equal nonzero nu matches the exact laminate formula") {
    const double rel = 0.01, nu = 0.3;
    const EffectiveDetail d = laminate(rel, nu);
    const double E1 = 68300.0, E2 = rel * 68300.0;
    const double reuss = 1.0 / (0.5 / E1 + 0.5 / E2);
    const double voigt = 0.5 * (E1 + E2);
    const double exact =
        1.0 / (1.0 / reuss - (2.0 * nu * nu / (1.0 - nu)) * (1.0 / reuss - 1.0 / voigt));
    CHECK(d.youngs_by_axis[0] == doctest::Approx(exact).epsilon(0.02));
  }
}

TEST_CASE("effective E respects the Voigt bound") {
  const MaterialSample base;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const VoxelGrid g = random_connected(8, 0.45, 50 + seed);
    const ElasticProps props = effective_properties(g, base);
    const double bound = volume_fraction(g) * base.youngs_modulus;
    CHECK(props.E <= bound * (1.0 + 1e-6) + 1e-3);
    CHECK(props.E >= 0.0);
  }
}

TEST_CASE("doubling the base modulus doubles E and K, nu unchanged") {
  const VoxelGrid g = generate_strut({StrutFamily::Bcc, 2.0}, 8);
  const ElasticProps p1 = effective_properties(g, {68300.0, 0.3});
  const ElasticProps p2 = effective_properties(g, {2 * 68300.0, 0.3});
  CHECK(p2.E == doctest::Approx(2 * p1.E).epsilon(1e-6));
  CHECK(p2.nu == doctest::Approx(p1.nu).epsilon(1e-6));
  CHECK(bulk_modulus(p2) == doctest::Approx(2 * bulk_modulus(p1)).epsilon(1e-6));
}

TEST_CASE("cubic-symmetric units have axis-independent moduli") {
  const VoxelGrid g = generate_strut({StrutFamily::Octet, 1.6}, 12);
  const EffectiveDetail d = effective_detail(g, {});
  for (int a = 1; a < 3; ++a)
    CHECK(d.youngs_by_axis[a] ==
          doctest::Approx(d.youngs_by_axis[0]).epsilon(0.005));
}

TEST_CASE("energy consistency: diagonal stiffness entries are non-negative") {
  const VoxelGrid g = random_connected(6, 0.5, 99);
  const EffectiveDetail d = effective_detail(g, {});
  for (int a = 0; a < 3; ++a) CHECK(d.normal_stiffness[a][a] >= 0.0);
  CHECK(d.shear_stiffness >= 0.0);
}

TEST_CASE("bulk modulus") {
  CHECK(bulk_modulus({68300.0, 0.3, 0.0}) == doctest::Approx(56916.6667).epsilon(1e-6));
  CHECK(bulk_modulus({300.0, 0.0, 0.0}) == doctest::Approx(100.0));
  CHECK_THROWS_AS(bulk_modulus({1.0, 0.5, 0.0}), IncompressibleLimit);
}

TEST_CASE("empty structures are rejected") {
  const VoxelGrid g(4, 0.0, true);
  CHECK_THROWS_AS(effective_properties(g, {}), EmptyStructure);
}

TEST_CASE("true aleatoric study") {
  SUBCASE("n below 2 is rejected") {
    const VoxelGrid g(4, 1.0, true);
    CHECK_THROWS_AS(true_aleatoric_study(g, {}, 1, 0), InvalidSampleCount);
  }
  SUBCASE("zero noise factor gives zero spread") {
    const VoxelGrid g(4, 1.0, true);
    const AleatoricStudy s = true_aleatoric_study(g, {}, 4, 0, {}, 0.0);
    CHECK(s.stddev.E == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("solid cube reflects the injected 1% noise") {
    const VoxelGrid g(6, 1.0, true);
    const AleatoricStudy s = true_aleatoric_study(g, {}, 64, 5);
    CHECK(s.stddev.E / s.mean.E == doctest::Approx(0.01).epsilon(0.30));
  }
}
