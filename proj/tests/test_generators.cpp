#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "metaforge/generators.hpp"
#include "metaforge/io.hpp"
#include "metaforge/voxel.hpp"

using namespace metaforge;
namespace fs = std::filesystem;

namespace {

// independent capsule-distance oracle for the bcc skeleton
double bcc_point_dist(double px, double py, double pz, int l) {
  // eight half-diagonals, periodic images
  double best = 1e30;
  for (int ox = -1; ox <= 1; ++ox)
    for (int oy = -1; oy <= 1; ++oy)
      for (int oz = -1; oz <= 1; ++oz)
        for (int c = 0; c < 8; ++c) {
          const double ax = (c & 1) ? l : 0, ay = (c & 2) ? l : 0, az = (c & 4) ? l : 0;
          const double bx = l / 2.0, by = l / 2.0, bz = l / 2.0;
          const double qx = px + ox * l, qy = py + oy * l, qz = pz + oz * l;
          const double dx = bx - ax, dy = by - ay, dz = bz - az;
          double t = ((qx - ax) * dx + (qy - ay) * dy + (qz - az) * dz) /
                     (dx * dx + dy * dy + dz * dz);
          t = std::clamp(t, 0.0, 1.0);
          const double ex = qx - (ax + t * dx), ey = qy - (ay + t * dy),
                       ez = qz - (az + t * dz);
          best = std::min(best, std::sqrt(ex * ex + ey * ey + ez * ez));
        }
  return best;
}

}  // namespace

TEST_CASE("bcc struts stay connected at a bridging radius") {
  const VoxelGrid g = generate_strut({StrutFamily::Bcc, 2.0}, 16);
  const auto [kept, removed] = largest_component(g);
  CHECK(removed == 0);
}

TEST_CASE("octet volume fraction grows with radius") {
  const double v1 = volume_fraction(generate_strut({StrutFamily::Octet, 1.0}, 16));
  const double v2 = volume_fraction(generate_strut({StrutFamily::Octet, 2.0}, 16));
  CHECK(v1 <= v2);
}

TEST_CASE("bcc radius 1.5 on 16^3 matches the capsule-distance oracle") {
  const VoxelGrid g = generate_strut({StrutFamily::Bcc, 1.5}, 16);
  std::size_t expected = 0;
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool solid = bcc_point_dist(x + 0.5, y + 0.5, z + 0.5, 16) <= 1.5;
        if (solid) ++expected;
        CHECK(g.at(x, y, z) == (solid ? 1.0 : 0.0));
      }
  CHECK(volume_fraction(g) == doctest::Approx(expected / 4096.0));
}

TEST_CASE("strut units carry full cubic symmetry") {
  for (StrutFamily f : {StrutFamily::Bcc, StrutFamily::Octahedral, StrutFamily::Octet}) {
    const VoxelGrid g = generate_strut({f, 1.6}, 12);
    CHECK(is_mirror_symmetric(g));
  }
}

TEST_CASE("gyroid at iso 0 is volume-balanced") {
  const VoxelGrid g =
      generate_levelset({LevelSetFamily::Gyroid, 0.0, false, 0.0}, 32);
  // oracle: fine quadrature of the field sign over the eighth domain
  const auto fine = levelset_field(LevelSetFamily::Gyroid, 64);
  double positive = 0;
  for (double v : fine)
    if (v > 0.0) positive += 1.0;
  const double oracle_vf = positive / static_cast<double>(fine.size());
  CHECK(volume_fraction(g) == doctest::Approx(oracle_vf).epsilon(0.04));
  CHECK(volume_fraction(g) == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("schwarz-p volume fraction is non-increasing in the iso level") {
  double prev = 1.0;
  for (double iso : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const double vf =
        volume_fraction(generate_levelset({LevelSetFamily::SchwarzP, iso, false, 0.0}, 16));
    CHECK(vf <= prev + 1e-12);
    prev = vf;
  }
}

TEST_CASE("level-set units are mirror-symmetric and periodic") {
  for (LevelSetFamily f :
       {LevelSetFamily::Gyroid, LevelSetFamily::SchwarzP, LevelSetFamily::Diamond}) {
    const VoxelGrid g = generate_levelset({f, 0.2, false, 0.0}, 16);
    CHECK(is_mirror_symmetric(g));
    // translation by one full period is the identity
    const int l = g.edge_voxels;
    bool same = true;
    for (int z = 0; z < l && same; ++z)
      for (int y = 0; y < l && same; ++y)
        for (int x = 0; x < l && same; ++x)
          same = g.at(x, y, z) == g.at((x + l) % l, (y + l) % l, (z + l) % l);
    CHECK(same);
  }
}

TEST_CASE("shell level-set variant needs a thickness and makes thin walls") {
  CHECK_THROWS_AS(generate_levelset({LevelSetFamily::Gyroid, 0.0, true, 0.0}, 16),
                  InvalidArgument);
  const VoxelGrid shell =
      generate_levelset({LevelSetFamily::Gyroid, 0.0, true, 0.35}, 16);
  const VoxelGrid solid =
      generate_levelset({LevelSetFamily::Gyroid, 0.0, false, 0.0}, 16);
  CHECK(volume_fraction(shell) < volume_fraction(solid));
}

TEST_CASE("template units") {
  SUBCASE("base shapes at params 0") {
    // axis_cross: thin beams through the cell center along each axis
    const VoxelGrid cross = generate_template({0, {0.0, 0.0}}, 16);
    CHECK(volume_fraction(cross) > 0.0);
    CHECK(is_mirror_symmetric(cross));
    const auto [kept, removed] = largest_component(cross);
    CHECK(removed == 0);
  }
  SUBCASE("all templates are mirror-symmetric") {
    for (int id = 0; id < kTemplateCount; ++id) {
      const VoxelGrid g = generate_template({id, {0.5, 0.3}}, 16);
      CHECK(is_mirror_symmetric(g));
    }
  }
  SUBCASE("hole radius sweep shrinks the volume fraction monotonically") {
    double prev = 1.0;
    for (double r : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double vf = volume_fraction(generate_template({1, {0.5, r}}, 16));
      CHECK(vf <= prev + 1e-12);
      prev = vf;
    }
  }
  SUBCASE("params outside [0,1] are rejected") {
    CHECK_THROWS_AS(generate_template({1, {1.5, 0.0}}, 16), InvalidArgument);
  }
}

TEST_CASE("material sampling") {
  const MaterialSample base;
  SUBCASE("zero std factor returns the base exactly") {
    const MaterialSample s = sample_material(base, 42, 0.0);
    CHECK(s.youngs_modulus == base.youngs_modulus);
    CHECK(s.poisson_ratio == base.poisson_ratio);
  }
  SUBCASE("fixed seed reproduces the draw") {
    const MaterialSample a = sample_material(base, 42);
    const MaterialSample b = sample_material(base, 42);
    CHECK(a.youngs_modulus == b.youngs_modulus);
    CHECK(a.poisson_ratio == b.poisson_ratio);
  }
  SUBCASE("monte-carlo std of E is about 683") {
    const int n = 10000;
    double mean = 0;
    std::vector<double> draws;
    Rng rng(77);
    for (int i = 0; i < n; ++i) {
      draws.push_back(sample_material(base, rng).youngs_modulus);
      mean += draws.back();
    }
    mean /= n;
    double var = 0;
    for (double d : draws) var += (d - mean) * (d - mean);
    const double std = std::sqrt(var / (n - 1));
    CHECK(std == doctest::Approx(683.0).epsilon(0.05));
    // unbiasedness: sample mean within 3 sigma/sqrt(n)
    CHECK(std::abs(mean - 68300.0) < 3.0 * 683.0 / std::sqrt(static_cast<double>(n)));
  }
  SUBCASE("invalid base is rejected") {
    CHECK_THROWS_AS(sample_material({-1.0, 0.3}, 1), NonPhysicalBase);
  }
}

TEST_CASE("build_dataset") {
  const fs::path dir = fs::temp_directory_path() / "metaforge_gen_test";
  fs::remove_all(dir);
  GeneratorConfig cfg;
  cfg.edge_voxels = 16;
  cfg.count = 24;
  cfg.seed = 9;

  SUBCASE("count 0 gives an empty manifest") {
    GeneratorConfig empty = cfg;
    empty.count = 0;
    const DatasetManifest m = build_dataset(empty, {}, dir / "empty");
    CHECK(m.rows.empty());
  }
  SUBCASE("volume fractions respect the filter and grids are symmetric") {
    const DatasetManifest m = build_dataset(cfg, {}, dir / "a");
    CHECK(m.rows.size() >= 20);  // a few retries may be spent, none should fail
    for (const auto& row : m.rows) {
      CHECK(row.volume_fraction >= cfg.vf_min);
      CHECK(row.volume_fraction <= cfg.vf_max);
      const VoxelGrid g = load_voxel(dir / "a" / row.voxel_path);
      CHECK(is_mirror_symmetric(g));
      CHECK(volume_fraction(g) == doctest::Approx(row.volume_fraction));
    }
  }
  SUBCASE("same seed twice is byte-identical") {
    const DatasetManifest m1 = build_dataset(cfg, {}, dir / "b1");
    const DatasetManifest m2 = build_dataset(cfg, {}, dir / "b2");
    write_manifest(dir / "m1.csv", m1);
    write_manifest(dir / "m2.csv", m2);
    CHECK(hash_file(dir / "m1.csv") == hash_file(dir / "m2.csv"));
    for (const auto& row : m1.rows)
      CHECK(hash_file(dir / "b1" / row.voxel_path) ==
            hash_file(dir / "b2" / row.voxel_path));
  }
}

TEST_CASE("manifest csv round trip") {
  DatasetManifest m;
  m.rows.push_back({"u1", "strut", R"({"family":2,"radius":1.5})", 16, 0.2, "u1.vox"});
  const fs::path p = fs::temp_directory_path() / "metaforge_manifest.csv";
  write_manifest(p, m, "rid");
  const DatasetManifest r = read_manifest(p);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].id == "u1");
  CHECK(r.rows[0].spec_json == m.rows[0].spec_json);
  CHECK(r.rows[0].volume_fraction == doctest::Approx(0.2));
}
