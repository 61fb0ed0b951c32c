#include <doctest.h>

#include <map>

#include "metaforge/rng.hpp"
#include "metaforge/voxel.hpp"

using namespace metaforge;

namespace {

EighthCell random_eighth(int edge, double fill, Rng& rng) {
  EighthCell c(edge, 0.0);
  for (double& v : c.occupancy) v = rng.uniform() < fill ? 1.0 : 0.0;
  return c;
}

// independent oracle: iterative min-label propagation with periodic wrap
std::pair<std::int64_t, std::int64_t> flood_oracle(const VoxelGrid& g, bool faces_only) {
  const int l = g.edge_voxels;
  std::vector<std::int64_t> label(g.size(), -1);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.occupancy[i] != 0.0) label[i] = static_cast<std::int64_t>(i);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int z = 0; z < l; ++z)
      for (int y = 0; y < l; ++y)
        for (int x = 0; x < l; ++x) {
          const std::size_t i = g.index(x, y, z);
          if (label[i] < 0) continue;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0) continue;
                if (faces_only && manhattan != 1) continue;
                const std::size_t j =
                    g.index((x + dx + l) % l, (y + dy + l) % l, (z + dz + l) % l);
                if (label[j] >= 0 && label[j] < label[i]) {
                  label[i] = label[j];
                  changed = true;
                }
              }
        }
  }
  std::map<std::int64_t, std::int64_t> sizes;
  std::int64_t total = 0;
  for (std::int64_t v : label)
    if (v >= 0) {
      ++sizes[v];
      ++total;
    }
  std::int64_t biggest = 0;
  for (const auto& [k, n] : sizes) biggest = std::max(biggest, n);
  return {biggest, total - biggest};
}

}  // namespace

TEST_CASE("mirror_eighth basics") {
  SUBCASE("1^3 of ones becomes 2^3 of ones") {
    EighthCell c(1, 1.0);
    const VoxelGrid g = mirror_eighth(c);
    CHECK(g.edge_voxels == 2);
    for (double v : g.occupancy) CHECK(v == 1.0);
  }
  SUBCASE("24^3 eighth yields a 48^3 unit") {
    EighthCell c(24, 1.0);
    CHECK(mirror_eighth(c).edge_voxels == 48);
  }
  SUBCASE("output is reflection-invariant and restores its octant") {
    Rng rng(11);
    const EighthCell c = random_eighth(4, 0.5, rng);
    const VoxelGrid g = mirror_eighth(c);
    CHECK(is_mirror_symmetric(g));
    const EighthCell back = extract_octant(g);
    CHECK(back.occupancy == c.occupancy);
  }
  SUBCASE("volume fraction is preserved exactly") {
    Rng rng(12);
    const EighthCell c = random_eighth(5, 0.3, rng);
    CHECK(volume_fraction(mirror_eighth(c)) == volume_fraction(c));
  }
}

TEST_CASE("volume_fraction") {
  CHECK(volume_fraction(VoxelGrid(3, 1.0, true)) == 1.0);
  CHECK(volume_fraction(VoxelGrid(3, 0.0, true)) == 0.0);
  VoxelGrid g(2, 0.0, true);
  g.at(0, 0, 0) = g.at(1, 0, 0) = g.at(0, 1, 0) = g.at(0, 0, 1) = 1.0;
  CHECK(volume_fraction(g) == 0.5);
}

TEST_CASE("binarize") {
  VoxelGrid grid(3, 0.0, false);
  grid.occupancy[0] = 0.2;
  grid.occupancy[1] = 0.5;
  grid.occupancy[2] = 0.9;
  const VoxelGrid out = binarize(grid, 0.5);
  CHECK(out.occupancy[0] == 0.0);
  CHECK(out.occupancy[1] == 1.0);
  CHECK(out.occupancy[2] == 1.0);
  CHECK(out.binary_flag);

  SUBCASE("already binary stays unchanged for any threshold in (0,1]") {
    const VoxelGrid twice = binarize(binarize(grid, 0.5), 1.0);
    CHECK(twice.occupancy == out.occupancy);
  }
  SUBCASE("idempotent") {
    CHECK(binarize(out, 0.5).occupancy == out.occupancy);
  }
  SUBCASE("shape preserved") {
    CHECK(out.edge_voxels == grid.edge_voxels);
    CHECK(out.size() == grid.size());
  }
  SUBCASE("threshold domain") {
    CHECK_THROWS_AS(binarize(grid, 0.0), InvalidArgument);
    CHECK_THROWS_AS(binarize(grid, 1.5), InvalidArgument);
  }
}

TEST_CASE("largest_component") {
  SUBCASE("single connected block is unchanged") {
    VoxelGrid g(4, 0.0, true);
    for (int z = 0; z < 2; ++z)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) g.at(x, y, z) = 1.0;
    const auto [kept, removed] = largest_component(g);
    CHECK(removed == 0);
    CHECK(kept.occupancy == g.occupancy);
  }
  SUBCASE("isolated voxel is removed") {
    VoxelGrid g(8, 0.0, true);
    for (int z = 0; z < 3; ++z)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) g.at(x, y, z) = 1.0;
    g.at(6, 6, 6) = 1.0;
    const auto [kept, removed] = largest_component(g);
    CHECK(removed == 1);
    CHECK(kept.at(6, 6, 6) == 0.0);
    CHECK(kept.at(1, 1, 1) == 1.0);
  }
  SUBCASE("periodic wrap joins voxels across opposite faces") {
    VoxelGrid g(4, 0.0, true);
    g.at(0, 1, 1) = 1.0;
    g.at(3, 1, 1) = 1.0;  // adjacent through the boundary
    const auto [kept, removed] = largest_component(g);
    CHECK(removed == 0);
  }
  SUBCASE("random fields match the label-propagation oracle") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      Rng rng(200 + seed);
      VoxelGrid g(8, 0.0, true);
      for (double& v : g.occupancy) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
      bool any = false;
      for (double v : g.occupancy) any |= v != 0.0;
      if (!any) g.at(0, 0, 0) = 1.0;
      for (Connectivity conn : {Connectivity::Faces6, Connectivity::All26}) {
        const auto [kept, removed] = largest_component(g, conn);
        const auto [obig, orem] = flood_oracle(g, conn == Connectivity::Faces6);
        double kept_solid = 0;
        for (double v : kept.occupancy) kept_solid += v;
        CHECK(static_cast<std::int64_t>(kept_solid) == obig);
        CHECK(removed == orem);
        // output connected: rerunning removes nothing
        CHECK(largest_component(kept, conn).second == 0);
      }
    }
  }
  SUBCASE("empty grid throws") {
    VoxelGrid g(3, 0.0, true);
    CHECK_THROWS_AS(largest_component(g), EmptyStructure);
  }
}
