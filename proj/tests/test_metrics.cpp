#include <doctest.h>

#include <cmath>

#include "metaforge/metrics.hpp"
#include "metaforge/rng.hpp"

using namespace metaforge;

namespace {
VoxelGrid random_binary(int edge, double fill, std::uint64_t seed) {
  Rng rng(seed);
  VoxelGrid g(edge, 0.0, true);
  for (double& v : g.occupancy) v = rng.uniform() < fill ? 1.0 : 0.0;
  return g;
}
}  // namespace

TEST_CASE("recon_accuracy closed forms") {
  const VoxelGrid a = random_binary(4, 0.5, 1);
  CHECK(recon_accuracy(a, a) == 1.0);
  VoxelGrid b = a;
  for (double& v : b.occupancy) v = 1.0 - v;
  CHECK(recon_accuracy(a, b) == 0.0);

  VoxelGrid c(2, 0.0, true), d(2, 0.0, true);
  d.at(1, 1, 1) = 1.0;  // one differing voxel out of 8
  CHECK(recon_accuracy(c, d) == doctest::Approx(0.875));

  SUBCASE("symmetric in its arguments") {
    const VoxelGrid e = random_binary(4, 0.3, 2);
    CHECK(recon_accuracy(a, e) == recon_accuracy(e, a));
  }
}

TEST_CASE("r_squared") {
  const std::vector<double> truth{1.0, 2.0, 3.0, 4.0};
  CHECK(r_squared(truth, truth) == doctest::Approx(1.0));
  CHECK(r_squared(truth, {2.5, 2.5, 2.5, 2.5}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(r_squared({1.0, 1.0}, {1.0, 2.0}), ConstantTruth);

  SUBCASE("invariant under a joint affine rescale") {
    const std::vector<double> pred{1.1, 1.9, 3.2, 3.9};
    const double r = r_squared(truth, pred);
    std::vector<double> t2, p2;
    for (double v : truth) t2.push_back(3.0 * v - 7.0);
    for (double v : pred) p2.push_back(3.0 * v - 7.0);
    CHECK(r_squared(t2, p2) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("nrmse") {
  const std::vector<double> truth{1.0, 2.0, 3.0};
  CHECK(nrmse(truth, truth, 0.0, 10.0) == doctest::Approx(0.0));
  // constant offset c over range R -> c/R
  CHECK(nrmse(truth, {1.5, 2.5, 3.5}, 0.0, 10.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(nrmse(truth, truth, 1.0, 1.0), ZeroRange);

  SUBCASE("scales as 1/k with the range") {
    const std::vector<double> pred{1.2, 2.2, 3.2};
    CHECK(nrmse(truth, pred, 0.0, 20.0) ==
          doctest::Approx(0.5 * nrmse(truth, pred, 0.0, 10.0)));
  }
}

TEST_CASE("relative_voxel_difference") {
  const VoxelGrid orig = random_binary(4, 0.4, 3);
  SUBCASE("identical generations give zero") {
    CHECK(relative_voxel_difference(orig, {orig, orig, orig}) == doctest::Approx(0.0));
  }
  SUBCASE("matches a naive triple-loop reference") {
    std::vector<VoxelGrid> gen;
    for (std::uint64_t s = 10; s < 14; ++s) gen.push_back(random_binary(4, 0.4, s));
    double solid = 0;
    for (double v : orig.occupancy) solid += v;
    double acc = 0;
    for (const auto& g : gen) {
      double diff = 0;
      for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) diff += std::abs(orig.at(x, y, z) - g.at(x, y, z));
      acc += diff / solid;
    }
    CHECK(relative_voxel_difference(orig, gen) ==
          doctest::Approx(acc / static_cast<double>(gen.size())).epsilon(1e-12));
  }
  SUBCASE("empty original is rejected") {
    const VoxelGrid empty(4, 0.0, true);
    CHECK_THROWS_AS(relative_voxel_difference(empty, {orig}), EmptyStructure);
  }
}

TEST_CASE("coefficient_of_variation") {
  CHECK(coefficient_of_variation({3.0, 3.0, 3.0}) == doctest::Approx(0.0));
  // {1,3}: std = sqrt(2), mean = 2
  CHECK(coefficient_of_variation({1.0, 3.0}) ==
        doctest::Approx(100.0 * std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(coefficient_of_variation({-1.0, 1.0}), ZeroMean);

  SUBCASE("scale-invariant, translation-sensitive") {
    const std::vector<double> v{2.0, 4.0, 9.0};
    std::vector<double> scaled, shifted;
    for (double x : v) scaled.push_back(5.0 * x);
    for (double x : v) shifted.push_back(x + 5.0);
    CHECK(coefficient_of_variation(scaled) ==
          doctest::Approx(coefficient_of_variation(v)).epsilon(1e-12));
    CHECK(coefficient_of_variation(shifted) != coefficient_of_variation(v));
  }
}
