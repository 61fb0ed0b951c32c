#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "metaforge/rng.hpp"
#include "metaforge/uq.hpp"

using namespace metaforge;

namespace {

// direct transcription of the aggregation formulas, kept independent of the
// implementation under test
struct OracleResult {
  double mean, alea, epi, total;
};
OracleResult oracle(const std::vector<double>& mus, const std::vector<double>& sgs) {
  const double n = static_cast<double>(mus.size());
  OracleResult r{};
  for (double m : mus) r.mean += m;
  r.mean /= n;
  for (double s : sgs) r.alea += s;
  r.alea /= n;
  double acc = 0;
  for (double m : mus) acc += (m - r.mean) * (m - r.mean);
  r.epi = std::sqrt(acc / (n - 1));
  r.total = std::sqrt(r.alea * r.alea + r.epi * r.epi);
  return r;
}

std::vector<MdnPrediction> random_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MdnPrediction> out(n);
  for (auto& p : out) {
    p.means = {rng.uniform(100, 20000), rng.uniform(-0.4, 0.45)};
    p.stds = {rng.uniform(1, 500), rng.uniform(1e-4, 0.05)};
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate degenerate cases") {
  SUBCASE("identical predictions") {
    MdnPrediction p;
    p.means = {7.0, 0.2};
    p.stds = {1.5, 0.01};
    const UqResult r = aggregate(std::vector<MdnPrediction>(10, p));
    CHECK(r.E.mean == doctest::Approx(7.0));
    CHECK(r.E.aleatoric == doctest::Approx(1.5));
    CHECK(r.E.epistemic == doctest::Approx(0.0));
    CHECK(r.E.total == doctest::Approx(1.5));
  }
  SUBCASE("two-sample closed form") {
    MdnPrediction a, b;
    a.means = {0.0, 0.0};
    a.stds = {1.0, 1.0};
    b.means = {2.0, 2.0};
    b.stds = {1.0, 1.0};
    const UqResult r = aggregate({a, b});
    CHECK(r.E.mean == doctest::Approx(1.0));
    CHECK(r.E.aleatoric == doctest::Approx(1.0));
    CHECK(r.E.epistemic == doctest::Approx(std::sqrt(2.0)));
    CHECK(r.E.total == doctest::Approx(std::sqrt(3.0)));
  }
  SUBCASE("fewer than two samples rejected") {
    CHECK_THROWS_AS(aggregate({MdnPrediction{}}), InsufficientSamples);
  }
}

TEST_CASE("aggregate matches the direct-formula oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto samples = random_samples(50, 1000 + seed);
    const UqResult r = aggregate(samples);
    std::vector<double> muE, sgE, muN, sgN;
    for (const auto& s : samples) {
      muE.push_back(s.means[0]);
      sgE.push_back(s.stds[0]);
      muN.push_back(s.means[1]);
      sgN.push_back(s.stds[1]);
    }
    const OracleResult oE = oracle(muE, sgE), oN = oracle(muN, sgN);
    CHECK(r.E.mean == doctest::Approx(oE.mean).epsilon(1e-12));
    CHECK(r.E.aleatoric == doctest::Approx(oE.alea).epsilon(1e-12));
    CHECK(r.E.epistemic == doctest::Approx(oE.epi).epsilon(1e-12));
    CHECK(r.E.total == doctest::Approx(oE.total).epsilon(1e-12));
    CHECK(r.nu.total == doctest::Approx(oN.total).epsilon(1e-12));
    // pythagorean identity holds as computed
    CHECK(r.E.total * r.E.total ==
          doctest::Approx(r.E.aleatoric * r.E.aleatoric + r.E.epistemic * r.E.epistemic)
              .epsilon(1e-12));
  }
}

TEST_CASE("aggregate is permutation invariant") {
  auto samples = random_samples(20, 7);
  const UqResult a = aggregate(samples);
  Rng rng(8);
  rng.shuffle(samples);
  const UqResult b = aggregate(samples);
  CHECK(a.E.mean == doctest::Approx(b.E.mean).epsilon(1e-12));
  CHECK(a.E.epistemic == doctest::Approx(b.E.epistemic).epsilon(1e-12));
}

TEST_CASE("epistemic depends only on the means") {
  auto samples = random_samples(20, 9);
  const UqResult a = aggregate(samples);
  for (auto& s : samples) {
    s.stds[0] += 5.0;
    s.stds[1] += 0.01;
  }
  const UqResult b = aggregate(samples);
  CHECK(a.E.epistemic == doctest::Approx(b.E.epistemic).epsilon(1e-12));
  CHECK(b.E.aleatoric == doctest::Approx(a.E.aleatoric + 5.0).epsilon(1e-12));
}

TEST_CASE("duplicating the sample list only touches epistemic via N-1") {
  auto samples = random_samples(10, 10);
  const UqResult once = aggregate(samples);
  auto doubled = samples;
  doubled.insert(doubled.end(), samples.begin(), samples.end());
  const UqResult twice = aggregate(doubled);
  CHECK(twice.E.mean == doctest::Approx(once.E.mean).epsilon(1e-12));
  CHECK(twice.E.aleatoric == doctest::Approx(once.E.aleatoric).epsilon(1e-12));
  // ratio of the (n-1) denominators: var doubles by n0-1 over 2 n0-1
  const double n0 = 10;
  const double expected =
      once.E.epistemic * std::sqrt((n0 - 1) / (2 * n0 - 1) * (2 * n0) / n0);
  CHECK(twice.E.epistemic == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("variance-mean aleatoric option") {
  auto samples = random_samples(30, 11);
  const UqResult literal = aggregate(samples, false);
  const UqResult quad = aggregate(samples, true);
  // quadratic mean is never below the arithmetic mean
  CHECK(quad.E.aleatoric >= literal.E.aleatoric - 1e-12);
}

TEST_CASE("uncertainty loop on an untrained model") {
  const ModelConfig cfg = ModelConfig::desk(8);
  const VaeMdnModel model(cfg, 21);
  Rng rng(3);
  std::vector<double> z(8);
  for (double& v : z) v = rng.normal();

  UqConfig uq;
  uq.n_samples = 16;
  uq.seed = 40;
  const UqOutcome a = predict_with_uncertainty(model, z, uq);
  CHECK(a.samples.size() == 16);
  CHECK(a.result.E.total > 0.0);
  CHECK(a.result.E.total * a.result.E.total ==
        doctest::Approx(a.result.E.aleatoric * a.result.E.aleatoric +
                        a.result.E.epistemic * a.result.E.epistemic)
            .epsilon(1e-12));

  SUBCASE("fixed seed repeats exactly") {
    const UqOutcome b = predict_with_uncertainty(model, z, uq);
    CHECK(a.result.E.mean == b.result.E.mean);
    CHECK(a.result.nu.total == b.result.nu.total);
  }
  SUBCASE("grid and latent entry points agree after one round trip") {
    EighthCell cell = model.decode(z);
    for (double& v : cell.occupancy) v = v >= 0.5 ? 1.0 : 0.0;
    const UqOutcome c = predict_with_uncertainty(model, cell, uq);
    CHECK(std::isfinite(c.result.E.mean));
  }
  SUBCASE("continuous re-encode mode changes the outcome") {
    UqConfig cont = uq;
    cont.binarize_before_reencode = false;
    const UqOutcome c = predict_with_uncertainty(model, z, cont);
    CHECK(std::isfinite(c.result.E.mean));
  }
}

TEST_CASE("bulk aggregation pushes samples through the transform") {
  auto samples = random_samples(16, 13);
  for (auto& s : samples) {
    s.means[1] = 0.25;  // keep the denominator comfortably positive
    s.stds[1] = 0.002;
  }
  const PropertyUq k = aggregate_bulk(samples, 5);
  // rough check against the pointwise transform of the aggregate mean
  const UqResult base = aggregate(samples);
  const double k_point = base.E.mean / (3.0 * (1.0 - 2.0 * 0.25));
  CHECK(k.mean == doctest::Approx(k_point).epsilon(0.05));
  CHECK(k.total > 0.0);
}

TEST_CASE("convergence sweep") {
  const ModelConfig cfg = ModelConfig::desk(8);
  const VaeMdnModel model(cfg, 22);
  std::vector<double> z(8, 0.1);
  UqConfig uq;
  uq.seed = 50;
  SUBCASE("ten requested rows produce ten rows") {
    const auto rows =
        convergence_sweep(model, z, {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}, uq);
    CHECK(rows.size() == 10);
    for (const auto& r : rows) CHECK(r.result.E.total > 0.0);
  }
  SUBCASE("single element works") {
    CHECK(convergence_sweep(model, z, {10}, uq).size() == 1);
  }
  SUBCASE("invalid n rejected") {
    CHECK_THROWS_AS(convergence_sweep(model, z, {1}, uq), InvalidArgument);
    CHECK_THROWS_AS(convergence_sweep(model, z, {10, 10}, uq), InvalidArgument);
  }
}

TEST_CASE("uq json serialization") {
  UqResult r;
  r.E = {100.0, 1.0, 2.0, std::sqrt(5.0)};
  r.nu = {0.3, 0.01, 0.0, 0.01};
  const std::string j = uq_result_to_json(r, "rid");
  CHECK(j.find("\"aleatoric\"") != std::string::npos);
  CHECK(j.find("\"run\"") != std::string::npos);
}
