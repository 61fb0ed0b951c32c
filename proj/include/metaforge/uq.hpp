#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaforge/model.hpp"

namespace metaforge {

struct UqConfig {
  int n_samples = 80;
  std::uint64_t seed = 0;
  bool binarize_before_reencode = true;  // re-encode the thresholded decode
  double binarize_threshold = 0.5;
  bool aleatoric_variance_mean = false;  // sqrt(mean sigma^2) instead of mean sigma
};

struct PropertyUq {
  double mean = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
  double total = 0.0;  // sqrt(aleatoric^2 + epistemic^2)
};

struct UqResult {
  PropertyUq E;
  PropertyUq nu;
};

/// Combine per-sample predictive Gaussians: predictive mean = mean of means,
/// aleatoric = mean of stds, epistemic = sample std of means (N-1), total =
/// Pythagorean sum. Throws InsufficientSamples for fewer than two samples.
UqResult aggregate(const std::vector<MdnPrediction>& samples,
                   bool aleatoric_variance_mean = false);

struct UqOutcome {
  UqResult result;
  std::vector<MdnPrediction> samples;
  LatentCode reencoded;
};

/// The latent-space uncertainty loop: decode the starting latent mean,
/// (optionally) binarize, re-encode to a fresh (mean, std), draw n_samples
/// latent vectors, predict each with the MDN, aggregate.
UqOutcome predict_with_uncertainty(const VaeMdnModel& model,
                                   const std::vector<double>& z_mean,
                                   const UqConfig& cfg);
UqOutcome predict_with_uncertainty(const VaeMdnModel& model, const EighthCell& start,
                                   const UqConfig& cfg);
UqOutcome predict_with_uncertainty(const VaeMdnModel& model, const VoxelGrid& start,
                                   const UqConfig& cfg);

/// Bulk modulus statistics induced by pushing per-sample (E, nu) Gaussian
/// draws through K = E/(3(1-2nu)) before aggregation.
PropertyUq aggregate_bulk(const std::vector<MdnPrediction>& samples, std::uint64_t seed,
                          int inner_draws = 64, bool aleatoric_variance_mean = false);

struct ConvergenceRow {
  int n = 0;
  UqResult result;
};

/// predict_with_uncertainty at each sample count (ascending, each >= 2) with
/// per-N substreams of cfg.seed.
std::vector<ConvergenceRow> convergence_sweep(const VaeMdnModel& model,
                                              const std::vector<double>& z_mean,
                                              const std::vector<int>& n_values,
                                              const UqConfig& cfg);

std::string uq_result_to_json(const UqResult& result, const std::string& run_id = "");
void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<ConvergenceRow>& rows,
                           const std::string& run_id = "");

}  // namespace metaforge
