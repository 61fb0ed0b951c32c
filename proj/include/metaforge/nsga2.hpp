#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metaforge/homogenize.hpp"
#include "metaforge/model.hpp"
#include "metaforge/uq.hpp"
#include "metaforge/voxel.hpp"

namespace metaforge {

enum class PropertySelector { E, Nu, K };
enum class DesignMode { Robust, Deterministic };

struct Objective {
  PropertySelector selector = PropertySelector::K;
  double beta = 5.0;  // weight on the total uncertainty; 0 = mean only
};

struct DesignProblem {
  std::vector<Objective> objectives;  // all maximized
  double vf_target = 0.3;
  double vf_tolerance = 0.001;
  std::vector<std::pair<double, double>> latent_bounds;
  DesignMode mode = DesignMode::Robust;
};

struct Individual {
  std::vector<double> z;
  std::vector<double> objective_values;  // maximization
  double constraint_violation = 0.0;     // 0 = feasible
  double vf = 0.0;
  std::optional<UqResult> uq;            // robust mode
  std::optional<PropertyUq> bulk;        // robust mode with a K objective
  std::array<double, 2> det_prediction{};  // deterministic mode: (E, nu)
};

struct NsgaConfig {
  int population = 64;
  int generations = 100;
  double sbx_eta = 15.0;
  double mutation_eta = 20.0;
  double mutation_prob = 0.0;  // 0 -> 1/d
  double crossover_prob = 0.9;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Core NSGA-II machinery (kept free of the model so the oracle tests can
// drive it directly).
// ---------------------------------------------------------------------------

/// Constraint-dominance for maximization: feasible beats infeasible, lower
/// violation beats higher, otherwise Pareto dominance on the objectives.
bool dominates(const std::vector<double>& obj_a, double viol_a,
               const std::vector<double>& obj_b, double viol_b);

/// Fast non-dominated sort; returns fronts of indices (F1 first).
std::vector<std::vector<std::size_t>> non_dominated_sort(
    const std::vector<std::vector<double>>& objectives,
    const std::vector<double>& violations);

/// Crowding distances for one front (boundaries get +inf; objectives with a
/// degenerate range contribute nothing).
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front);

/// Generic engine driven by an evaluation callback, so benchmark problems can
/// run without a surrogate model. The payload travels with survivors.
struct EvalResult {
  std::vector<double> objectives;  // maximization
  double violation = 0.0;
  std::shared_ptr<void> payload;
};
using EvalFn =
    std::function<EvalResult(const std::vector<double>& z, int gen, std::size_t idx)>;

struct CoreIndividual {
  std::vector<double> z;
  std::vector<double> objectives;
  double violation = 0.0;
  std::shared_ptr<void> payload;
};

/// SBX + polynomial mutation + binary tournament + elitist truncation; the
/// callback is invoked in parallel with per-individual determinism. Returns
/// the final population.
std::vector<CoreIndividual> nsga2_optimize(
    const std::vector<std::pair<double, double>>& bounds, const EvalFn& eval,
    const NsgaConfig& cfg);

// ---------------------------------------------------------------------------
// Problem plumbing
// ---------------------------------------------------------------------------

/// Per-dimension extrema of a set of latent vectors. Throws EmptyDataset for
/// fewer than two vectors and DegenerateBounds when a dimension collapses.
std::vector<std::pair<double, double>> latent_bounds(
    const std::vector<std::vector<double>>& encodings);

/// mu - beta * sigma_total for the selected property.
double robust_objective(const UqResult& uq, PropertySelector selector, double beta);
double robust_objective(const PropertyUq& p, double beta);

/// Decode a latent vector into a cleaned unit: decode -> binarize ->
/// largest_component -> mirror. Returns the full grid.
VoxelGrid decode_unit(const VaeMdnModel& model, const std::vector<double>& z,
                      double threshold = 0.5);

Individual evaluate(const std::vector<double>& z, const VaeMdnModel& model,
                    const DesignProblem& problem, const UqConfig& uq_cfg);

struct ParetoArchive {
  std::vector<Individual> members;  // final first front
  std::vector<VoxelGrid> grids;     // decoded units, parallel to members
};

ParetoArchive nsga2_run(const DesignProblem& problem, const VaeMdnModel& model,
                        const NsgaConfig& nsga_cfg, const UqConfig& uq_cfg);

// ---------------------------------------------------------------------------
// Study drivers
// ---------------------------------------------------------------------------

struct BetaSweepRow {
  double beta = 0.0;
  Individual winner;
  VoxelGrid grid;
  double fea_E = 0.0, fea_nu = 0.0, fea_K = 0.0;
};

/// Single-objective bulk-modulus optimization per beta, each winner verified
/// by the homogenizer at the base material.
std::vector<BetaSweepRow> beta_sweep(const DesignProblem& problem_template,
                                     const std::vector<double>& betas,
                                     const VaeMdnModel& model, const NsgaConfig& nsga_cfg,
                                     const UqConfig& uq_cfg, const MaterialSample& base,
                                     const SolverConfig& solver_cfg = {});

struct CompareCandidate {
  bool robust_arm = false;
  std::vector<double> z;
  std::array<double, 2> robust_scores{};  // mu - beta sigma for E and nu
  double fea_E = 0.0, fea_nu = 0.0;
  double cv_E = 0.0, cv_nu = 0.0;  // percent, from FEA material-noise replicates
  bool dominated_or_tied = false;  // deterministic candidates only
};

struct ParetoCompareReport {
  std::vector<CompareCandidate> candidates;
  double median_cv_E_robust = 0.0, median_cv_E_det = 0.0;
  double median_cv_nu_robust = 0.0, median_cv_nu_det = 0.0;
  double fraction_det_dominated = 0.0;
};

/// Re-score both archives under the robust objective with a common seed,
/// FEA-verify every candidate with material-noise replicates, and report CV
/// and dominance statistics.
ParetoCompareReport pareto_compare(const ParetoArchive& robust_archive,
                                   const ParetoArchive& det_archive,
                                   const VaeMdnModel& model, double beta,
                                   const UqConfig& uq_cfg, const MaterialSample& base,
                                   int fea_replicates, std::uint64_t seed,
                                   const SolverConfig& solver_cfg = {});

void write_archive_csv(const std::filesystem::path& path, const std::string& case_name,
                       double beta, const std::vector<BetaSweepRow>& rows,
                       const std::string& run_id = "");
void write_archive_csv(const std::filesystem::path& path, const std::string& case_name,
                       double beta, const ParetoArchive& archive,
                       const std::vector<std::array<double, 3>>& fea,
                       const std::string& run_id = "");

}  // namespace metaforge
