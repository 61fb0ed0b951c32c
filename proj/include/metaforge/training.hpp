#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metaforge/generators.hpp"
#include "metaforge/homogenize.hpp"
#include "metaforge/model.hpp"
#include "metaforge/optim.hpp"

namespace metaforge {

struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
};

struct DownselectSpec {
  double keep_fraction = 0.6;  // of positive-nu training rows
  std::uint64_t seed = 0;
};

struct PhaseSchedule {
  std::vector<int> step1_latent_dims = {4, 16, 32, 48, 64};
  std::vector<double> step2_alpha2 = {5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 1.0};
  std::vector<double> step3_alpha3 = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  int epochs_per_phase = 400;
  int patience = 10;
  // step-1 keeps the smallest dim whose val recon is within this relative
  // slack of the best; steps 2-3 use the same slack to "preserve" earlier
  // terms while minimizing the newly introduced one.
  double selection_slack = 0.15;
};

struct TrainOptions {
  int batch_size = 16;
  LrSchedule lr;
  std::uint64_t seed = 0;
  bool resample_label_noise = true;  // redraw label noise from (mean, std) each epoch
};

struct TrainReport {
  struct EpochRow {
    double train_recon = 0, train_kl = 0, train_nll = 0;
    double val_recon = 0, val_kl = 0, val_nll = 0;
    double val_total = 0;
  };
  std::vector<EpochRow> epochs;
  int best_epoch = -1;
  double best_val_total = 0;
  double seconds = 0;
};

struct PhaseRung {
  std::string phase;  // "step1" | "step2" | "step3" | "scratch"
  int rung = 0;
  double alpha1 = 1, alpha2 = 0, alpha3 = 0;
  int latent_dim = 0;
  double train_recon = 0, val_recon = 0;
  double train_kl = 0, val_kl = 0;
  double train_nll = 0, val_nll = 0;
  int epochs = 0;
  double seconds = 0;
  bool selected = false;
};

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

/// Seed-deterministic disjoint partition into train/val/test manifests.
std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest,
                                             const SplitSpec& spec);

/// Randomly drop positive-nu rows down to keep_fraction of their count
/// (floor); non-positive rows pass through. Row order is preserved.
DatasetManifest downselect(const DatasetManifest& train,
                           const std::map<std::string, double>& nu_by_id,
                           const DownselectSpec& spec);

struct TrainItem {
  std::string id;
  EighthCell cell;
  double E = 0, nu = 0;
  double E_std = 0, nu_std = 0;
};

struct TrainData {
  std::vector<TrainItem> items;
};

/// Load the eighth cells and labels for every manifest row found in the
/// labeled csv rows.
TrainData assemble_training_data(const DatasetManifest& manifest,
                                 const std::vector<LabeledRow>& labels,
                                 const std::filesystem::path& data_dir);

/// Per-property mean/std of the labels (used to standardize network targets).
LabelNorm compute_label_norm(const TrainData& train);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LossTriple {
  double recon = 0, kl = 0, nll = 0;
};

/// Full-dataset forward evaluation of all three loss terms (z = latent mean,
/// no sampling noise).
LossTriple evaluate_losses(const VaeMdnModel& model, const TrainData& data);

/// Train with Adam + exponential LR decay and patience-based early stopping
/// on the weighted validation loss; the model is left at the best-validation
/// epoch. Throws NumericalDivergence when a loss stops being finite.
TrainReport run_phase(VaeMdnModel& model, const LossWeights& weights,
                      const TrainData& train, const TrainData& val, int epochs,
                      int patience, const TrainOptions& opts);

struct ScheduleResult {
  VaeMdnModel model;
  std::vector<PhaseRung> ledger;
  int selected_latent_dim = 0;
  double selected_alpha2 = 0;
  double selected_alpha3 = 0;
};

/// The three-step progressive schedule: pick the latent dimensionality with
/// reconstruction-only training, then sweep the KL weight, then the property
/// weight; every rung is warm-started from the previous rung's best weights.
ScheduleResult progressive_schedule(const TrainData& train, const TrainData& val,
                                    const ModelConfig& base_config,
                                    const PhaseSchedule& schedule,
                                    const TrainOptions& opts);

struct CompareReport {
  PhaseRung schedule_arm;
  PhaseRung scratch_arm;
  std::vector<PhaseRung> schedule_ledger;
};

/// Progressive schedule vs a single from-scratch run at the final weights,
/// matched seeds and data.
CompareReport compare_from_scratch(const TrainData& train, const TrainData& val,
                                   const ModelConfig& base_config,
                                   const PhaseSchedule& schedule,
                                   const TrainOptions& opts, VaeMdnModel* schedule_model,
                                   VaeMdnModel* scratch_model);

/// Fit the deterministic property head on the frozen latent means (MSE loss);
/// only det.* parameters move.
TrainReport train_deterministic_head(VaeMdnModel& model, const TrainData& train,
                                     const TrainData& val, int epochs, int patience,
                                     const TrainOptions& opts);

void write_phase_ledger(const std::filesystem::path& path,
                        const std::vector<PhaseRung>& rungs,
                        const std::string& run_id = "");

}  // namespace metaforge
