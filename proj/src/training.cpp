#include "metaforge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "metaforge/io.hpp"

namespace metaforge {

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest,
                                             const SplitSpec& spec) {
  const std::size_t n = manifest.rows.size();
  if (n == 0) throw EmptyDataset("cannot split an empty manifest");
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
    throw InvalidArgument("split fractions must sum to 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::substream(spec.seed, {0x517});
  rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(spec.train_frac * n);
  const std::size_t n_val = static_cast<std::size_t>(spec.val_frac * n);
  std::array<DatasetManifest, 3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const ManifestRow& row = manifest.rows[order[i]];
    if (i < n_train)
      out[0].rows.push_back(row);
    else if (i < n_train + n_val)
      out[1].rows.push_back(row);
    else
      out[2].rows.push_back(row);
  }
  return out;
}

DatasetManifest downselect(const DatasetManifest& train,
                           const std::map<std::string, double>& nu_by_id,
                           const DownselectSpec& spec) {
  if (!(spec.keep_fraction > 0.0 && spec.keep_fraction <= 1.0))
    throw InvalidArgument("keep_fraction must lie in (0,1]");
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    auto it = nu_by_id.find(train.rows[i].id);
    if (it == nu_by_id.end())
      throw InvalidArgument("missing label for " + train.rows[i].id);
    if (it->second > 0.0) positives.push_back(i);
  }
  const std::size_t keep =
      static_cast<std::size_t>(spec.keep_fraction * static_cast<double>(positives.size()));
  Rng rng = Rng::substream(spec.seed, {0xD01});
  rng.shuffle(positives);
  positives.resize(keep);
  std::vector<bool> keep_row(train.rows.size(), true);
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    auto it = nu_by_id.find(train.rows[i].id);
    if (it->second > 0.0) keep_row[i] = false;
  }
  for (std::size_t i : positives) keep_row[i] = true;
  DatasetManifest out;
  for (std::size_t i = 0; i < train.rows.size(); ++i)
    if (keep_row[i]) out.rows.push_back(train.rows[i]);
  return out;
}

TrainData assemble_training_data(const DatasetManifest& manifest,
                                 const std::vector<LabeledRow>& labels,
                                 const std::filesystem::path& data_dir) {
  std::map<std::string, const LabeledRow*> by_id;
  for (const auto& l : labels)
    if (l.ok) by_id[l.unit.id] = &l;
  TrainData data;
  for (const auto& row : manifest.rows) {
    auto it = by_id.find(row.id);
    if (it == by_id.end()) continue;
    TrainItem item;
    item.id = row.id;
    VoxelGrid grid = load_voxel(data_dir / row.voxel_path);
    if (!grid.binary_flag) grid = binarize(grid, 0.5);
    item.cell = extract_octant(grid);
    item.E = it->second->E_mean;
    item.nu = it->second->nu_mean;
    item.E_std = it->second->E_std;
    item.nu_std = it->second->nu_std;
    data.items.push_back(std::move(item));
  }
  return data;
}

LabelNorm compute_label_norm(const TrainData& train) {
  if (train.items.empty()) throw EmptyDataset("no training items");
  LabelNorm norm;
  const double n = static_cast<double>(train.items.size());
  double mE = 0, mNu = 0;
  for (const auto& it : train.items) {
    mE += it.E;
    mNu += it.nu;
  }
  mE /= n;
  mNu /= n;
  double vE = 0, vNu = 0;
  for (const auto& it : train.items) {
    vE += (it.E - mE) * (it.E - mE);
    vNu += (it.nu - mNu) * (it.nu - mNu);
  }
  norm.mean = {mE, mNu};
  norm.scale = {std::max(std::sqrt(vE / n), 1e-9 * std::max(1.0, std::abs(mE))),
                std::max(std::sqrt(vNu / n), 1e-9)};
  return norm;
}

// ---------------------------------------------------------------------------
// Forward evaluation
// ---------------------------------------------------------------------------

namespace {

Tensor batch_inputs(const TrainData& data, const std::vector<std::size_t>& idx,
                    int edge) {
  const std::size_t vol = static_cast<std::size_t>(edge) * edge * edge;
  Tensor x({static_cast<int>(idx.size()), 1, edge, edge, edge});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const EighthCell& c = data.items[idx[k]].cell;
    if (c.edge_voxels != edge)
      throw ShapeMismatch("item edge " + std::to_string(c.edge_voxels));
    std::copy(c.occupancy.begin(), c.occupancy.end(), x.v.begin() + k * vol);
  }
  return x;
}

Tensor batch_labels(const TrainData& data, const std::vector<std::size_t>& idx,
                    const LabelNorm& norm, Rng* noise) {
  Tensor y({static_cast<int>(idx.size()), 2});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const TrainItem& it = data.items[idx[k]];
    double E = it.E, nu = it.nu;
    if (noise) {
      E += it.E_std * noise->normal();
      nu += it.nu_std * noise->normal();
    }
    const auto z = norm.normalize(E, nu);
    y.v[2 * k] = z[0];
    y.v[2 * k + 1] = z[1];
  }
  return y;
}

struct LossNodes {
  int total = -1, recon = -1, kl = -1, nll = -1;
};

// Shared loss expression for one batch. The MDN head consumes the latent
// mean; the decoder consumes the reparameterized sample.
LossNodes build_loss_graph(const VaeMdnModel& model, const VaeMdnModel::Binding& b,
                           int x, int y, int xi, const LossWeights& w) {
  Tape& t = *b.tape;
  const int batch = t.val(x).shape[0];
  LossNodes nodes;
  const auto enc = model.encode_graph(b, x);
  const int stddev = t.exp_op(t.scale(enc.logvar, 0.5));
  const int z = t.add(enc.mean, t.mul(stddev, xi));
  const int xhat = model.decode_graph(b, z);
  nodes.recon = t.mse(xhat, x);

  // KL(N(mu, sigma^2) || N(0, I)) = 0.5 sum(mu^2 + sigma^2 - 1 - log sigma^2)
  const int mu2 = t.mul(enc.mean, enc.mean);
  const int var = t.exp_op(enc.logvar);
  const int inner = t.add_scalar(t.sub(t.add(mu2, var), enc.logvar), -1.0);
  nodes.kl = t.scale(t.reduce_sum(inner), 0.5 / static_cast<double>(batch));

  int total = t.scale(nodes.recon, w.alpha1);
  if (w.alpha2 != 0.0) total = t.add(total, t.scale(nodes.kl, w.alpha2));
  if (w.alpha3 != 0.0) {
    const int raw = model.mdn_raw_graph(b, enc.mean);
    const int mu = t.slice_cols(raw, 0, 2);
    const int sigma = t.add_scalar(t.exp_op(t.slice_cols(raw, 2, 4)), 1e-6);
    const int r = t.div(t.sub(y, mu), sigma);
    const int terms =
        t.add_scalar(t.add(t.log_op(sigma), t.scale(t.mul(r, r), 0.5)),
                     0.5 * std::log(2.0 * std::numbers::pi));
    nodes.nll = t.scale(t.reduce_sum(terms), 1.0 / static_cast<double>(batch));
    total = t.add(total, t.scale(nodes.nll, w.alpha3));
  }
  nodes.total = total;
  return nodes;
}

}  // namespace

LossTriple evaluate_losses(const VaeMdnModel& model, const TrainData& data) {
  if (data.items.empty()) throw EmptyDataset("nothing to evaluate");
  const int edge = model.config().input_edge;
  const LabelNorm& norm = model.label_norm();
  LossTriple acc;
  const std::size_t chunk = 32;
  std::size_t done = 0;
  for (std::size_t start = 0; start < data.items.size(); start += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + chunk, data.items.size()); ++i)
      idx.push_back(i);
    Tape tape;
    auto b = model.bind(tape, {"enc.", "dec.", "mdn."});
    const int x = tape.leaf(batch_inputs(data, idx, edge));
    const auto enc = model.encode_graph(b, x);
    const int xhat = model.decode_graph(b, enc.mean);
    const int raw = model.mdn_raw_graph(b, enc.mean);

    const Tensor& xv = tape.val(x);
    const Tensor& xh = tape.val(xhat);
    double recon = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double d = xv.v[i] - xh.v[i];
      recon += d * d;
    }
    recon /= static_cast<double>(xv.size());

    const Tensor& mean = tape.val(enc.mean);
    const Tensor& logvar = tape.val(enc.logvar);
    double kl = 0;
    for (std::size_t i = 0; i < mean.size(); ++i)
      kl += 0.5 * (mean.v[i] * mean.v[i] + std::exp(logvar.v[i]) - 1.0 - logvar.v[i]);
    kl /= static_cast<double>(idx.size());

    const Tensor& rv = tape.val(raw);
    double nll = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const TrainItem& it = data.items[idx[k]];
      const auto y = norm.normalize(it.E, it.nu);
      for (int p = 0; p < 2; ++p) {
        const double mu = rv.v[4 * k + p];
        const double sg = 1e-6 + std::exp(rv.v[4 * k + 2 + p]);
        const double d = y[p] - mu;
        nll += 0.5 * std::log(2.0 * std::numbers::pi * sg * sg) + d * d / (2.0 * sg * sg);
      }
    }
    nll /= static_cast<double>(idx.size());

    const double wgt = static_cast<double>(idx.size());
    acc.recon += recon * wgt;
    acc.kl += kl * wgt;
    acc.nll += nll * wgt;
    done += idx.size();
  }
  acc.recon /= static_cast<double>(done);
  acc.kl /= static_cast<double>(done);
  acc.nll /= static_cast<double>(done);
  return acc;
}

// ---------------------------------------------------------------------------
// run_phase
// ---------------------------------------------------------------------------

TrainReport run_phase(VaeMdnModel& model, const LossWeights& weights,
                      const TrainData& train, const TrainData& val, int epochs,
                      int patience, const TrainOptions& opts) {
  if (train.items.empty() || val.items.empty())
    throw EmptyDataset("run_phase needs train and val items");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const int edge = model.config().input_edge;
  const int d = model.config().latent_dim;

  AdamState adam;
  TrainReport report;
  std::vector<Tensor> best_params = model.params();
  double best_total = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train.items.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    adam.learning_rate = decay_rate(opts.lr, epoch);
    Rng shuffle_rng = Rng::substream(opts.seed, {0x5501, static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    Rng label_rng = Rng::substream(opts.seed, {0x5502, static_cast<std::uint64_t>(epoch)});
    Rng noise_rng = Rng::substream(opts.seed, {0x5503, static_cast<std::uint64_t>(epoch)});

    double ep_recon = 0, ep_kl = 0, ep_nll = 0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      std::vector<std::size_t> idx(
          order.begin() + start,
          order.begin() + std::min(start + static_cast<std::size_t>(opts.batch_size),
                                   order.size()));
      Tape tape;
      auto b = model.bind(tape, {"enc.", "dec.", "mdn."});
      const int x = tape.leaf(batch_inputs(train, idx, edge));
      const int y = tape.leaf(batch_labels(train, idx, model.label_norm(),
                                           opts.resample_label_noise ? &label_rng
                                                                     : nullptr));
      Tensor xi({static_cast<int>(idx.size()), d});
      for (double& v : xi.v) v = noise_rng.normal();
      const int xin = tape.leaf(std::move(xi));

      const LossNodes nodes = build_loss_graph(model, b, x, y, xin, weights);
      const double total = tape.val(nodes.total).v[0];
      if (!std::isfinite(total)) throw NumericalDivergence("training loss not finite");
      tape.backward(nodes.total);

      std::vector<Tensor*> params;
      std::vector<const Tensor*> grads;
      params.reserve(model.params().size());
      for (std::size_t k = 0; k < model.params().size(); ++k) {
        if (b.ids[k] < 0) continue;  // frozen subtree (deterministic head)
        params.push_back(&model.params()[k]);
        grads.push_back(&tape.grad(b.ids[k]));
      }
      adam_step(adam, params, grads);

      ep_recon += tape.val(nodes.recon).v[0];
      ep_kl += tape.val(nodes.kl).v[0];
      if (nodes.nll >= 0) ep_nll += tape.val(nodes.nll).v[0];
      ++n_batches;
    }

    const LossTriple vl = evaluate_losses(model, val);
    const double val_total =
        weights.alpha1 * vl.recon + weights.alpha2 * vl.kl + weights.alpha3 * vl.nll;
    if (!std::isfinite(val_total))
      throw NumericalDivergence("validation loss not finite");

    TrainReport::EpochRow row;
    row.train_recon = ep_recon / static_cast<double>(n_batches);
    row.train_kl = ep_kl / static_cast<double>(n_batches);
    row.train_nll = ep_nll / static_cast<double>(n_batches);
    row.val_recon = vl.recon;
    row.val_kl = vl.kl;
    row.val_nll = vl.nll;
    row.val_total = val_total;
    report.epochs.push_back(row);

    if (val_total < best_total) {
      best_total = val_total;
      best_params = model.params();
      report.best_epoch = epoch;
      stall = 0;
    } else {
      ++stall;
      if (stall >= patience) break;
    }
  }

  model.params() = std::move(best_params);
  report.best_val_total = best_total;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Progressive schedule
// ---------------------------------------------------------------------------

namespace {

PhaseRung make_rung(const std::string& phase, int rung, const LossWeights& w,
                    const VaeMdnModel& model, const TrainData& train,
                    const TrainData& val, const TrainReport& report) {
  PhaseRung out;
  out.phase = phase;
  out.rung = rung;
  out.alpha1 = w.alpha1;
  out.alpha2 = w.alpha2;
  out.alpha3 = w.alpha3;
  out.latent_dim = model.config().latent_dim;
  const LossTriple tr = evaluate_losses(model, train);
  const LossTriple vl = evaluate_losses(model, val);
  out.train_recon = tr.recon;
  out.val_recon = vl.recon;
  out.train_kl = tr.kl;
  out.val_kl = vl.kl;
  out.train_nll = tr.nll;
  out.val_nll = vl.nll;
  out.epochs = static_cast<int>(report.epochs.size());
  out.seconds = report.seconds;
  return out;
}

}  // namespace

ScheduleResult progressive_schedule(const TrainData& train, const TrainData& val,
                                    const ModelConfig& base_config,
                                    const PhaseSchedule& schedule,
                                    const TrainOptions& opts) {
  if (schedule.step1_latent_dims.empty() || schedule.step2_alpha2.empty() ||
      schedule.step3_alpha3.empty())
    throw InvalidArgument("schedule ladders must be non-empty");
  for (std::size_t i = 1; i < schedule.step2_alpha2.size(); ++i)
    if (schedule.step2_alpha2[i] <= schedule.step2_alpha2[i - 1])
      throw InvalidArgument("alpha2 ladder must increase");
  for (std::size_t i = 1; i < schedule.step3_alpha3.size(); ++i)
    if (schedule.step3_alpha3[i] <= schedule.step3_alpha3[i - 1])
      throw InvalidArgument("alpha3 ladder must increase");

  const LabelNorm norm = compute_label_norm(train);
  ScheduleResult result;

  // ---- step 1: latent dimensionality at (1, 0, 0)
  std::vector<VaeMdnModel> candidates;
  std::vector<double> recon_by_dim;
  for (std::size_t i = 0; i < schedule.step1_latent_dims.size(); ++i) {
    ModelConfig cfg = base_config;
    cfg.latent_dim = schedule.step1_latent_dims[i];
    VaeMdnModel model(cfg, Rng::substream(opts.seed, {0xA11, static_cast<std::uint64_t>(
                                                                 cfg.latent_dim)})
                               .next());
    model.label_norm() = norm;
    const LossWeights w{1.0, 0.0, 0.0};
    const TrainReport report =
        run_phase(model, w, train, val, schedule.epochs_per_phase, schedule.patience, opts);
    PhaseRung rung = make_rung("step1", static_cast<int>(i), w, model, train, val, report);
    recon_by_dim.push_back(rung.val_recon);
    result.ledger.push_back(rung);
    candidates.push_back(std::move(model));
  }
  const double best_recon = *std::min_element(recon_by_dim.begin(), recon_by_dim.end());
  std::size_t pick = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (recon_by_dim[i] <= best_recon * (1.0 + schedule.selection_slack)) {
      pick = i;
      break;  // dims are listed ascending: first hit is the smallest
    }
  result.ledger[pick].selected = true;
  VaeMdnModel model = std::move(candidates[pick]);
  candidates.clear();
  result.selected_latent_dim = model.config().latent_dim;

  // ---- step 2: alpha2 ladder, warm-started rung to rung
  std::vector<std::vector<Tensor>> snapshots;
  std::vector<PhaseRung> rungs2;
  for (std::size_t i = 0; i < schedule.step2_alpha2.size(); ++i) {
    const LossWeights w{1.0, schedule.step2_alpha2[i], 0.0};
    const TrainReport report =
        run_phase(model, w, train, val, schedule.epochs_per_phase, schedule.patience, opts);
    rungs2.push_back(make_rung("step2", static_cast<int>(i), w, model, train, val, report));
    snapshots.push_back(model.params());
  }
  {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rungs2) best = std::min(best, r.val_recon);
    std::size_t sel = 0;
    double best_kl = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rungs2.size(); ++i)
      if (rungs2[i].val_recon <= best * (1.0 + schedule.selection_slack) &&
          rungs2[i].val_kl < best_kl) {
        best_kl = rungs2[i].val_kl;
        sel = i;
      }
    rungs2[sel].selected = true;
    result.selected_alpha2 = schedule.step2_alpha2[sel];
    model.params() = snapshots[sel];
    for (auto& r : rungs2) result.ledger.push_back(r);
  }
  snapshots.clear();

  // ---- step 3: alpha3 ladder
  std::vector<PhaseRung> rungs3;
  for (std::size_t i = 0; i < schedule.step3_alpha3.size(); ++i) {
    const LossWeights w{1.0, result.selected_alpha2, schedule.step3_alpha3[i]};
    const TrainReport report =
        run_phase(model, w, train, val, schedule.epochs_per_phase, schedule.patience, opts);
    rungs3.push_back(make_rung("step3", static_cast<int>(i), w, model, train, val, report));
    snapshots.push_back(model.params());
  }
  {
    // three-way balance: smallest rank sum over (recon, kl, nll), KL breaking ties
    auto rank_of = [&](auto key) {
      std::vector<std::size_t> idx(rungs3.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return key(rungs3[a]) < key(rungs3[b]); });
      std::vector<int> rank(rungs3.size());
      for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = static_cast<int>(r);
      return rank;
    };
    const auto r1 = rank_of([](const PhaseRung& r) { return r.val_recon; });
    const auto r2 = rank_of([](const PhaseRung& r) { return r.val_kl; });
    const auto r3 = rank_of([](const PhaseRung& r) { return r.val_nll; });
    std::size_t sel = 0;
    int best_sum = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < rungs3.size(); ++i) {
      const int sum = r1[i] + r2[i] + r3[i];
      if (sum < best_sum ||
          (sum == best_sum && rungs3[i].val_kl < rungs3[sel].val_kl)) {
        best_sum = sum;
        sel = i;
      }
    }
    rungs3[sel].selected = true;
    result.selected_alpha3 = schedule.step3_alpha3[sel];
    model.params() = snapshots[sel];
    for (auto& r : rungs3) result.ledger.push_back(r);
  }

  result.model = std::move(model);
  return result;
}

CompareReport compare_from_scratch(const TrainData& train, const TrainData& val,
                                   const ModelConfig& base_config,
                                   const PhaseSchedule& schedule,
                                   const TrainOptions& opts, VaeMdnModel* schedule_model,
                                   VaeMdnModel* scratch_model) {
  CompareReport report;
  ScheduleResult sched = progressive_schedule(train, val, base_config, schedule, opts);
  for (const auto& r : sched.ledger)
    if (r.phase == "step3" && r.selected) report.schedule_arm = r;
  report.schedule_arm.phase = "schedule";
  double total_seconds = 0;
  for (const auto& r : sched.ledger) total_seconds += r.seconds;
  report.schedule_arm.seconds = total_seconds;
  report.schedule_ledger = sched.ledger;

  // from-scratch arm: random init straight at the final weights, same seed
  ModelConfig cfg = base_config;
  cfg.latent_dim = sched.selected_latent_dim;
  VaeMdnModel scratch(cfg, Rng::substream(opts.seed, {0xB22}).next());
  scratch.label_norm() = compute_label_norm(train);
  const LossWeights w{1.0, sched.selected_alpha2, sched.selected_alpha3};
  const TrainReport scratch_run = run_phase(scratch, w, train, val,
                                            schedule.epochs_per_phase, schedule.patience,
                                            opts);
  report.scratch_arm = make_rung("scratch", 0, w, scratch, train, val, scratch_run);

  if (schedule_model) *schedule_model = std::move(sched.model);
  if (scratch_model) *scratch_model = std::move(scratch);
  return report;
}

// ---------------------------------------------------------------------------
// Deterministic head
// ---------------------------------------------------------------------------

TrainReport train_deterministic_head(VaeMdnModel& model, const TrainData& train,
                                     const TrainData& val, int epochs, int patience,
                                     const TrainOptions& opts) {
  if (!model.config().deterministic_head)
    throw InvalidArgument("model has no deterministic head");
  const auto t0 = std::chrono::steady_clock::now();

  // frozen encoder: cache latent means once
  auto encode_all = [&](const TrainData& data) {
    std::vector<const EighthCell*> cells;
    for (const auto& it : data.items) cells.push_back(&it.cell);
    return model.encode_batch(cells);
  };
  const auto ztr = encode_all(train);
  const auto zval = encode_all(val);
  const int d = model.config().latent_dim;

  std::vector<std::size_t> det_idx;
  for (std::size_t k = 0; k < model.param_names().size(); ++k)
    if (model.param_names()[k].rfind("det.", 0) == 0) det_idx.push_back(k);

  AdamState adam;
  TrainReport report;
  std::vector<Tensor> best;
  for (std::size_t k : det_idx) best.push_back(model.params()[k]);
  double best_val = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train.items.size());
  std::iota(order.begin(), order.end(), 0);

  auto val_mse = [&]() {
    Tape tape;
    auto b = model.bind(tape, {"det."});
    Tensor z({static_cast<int>(zval.size()), d});
    Tensor y({static_cast<int>(zval.size()), 2});
    for (std::size_t k = 0; k < zval.size(); ++k) {
      std::copy(zval[k].mean.begin(), zval[k].mean.end(), z.v.begin() + k * d);
      const auto yn = model.label_norm().normalize(val.items[k].E, val.items[k].nu);
      y.v[2 * k] = yn[0];
      y.v[2 * k + 1] = yn[1];
    }
    const int raw = model.det_raw_graph(b, tape.leaf(std::move(z)));
    const Tensor& rv = tape.val(raw);
    double acc = 0;
    for (std::size_t i = 0; i < rv.size(); ++i) {
      const double dd = rv.v[i] - y.v[i];
      acc += dd * dd;
    }
    return acc / static_cast<double>(rv.size());
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    adam.learning_rate = decay_rate(opts.lr, epoch);
    Rng shuffle_rng = Rng::substream(opts.seed, {0xDE7, static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    Rng label_rng = Rng::substream(opts.seed, {0xDE8, static_cast<std::uint64_t>(epoch)});
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      std::vector<std::size_t> idx(
          order.begin() + start,
          order.begin() + std::min(start + static_cast<std::size_t>(opts.batch_size),
                                   order.size()));
      Tape tape;
      auto b = model.bind(tape, {"det."});
      Tensor z({static_cast<int>(idx.size()), d});
      for (std::size_t k = 0; k < idx.size(); ++k)
        std::copy(ztr[idx[k]].mean.begin(), ztr[idx[k]].mean.end(), z.v.begin() + k * d);
      const int raw = model.det_raw_graph(b, tape.leaf(std::move(z)));
      const int y = tape.leaf(batch_labels(train, idx, model.label_norm(),
                                           opts.resample_label_noise ? &label_rng
                                                                     : nullptr));
      const int loss = tape.mse(raw, y);
      if (!std::isfinite(tape.val(loss).v[0]))
        throw NumericalDivergence("deterministic head loss not finite");
      tape.backward(loss);
      std::vector<Tensor*> params;
      std::vector<const Tensor*> grads;
      for (std::size_t k : det_idx) {
        params.push_back(&model.params()[k]);
        grads.push_back(&tape.grad(b.ids[k]));
      }
      adam_step(adam, params, grads);
    }
    const double v = val_mse();
    TrainReport::EpochRow row;
    row.val_total = v;
    report.epochs.push_back(row);
    if (v < best_val) {
      best_val = v;
      best.clear();
      for (std::size_t k : det_idx) best.push_back(model.params()[k]);
      report.best_epoch = epoch;
      stall = 0;
    } else if (++stall >= patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < det_idx.size(); ++i)
    model.params()[det_idx[i]] = best[i];
  report.best_val_total = best_val;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_phase_ledger(const std::filesystem::path& path,
                        const std::vector<PhaseRung>& rungs, const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = {"phase",    "rung",     "alpha1",   "alpha2",   "alpha3",
                  "latent_dim", "train_recon", "val_recon", "train_kl", "val_kl",
                  "train_nll", "val_nll",  "epochs",   "seconds",  "selected"};
  for (const auto& r : rungs)
    table.rows.push_back({r.phase, std::to_string(r.rung), format_double(r.alpha1),
                          format_double(r.alpha2), format_double(r.alpha3),
                          std::to_string(r.latent_dim), format_double(r.train_recon),
                          format_double(r.val_recon), format_double(r.train_kl),
                          format_double(r.val_kl), format_double(r.train_nll),
                          format_double(r.val_nll), std::to_string(r.epochs),
                          format_double(r.seconds), r.selected ? "1" : "0"});
  write_csv(path, table);
}

}  // namespace metaforge
