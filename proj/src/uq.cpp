#include "metaforge/uq.hpp"

#include <cmath>

#include <json.hpp>

#include "metaforge/io.hpp"

namespace metaforge {

namespace {

PropertyUq aggregate_one(const std::vector<double>& mus, const std::vector<double>& sigmas,
                         bool variance_mean) {
  const double n = static_cast<double>(mus.size());
  PropertyUq out;
  for (double m : mus) out.mean += m;
  out.mean /= n;
  if (variance_mean) {
    double acc = 0.0;
    for (double s : sigmas) acc += s * s;
    out.aleatoric = std::sqrt(acc / n);
  } else {
    for (double s : sigmas) out.aleatoric += s;
    out.aleatoric /= n;
  }
  double var = 0.0;
  for (double m : mus) var += (m - out.mean) * (m - out.mean);
  out.epistemic = std::sqrt(var / (n - 1.0));
  out.total = std::sqrt(out.aleatoric * out.aleatoric + out.epistemic * out.epistemic);
  return out;
}

}  // namespace

UqResult aggregate(const std::vector<MdnPrediction>& samples,
                   bool aleatoric_variance_mean) {
  if (samples.size() < 2) throw InsufficientSamples("need at least 2 samples");
  std::vector<double> muE, sgE, muNu, sgNu;
  muE.reserve(samples.size());
  for (const auto& s : samples) {
    muE.push_back(s.means[0]);
    sgE.push_back(s.stds[0]);
    muNu.push_back(s.means[1]);
    sgNu.push_back(s.stds[1]);
  }
  UqResult out;
  out.E = aggregate_one(muE, sgE, aleatoric_variance_mean);
  out.nu = aggregate_one(muNu, sgNu, aleatoric_variance_mean);
  return out;
}

UqOutcome predict_with_uncertainty(const VaeMdnModel& model,
                                   const std::vector<double>& z_mean,
                                   const UqConfig& cfg) {
  if (cfg.n_samples < 2) throw InsufficientSamples("n_samples must be >= 2");
  UqOutcome out;

  // reconstruct, (optionally) binarize, and re-encode to capture the model's
  // own uncertainty about the structure
  EighthCell decoded = model.decode(z_mean);
  if (cfg.binarize_before_reencode)
    for (double& v : decoded.occupancy)
      v = v >= cfg.binarize_threshold ? 1.0 : 0.0;
  out.reencoded = model.encode(decoded);

  Rng rng = Rng::substream(cfg.seed, {0x0u});
  std::vector<std::vector<double>> zs(static_cast<std::size_t>(cfg.n_samples));
  for (auto& z : zs) {
    z.resize(out.reencoded.mean.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      z[i] = out.reencoded.mean[i] + out.reencoded.std[i] * rng.normal();
  }
  out.samples = model.mdn_predict_batch(zs);
  out.result = aggregate(out.samples, cfg.aleatoric_variance_mean);
  return out;
}

UqOutcome predict_with_uncertainty(const VaeMdnModel& model, const EighthCell& start,
                                   const UqConfig& cfg) {
  return predict_with_uncertainty(model, model.encode(start).mean, cfg);
}

UqOutcome predict_with_uncertainty(const VaeMdnModel& model, const VoxelGrid& start,
                                   const UqConfig& cfg) {
  const int e = model.config().input_edge;
  if (start.edge_voxels == e) {
    EighthCell cell;
    cell.edge_voxels = e;
    cell.occupancy = start.occupancy;
    return predict_with_uncertainty(model, cell, cfg);
  }
  if (start.edge_voxels == 2 * e)
    return predict_with_uncertainty(model, extract_octant(start), cfg);
  throw ShapeMismatch("grid edge " + std::to_string(start.edge_voxels) +
                      " does not match model input " + std::to_string(e));
}

PropertyUq aggregate_bulk(const std::vector<MdnPrediction>& samples, std::uint64_t seed,
                          int inner_draws, bool aleatoric_variance_mean) {
  if (samples.size() < 2) throw InsufficientSamples("need at least 2 samples");
  if (inner_draws < 2) throw InsufficientSamples("inner_draws must be >= 2");
  std::vector<double> mus, sigmas;
  mus.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng = Rng::substream(seed, {0xb01f, i});
    double mean = 0.0, m2 = 0.0;
    std::vector<double> ks(static_cast<std::size_t>(inner_draws));
    for (int j = 0; j < inner_draws; ++j) {
      const double E = samples[i].means[0] + samples[i].stds[0] * rng.normal();
      const double nu = samples[i].means[1] + samples[i].stds[1] * rng.normal();
      const double denom = std::max(1.0 - 2.0 * nu, 1e-9);
      ks[static_cast<std::size_t>(j)] = E / (3.0 * denom);
    }
    for (double k : ks) mean += k;
    mean /= static_cast<double>(inner_draws);
    for (double k : ks) m2 += (k - mean) * (k - mean);
    mus.push_back(mean);
    sigmas.push_back(std::sqrt(m2 / static_cast<double>(inner_draws - 1)));
  }
  return aggregate_one(mus, sigmas, aleatoric_variance_mean);
}

std::vector<ConvergenceRow> convergence_sweep(const VaeMdnModel& model,
                                              const std::vector<double>& z_mean,
                                              const std::vector<int>& n_values,
                                              const UqConfig& cfg) {
  if (n_values.empty()) throw InvalidArgument("n_values is empty");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 2) throw InvalidArgument("each N must be >= 2");
    if (i > 0 && n_values[i] <= n_values[i - 1])
      throw InvalidArgument("n_values must ascend");
  }
  std::vector<ConvergenceRow> rows;
  for (int n : n_values) {
    UqConfig sub = cfg;
    sub.n_samples = n;
    sub.seed = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(n)}).next();
    ConvergenceRow row;
    row.n = n;
    row.result = predict_with_uncertainty(model, z_mean, sub).result;
    rows.push_back(row);
  }
  return rows;
}

std::string uq_result_to_json(const UqResult& result, const std::string& run_id) {
  nlohmann::json j;
  auto prop = [](const PropertyUq& p) {
    return nlohmann::json{{"mean", p.mean},
                          {"aleatoric", p.aleatoric},
                          {"epistemic", p.epistemic},
                          {"total", p.total}};
  };
  j["E"] = prop(result.E);
  j["nu"] = prop(result.nu);
  if (!run_id.empty()) j["run"] = run_id;
  return j.dump(2);
}

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<ConvergenceRow>& rows,
                           const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = {"N", "total_E", "total_nu"};
  for (const auto& r : rows)
    table.rows.push_back({std::to_string(r.n), format_double(r.result.E.total),
                          format_double(r.result.nu.total)});
  write_csv(path, table);
}

}  // namespace metaforge
