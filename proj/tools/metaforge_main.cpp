// Command-line workbench: dataset generation, homogenization labeling,
// training, evaluation, latent-space tools, and design optimization.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metaforge/io.hpp"
#include "metaforge/metrics.hpp"
#include "metaforge/nsga2.hpp"
#include "metaforge/training.hpp"
#include "metaforge/uq.hpp"
#include "metaforge/workbench.hpp"

namespace fs = std::filesystem;
using namespace metaforge;

namespace {

struct CommonOpts {
  std::string profile = "desk";
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::uint64_t seed = 7;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--profile", opts.profile, "desk or paper")->default_val("desk");
  cmd->add_option("--config", opts.config_file, "key = value config file");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
}

std::string fmt_cmd(const std::string& name, const std::vector<std::string>& args) {
  std::string out = name;
  for (const auto& a : args) out += " " + a;
  return out;
}

RunConfig build_config(const CommonOpts& opts) {
  RunConfig cfg = RunConfig::for_profile(opts.profile);
  if (!opts.config_file.empty()) cfg.load_file(opts.config_file);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("override must look like key=value: " + kv);
    cfg.apply_kv(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

VaeMdnModel load_checkpoint(const std::string& prefix) {
  return VaeMdnModel::load(fs::path(prefix));
}

std::map<std::string, std::vector<double>> read_latents(const fs::path& path) {
  const CsvTable t = read_csv(path);
  std::map<std::string, std::vector<double>> out;
  const int id_col = t.column("id");
  if (id_col < 0) throw IoError("latent csv has no id column");
  for (const auto& row : t.rows) {
    std::vector<double> z;
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (static_cast<int>(c) != id_col) z.push_back(std::stod(row[c]));
    out[row[id_col]] = std::move(z);
  }
  return out;
}

EighthCell load_eighth(const DatasetManifest& manifest, const fs::path& data_dir,
                       const std::string& id) {
  for (const auto& row : manifest.rows)
    if (row.id == id) {
      VoxelGrid g = load_voxel(data_dir / row.voxel_path);
      if (!g.binary_flag) g = binarize(g, 0.5);
      return extract_octant(g);
    }
  throw InvalidArgument("id not found in manifest: " + id);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonOpts& common, int count, int edge) {
  RunConfig cfg = build_config(common);
  if (count >= 0) cfg.generator.count = count;
  if (edge > 0) cfg.generator.edge_voxels = edge;
  cfg.generator.seed = cfg.seed;
  RunRecord run = open_run(fmt_cmd("gen-data", {std::to_string(cfg.generator.count), std::to_string(cfg.generator.edge_voxels)}), cfg);
  fs::create_directories(cfg.dataset_dir);
  int skipped = 0;
  const DatasetManifest manifest =
      build_dataset(cfg.generator, cfg.mix, cfg.dataset_dir, run.id,
                    [&](const std::string& msg) {
                      ++skipped;
                      std::cerr << "warning: " << msg << "\n";
                    });
  const fs::path manifest_path = cfg.dataset_dir / "manifest.csv";
  write_manifest(manifest_path, manifest, run.id);
  run.outputs.push_back(manifest_path.string());
  close_run(run, cfg);
  std::cout << "wrote " << manifest.rows.size() << " units to " << cfg.dataset_dir
            << " (skipped " << skipped << ")\n";
  return 0;
}

int cmd_simulate(const CommonOpts& common, const std::string& manifest_path,
                 const std::string& out_path, int noise_draws) {
  RunConfig cfg = build_config(common);
  if (noise_draws > 0) cfg.noise_draws = noise_draws;
  RunRecord run = open_run(fmt_cmd("simulate", {manifest_path, std::to_string(cfg.noise_draws)}), cfg, {manifest_path});
  const DatasetManifest manifest = read_manifest(manifest_path);
  const fs::path data_dir = fs::path(manifest_path).parent_path();
  const auto rows = label_manifest(manifest, data_dir, cfg.base_material,
                                   cfg.noise_draws, cfg.seed, cfg.solver);
  int warnings = 0;
  for (const auto& r : rows)
    if (!r.ok) {
      ++warnings;
      std::cerr << "warning: " << r.unit.id << ": " << r.error << "\n";
    }
  write_labeled_csv(out_path, rows, run.id);
  run.outputs.push_back(out_path);
  close_run(run, cfg);
  std::cout << "labeled " << (rows.size() - warnings) << "/" << rows.size()
            << " units -> " << out_path << " (warnings " << warnings << ")\n";
  return warnings == static_cast<int>(rows.size()) ? 1 : 0;
}

int cmd_train(const CommonOpts& common, const std::string& labeled_path,
              const std::string& data_dir, const std::string& out_prefix) {
  RunConfig cfg = build_config(common);
  RunRecord run = open_run(fmt_cmd("train", {labeled_path}), cfg, {labeled_path});
  const auto labeled = read_labeled_csv(labeled_path);
  DatasetManifest manifest;
  std::map<std::string, double> nu_by_id;
  for (const auto& l : labeled) {
    manifest.rows.push_back(l.unit);
    nu_by_id[l.unit.id] = l.nu_mean;
  }
  cfg.split.seed = cfg.seed;
  const auto splits = split_dataset(manifest, cfg.split);
  cfg.downselect.seed = cfg.seed;
  const DatasetManifest train_manifest =
      downselect(splits[0], nu_by_id, cfg.downselect);

  const TrainData train = assemble_training_data(train_manifest, labeled, data_dir);
  const TrainData val = assemble_training_data(splits[1], labeled, data_dir);
  cfg.train.seed = cfg.seed;

  ScheduleResult result =
      progressive_schedule(train, val, cfg.model, cfg.schedule, cfg.train);
  train_deterministic_head(result.model, train, val, cfg.schedule.epochs_per_phase,
                           cfg.schedule.patience, cfg.train);

  const fs::path prefix(out_prefix);
  fs::create_directories(prefix.parent_path().empty() ? "." : prefix.parent_path());
  nlohmann::json extra;
  extra["selected"] = {{"latent_dim", result.selected_latent_dim},
                       {"alpha2", result.selected_alpha2},
                       {"alpha3", result.selected_alpha3}};
  extra["phases"] = result.ledger.size();
  result.model.save(prefix, extra.dump(), run.id);
  write_phase_ledger(prefix.string() + ".ledger.csv", result.ledger, run.id);
  for (int s = 0; s < 3; ++s) {
    static const char* names[3] = {"train", "val", "test"};
    write_manifest(prefix.string() + std::string(".split-") + names[s] + ".csv",
                   s == 0 ? train_manifest : splits[s], run.id);
  }
  run.outputs.push_back(prefix.string() + ".params");
  close_run(run, cfg);
  std::cout << "selected d=" << result.selected_latent_dim
            << " alpha2=" << result.selected_alpha2
            << " alpha3=" << result.selected_alpha3 << "; checkpoint at " << out_prefix
            << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& checkpoint,
                 const std::string& labeled_path, const std::string& data_dir,
                 const std::string& split_name, const std::string& out_path) {
  RunConfig cfg = build_config(common);
  RunRecord run = open_run(fmt_cmd("evaluate", {checkpoint, split_name}), cfg, {labeled_path});
  const VaeMdnModel model = load_checkpoint(checkpoint);
  const auto labeled = read_labeled_csv(labeled_path);
  const DatasetManifest split =
      read_manifest(checkpoint + ".split-" + split_name + ".csv");
  const TrainData data = assemble_training_data(split, labeled, data_dir);
  if (data.items.empty()) throw EmptyDataset("no items in split " + split_name);

  std::vector<const EighthCell*> cells;
  for (const auto& it : data.items) cells.push_back(&it.cell);
  const auto codes = model.encode_batch(cells);

  std::vector<std::vector<double>> zs;
  for (const auto& c : codes) zs.push_back(c.mean);
  const auto cells_hat = model.decode_batch(zs);
  const auto preds = model.mdn_predict_batch(zs);

  std::vector<VoxelGrid> orig, recon;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    orig.push_back(mirror_eighth(data.items[i].cell));
    EighthCell bin = cells_hat[i];
    for (double& v : bin.occupancy) v = v >= 0.5 ? 1.0 : 0.0;
    recon.push_back(mirror_eighth(bin));
  }
  std::vector<double> truthE, truthNu, predE, predNu;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    truthE.push_back(data.items[i].E);
    truthNu.push_back(data.items[i].nu);
    predE.push_back(preds[i].means[0]);
    predNu.push_back(preds[i].means[1]);
  }
  const double accuracy = recon_accuracy(orig, recon);
  const double r2E = r_squared(truthE, predE);
  const double r2Nu = r_squared(truthNu, predNu);
  const double rngE = *std::max_element(truthE.begin(), truthE.end()) -
                      *std::min_element(truthE.begin(), truthE.end());
  const double rngNu = *std::max_element(truthNu.begin(), truthNu.end()) -
                       *std::min_element(truthNu.begin(), truthNu.end());
  const double nrmseE = nrmse(truthE, predE, 0.0, rngE);
  const double nrmseNu = nrmse(truthNu, predNu, 0.0, rngNu);

  CsvTable t;
  t.comments.push_back("# run:" + run.id);
  t.header = {"split", "metric", "property", "value", "n"};
  const std::string n = std::to_string(data.items.size());
  t.rows.push_back({split_name, "recon_accuracy", "-", format_double(accuracy), n});
  t.rows.push_back({split_name, "r2", "E", format_double(r2E), n});
  t.rows.push_back({split_name, "r2", "nu", format_double(r2Nu), n});
  t.rows.push_back({split_name, "nrmse", "E", format_double(nrmseE), n});
  t.rows.push_back({split_name, "nrmse", "nu", format_double(nrmseNu), n});
  write_csv(out_path, t);
  run.outputs.push_back(out_path);
  close_run(run, cfg);
  std::cout << "recon_accuracy=" << accuracy << " R2(E)=" << r2E << " R2(nu)=" << r2Nu
            << "\n";
  return 0;
}

int cmd_encode(const CommonOpts& common, const std::string& checkpoint,
               const std::string& manifest_path, const std::string& data_dir,
               const std::string& out_path) {
  RunConfig cfg = build_config(common);
  RunRecord run = open_run(fmt_cmd("encode", {checkpoint, manifest_path}), cfg, {manifest_path});
  const VaeMdnModel model = load_checkpoint(checkpoint);
  const DatasetManifest manifest = read_manifest(manifest_path);
  TrainData data;
  for (const auto& row : manifest.rows) {
    TrainItem item;
    item.id = row.id;
    VoxelGrid g = load_voxel(fs::path(data_dir) / row.voxel_path);
    if (!g.binary_flag) g = binarize(g, 0.5);
    item.cell = extract_octant(g);
    data.items.push_back(std::move(item));
  }
  std::vector<const EighthCell*> cells;
  for (const auto& it : data.items) cells.push_back(&it.cell);
  const auto codes = model.encode_batch(cells);

  CsvTable t;
  t.comments.push_back("# run:" + run.id);
  t.header = {"id"};
  for (int i = 0; i < model.config().latent_dim; ++i)
    t.header.push_back("z" + std::to_string(i));
  for (std::size_t k = 0; k < codes.size(); ++k) {
    std::vector<std::string> row{data.items[k].id};
    for (double v : codes[k].mean) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  write_csv(out_path, t);
  run.outputs.push_back(out_path);
  close_run(run, cfg);
  std::cout << "encoded " << codes.size() << " units -> " << out_path << "\n";
  return 0;
}

int cmd_interp(const CommonOpts& common, const std::string& checkpoint,
               const std::string& manifest_path, const std::string& data_dir,
               const std::string& id1, const std::string& id2, int steps,
               const std::string& out_dir) {
  if (steps < 2) throw InvalidArgument("steps must be >= 2");
  RunConfig cfg = build_config(common);
  RunRecord run = open_run(fmt_cmd("interp", {id1, id2, std::to_string(steps)}), cfg, {manifest_path});
  const VaeMdnModel model = load_checkpoint(checkpoint);
  const DatasetManifest manifest = read_manifest(manifest_path);
  const auto z1 = model.encode(load_eighth(manifest, data_dir, id1)).mean;
  const auto z2 = model.encode(load_eighth(manifest, data_dir, id2)).mean;
  fs::create_directories(out_dir);
  for (int s = 0; s < steps; ++s) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
    const auto z = slerp(z1, z2, t);
    const EighthCell cell = model.decode(z);
    VoxelGrid grid = mirror_eighth(cell);
    char name[32];
    std::snprintf(name, sizeof name, "interp_%03d.vox", s);
    save_voxel(fs::path(out_dir) / name, grid, run.id);
    run.outputs.push_back((fs::path(out_dir) / name).string());
  }
  close_run(run, cfg);
  std::cout << "wrote " << steps << " interpolated units to " << out_dir << "\n";
  return 0;
}

int cmd_design(const CommonOpts& common, const std::string& checkpoint,
               const std::string& latents_path, const std::string& case_name,
               double beta, double vf, const std::string& mode,
               const std::string& out_dir) {
  RunConfig cfg = build_config(common);
  RunRecord run = open_run(fmt_cmd("design", {case_name, mode, std::to_string(beta), std::to_string(vf)}), cfg, {latents_path});
  const VaeMdnModel model = load_checkpoint(checkpoint);
  const auto latents = read_latents(latents_path);
  std::vector<std::vector<double>> zs;
  for (const auto& [id, z] : latents) zs.push_back(z);

  DesignProblem problem;
  problem.latent_bounds = latent_bounds(zs);
  problem.vf_target = vf;
  problem.mode = mode == "deterministic" ? DesignMode::Deterministic : DesignMode::Robust;
  cfg.nsga.seed = cfg.seed;
  cfg.uq.seed = cfg.seed;
  fs::create_directories(out_dir);

  if (case_name == "bulk") {
    problem.objectives = {{PropertySelector::K, beta}};
    const auto rows = beta_sweep(problem, {beta}, model, cfg.nsga, cfg.uq,
                                 cfg.base_material, cfg.solver);
    write_archive_csv(fs::path(out_dir) / "archive.csv", case_name, beta, rows, run.id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "design_%03zu.vox", i);
      if (rows[i].grid.edge_voxels > 0)
        save_voxel(fs::path(out_dir) / name, rows[i].grid, run.id);
    }
  } else if (case_name == "e-nu") {
    problem.objectives = {{PropertySelector::E, beta}, {PropertySelector::Nu, beta}};
    const ParetoArchive archive = nsga2_run(problem, model, cfg.nsga, cfg.uq);
    std::vector<std::array<double, 3>> fea;
    for (std::size_t i = 0; i < archive.members.size(); ++i) {
      std::array<double, 3> f{0, 0, 0};
      if (archive.grids[i].edge_voxels > 0) {
        const ElasticProps p =
            effective_properties(archive.grids[i], cfg.base_material, cfg.solver);
        f = {p.E, p.nu, 0.0};
        if (p.nu < 0.4999) f[2] = bulk_modulus(p);
        char name[32];
        std::snprintf(name, sizeof name, "design_%03zu.vox", i);
        save_voxel(fs::path(out_dir) / name, archive.grids[i], run.id);
      }
      fea.push_back(f);
    }
    write_archive_csv(fs::path(out_dir) / "archive.csv", case_name, beta, archive, fea,
                      run.id);
  } else {
    throw InvalidArgument("case must be bulk or e-nu");
  }
  run.outputs.push_back((fs::path(out_dir) / "archive.csv").string());
  close_run(run, cfg);
  std::cout << "design archive -> " << out_dir << "/archive.csv\n";
  return 0;
}

int cmd_uq(const CommonOpts& common, const std::string& checkpoint,
           const std::string& manifest_path, const std::string& data_dir,
           const std::string& id, const std::string& z_json, int n,
           const std::string& out_path) {
  RunConfig cfg = build_config(common);
  if (n > 0) cfg.uq.n_samples = n;
  cfg.uq.seed = cfg.seed;
  RunRecord run = open_run(fmt_cmd("uq", {id, z_json, std::to_string(cfg.uq.n_samples)}), cfg);
  const VaeMdnModel model = load_checkpoint(checkpoint);
  UqOutcome outcome;
  if (!z_json.empty()) {
    const auto z = nlohmann::json::parse(z_json).get<std::vector<double>>();
    outcome = predict_with_uncertainty(model, z, cfg.uq);
  } else {
    const DatasetManifest manifest = read_manifest(manifest_path);
    outcome = predict_with_uncertainty(model, load_eighth(manifest, data_dir, id), cfg.uq);
  }
  const std::string json = uq_result_to_json(outcome.result, run.id);
  std::cout << json << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    out << json << "\n";
    run.outputs.push_back(out_path);
  }
  close_run(run, cfg);
  return 0;
}

int cmd_uq_converge(const CommonOpts& common, const std::string& checkpoint,
                    const std::string& manifest_path, const std::string& data_dir,
                    const std::string& id, const std::string& n_values,
                    const std::string& out_path) {
  RunConfig cfg = build_config(common);
  cfg.uq.seed = cfg.seed;
  RunRecord run = open_run(fmt_cmd("uq-converge", {id, n_values}), cfg, {manifest_path});
  const VaeMdnModel model = load_checkpoint(checkpoint);
  const DatasetManifest manifest = read_manifest(manifest_path);
  const auto z = model.encode(load_eighth(manifest, data_dir, id)).mean;
  std::vector<int> ns;
  {
    std::stringstream ss(n_values);
    std::string item;
    while (std::getline(ss, item, ',')) ns.push_back(std::stoi(item));
  }
  const auto rows = convergence_sweep(model, z, ns, cfg.uq);
  write_convergence_csv(out_path, rows, run.id);
  run.outputs.push_back(out_path);
  close_run(run, cfg);
  std::cout << "wrote " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaforge: uncertainty-aware generative design workbench"};
  app.require_subcommand(1);

  CommonOpts common;
  int count = -1, edge = 0, noise_draws = 0, steps = 8, n_uq = 0;
  double beta = 5.0, vf = 0.3;
  std::string manifest = "data/manifest.csv", data_dir = "data",
              labeled = "results/labeled.csv", checkpoint = "checkpoints/model",
              out, split_name = "val", id1, id2, id, z_json, mode = "robust",
              case_name = "bulk", n_values = "10,20,30,40,50,60,70,80,90,100";

  auto* gen = app.add_subcommand("gen-data", "generate a unit dataset");
  add_common(gen, common);
  gen->add_option("--count", count);
  gen->add_option("--edge", edge);

  auto* sim = app.add_subcommand("simulate", "homogenize every manifest row");
  add_common(sim, common);
  sim->add_option("--manifest", manifest);
  sim->add_option("--out", labeled);
  sim->add_option("--noise-draws", noise_draws);

  auto* tr = app.add_subcommand("train", "progressive-schedule training");
  add_common(tr, common);
  tr->add_option("--labeled", labeled);
  tr->add_option("--data-dir", data_dir);
  tr->add_option("--out", checkpoint);

  auto* ev = app.add_subcommand("evaluate", "metrics on a stored split");
  add_common(ev, common);
  ev->add_option("--checkpoint", checkpoint);
  ev->add_option("--labeled", labeled);
  ev->add_option("--data-dir", data_dir);
  ev->add_option("--split", split_name);
  ev->add_option("--out", out)->default_val("results/metrics.csv");

  auto* en = app.add_subcommand("encode", "latent means for every manifest row");
  add_common(en, common);
  en->add_option("--checkpoint", checkpoint);
  en->add_option("--manifest", manifest);
  en->add_option("--data-dir", data_dir);
  en->add_option("--out", out)->default_val("results/latents.csv");

  auto* in = app.add_subcommand("interp", "slerp between two units");
  add_common(in, common);
  in->add_option("--checkpoint", checkpoint);
  in->add_option("--manifest", manifest);
  in->add_option("--data-dir", data_dir);
  in->add_option("--id1", id1)->required();
  in->add_option("--id2", id2)->required();
  in->add_option("--steps", steps);
  in->add_option("--out-dir", out)->default_val("results/interp");

  auto* de = app.add_subcommand("design", "NSGA-II design optimization");
  add_common(de, common);
  de->add_option("--checkpoint", checkpoint);
  de->add_option("--latents", labeled)->description("latent csv from encode");
  de->add_option("--case", case_name)->description("bulk or e-nu");
  de->add_option("--beta", beta);
  de->add_option("--vf", vf);
  de->add_option("--mode", mode)->description("robust or deterministic");
  de->add_option("--out-dir", out)->default_val("results/design");

  auto* uq = app.add_subcommand("uq", "uncertainty decomposition for one unit");
  add_common(uq, common);
  uq->add_option("--checkpoint", checkpoint);
  uq->add_option("--manifest", manifest);
  uq->add_option("--data-dir", data_dir);
  uq->add_option("--id", id);
  uq->add_option("--z", z_json)->description("latent vector as a JSON array");
  uq->add_option("--n", n_uq);
  uq->add_option("--out", out);

  auto* uc = app.add_subcommand("uq-converge", "sample-count convergence table");
  add_common(uc, common);
  uc->add_option("--checkpoint", checkpoint);
  uc->add_option("--manifest", manifest);
  uc->add_option("--data-dir", data_dir);
  uc->add_option("--id", id)->required();
  uc->add_option("--n-values", n_values);
  uc->add_option("--out", out)->default_val("results/uq_convergence.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common, count, edge);
    if (sim->parsed()) return cmd_simulate(common, manifest, labeled, noise_draws);
    if (tr->parsed()) return cmd_train(common, labeled, data_dir, checkpoint);
    if (ev->parsed())
      return cmd_evaluate(common, checkpoint, labeled, data_dir, split_name, out);
    if (en->parsed()) return cmd_encode(common, checkpoint, manifest, data_dir, out);
    if (in->parsed())
      return cmd_interp(common, checkpoint, manifest, data_dir, id1, id2, steps, out);
    if (de->parsed())
      return cmd_design(common, checkpoint, labeled, case_name, beta, vf, mode, out);
    if (uq->parsed())
      return cmd_uq(common, checkpoint, manifest, data_dir, id, z_json, n_uq, out);
    if (uc->parsed())
      return cmd_uq_converge(common, checkpoint, manifest, data_dir, id, n_values, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
