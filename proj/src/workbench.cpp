#include "metaforge/workbench.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metaforge/io.hpp"

namespace metaforge {

namespace {

std::vector<double> parse_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  for (double v : parse_list(value)) out.push_back(static_cast<int>(v));
  return out;
}

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

RunConfig RunConfig::for_profile(const std::string& profile) {
  RunConfig cfg;
  cfg.profile = profile;
  if (profile == "desk") {
    cfg.generator.edge_voxels = 16;
    cfg.generator.count = 200;
    cfg.model = ModelConfig::desk(16);
    cfg.schedule.step1_latent_dims = {8, 16};
    cfg.schedule.step2_alpha2 = {1e-4, 1e-3};
    cfg.schedule.step3_alpha3 = {1e-4, 1e-3};
    cfg.schedule.epochs_per_phase = 60;
    cfg.nsga.population = 64;
    cfg.nsga.generations = 100;
  } else if (profile == "paper") {
    cfg.generator.edge_voxels = 48;
    cfg.generator.count = 46840;
    cfg.model = ModelConfig::paper();
    cfg.schedule = PhaseSchedule{};  // full ladders, 400 epochs
    cfg.train.batch_size = 32;
  } else {
    throw InvalidArgument("unknown profile '" + profile + "'");
  }
  return cfg;
}

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
  auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
  if (key == "seed") seed = as_u64();
  else if (key == "dataset_dir") dataset_dir = value;
  else if (key == "checkpoint_dir") checkpoint_dir = value;
  else if (key == "results_dir") results_dir = value;
  else if (key == "noise_draws") noise_draws = std::stoi(value);
  else if (key == "generator.edge_voxels") generator.edge_voxels = std::stoi(value);
  else if (key == "generator.count") generator.count = std::stoi(value);
  else if (key == "generator.vf_min") generator.vf_min = std::stod(value);
  else if (key == "generator.vf_max") generator.vf_max = std::stod(value);
  else if (key == "material.E") base_material.youngs_modulus = std::stod(value);
  else if (key == "material.nu") base_material.poisson_ratio = std::stod(value);
  else if (key == "solver.cg_tolerance") solver.cg_tolerance = std::stod(value);
  else if (key == "solver.max_iterations") solver.max_iterations = std::stoi(value);
  else if (key == "solver.soft_void_rel") solver.soft_void_rel = std::stod(value);
  else if (key == "model.latent_dim") model.latent_dim = std::stoi(value);
  else if (key == "model.input_edge") model.input_edge = std::stoi(value);
  else if (key == "model.deterministic_head") model.deterministic_head = value == "true";
  else if (key == "split.train_frac") split.train_frac = std::stod(value);
  else if (key == "split.val_frac") split.val_frac = std::stod(value);
  else if (key == "split.test_frac") split.test_frac = std::stod(value);
  else if (key == "downselect.keep_fraction") downselect.keep_fraction = std::stod(value);
  else if (key == "schedule.step1") schedule.step1_latent_dims = parse_int_list(value);
  else if (key == "schedule.step2") schedule.step2_alpha2 = parse_list(value);
  else if (key == "schedule.step3") schedule.step3_alpha3 = parse_list(value);
  else if (key == "schedule.epochs_per_phase") schedule.epochs_per_phase = std::stoi(value);
  else if (key == "schedule.patience") schedule.patience = std::stoi(value);
  else if (key == "schedule.selection_slack") schedule.selection_slack = std::stod(value);
  else if (key == "train.batch_size") train.batch_size = std::stoi(value);
  else if (key == "train.lr") train.lr.initial_rate = std::stod(value);
  else if (key == "train.lr_decay") train.lr.decay = std::stod(value);
  else if (key == "train.resample_label_noise")
    train.resample_label_noise = value == "true";
  else if (key == "uq.n_samples") uq.n_samples = std::stoi(value);
  else if (key == "uq.binarize_before_reencode")
    uq.binarize_before_reencode = value == "true";
  else if (key == "nsga.population") nsga.population = std::stoi(value);
  else if (key == "nsga.generations") nsga.generations = std::stoi(value);
  else if (key == "nsga.sbx_eta") nsga.sbx_eta = std::stod(value);
  else if (key == "nsga.mutation_eta") nsga.mutation_eta = std::stod(value);
  else if (key == "nsga.crossover_prob") nsga.crossover_prob = std::stod(value);
  else throw InvalidArgument("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) apply_kv(key, value);
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "profile=" << profile << "\nseed=" << seed
     << "\ngenerator.edge=" << generator.edge_voxels
     << "\ngenerator.count=" << generator.count
     << "\ngenerator.vf=" << format_double(generator.vf_min) << ","
     << format_double(generator.vf_max)
     << "\nmaterial=" << format_double(base_material.youngs_modulus) << ","
     << format_double(base_material.poisson_ratio)
     << "\nsolver=" << format_double(solver.cg_tolerance) << ","
     << solver.max_iterations << "," << format_double(solver.soft_void_rel)
     << "\nnoise_draws=" << noise_draws << "\nmodel=" << model.latent_dim << ","
     << model.input_edge << "," << model.convs_per_block << ","
     << model.deterministic_head;
  os << "\nconv_channels=";
  for (int c : model.conv_channels) os << c << ",";
  os << "\nsplit=" << format_double(split.train_frac) << ","
     << format_double(split.val_frac) << "," << format_double(split.test_frac)
     << "\ndownselect=" << format_double(downselect.keep_fraction);
  os << "\nschedule.step1=";
  for (int d : schedule.step1_latent_dims) os << d << ",";
  os << "\nschedule.step2=";
  for (double a : schedule.step2_alpha2) os << format_double(a) << ",";
  os << "\nschedule.step3=";
  for (double a : schedule.step3_alpha3) os << format_double(a) << ",";
  os << "\nschedule.epochs=" << schedule.epochs_per_phase
     << "\nschedule.patience=" << schedule.patience
     << "\nschedule.slack=" << format_double(schedule.selection_slack)
     << "\ntrain=" << train.batch_size << "," << format_double(train.lr.initial_rate)
     << "," << format_double(train.lr.decay) << "," << train.resample_label_noise
     << "\nuq=" << uq.n_samples << "," << uq.binarize_before_reencode
     << "\nnsga=" << nsga.population << "," << nsga.generations << ","
     << format_double(nsga.sbx_eta) << "," << format_double(nsga.mutation_eta) << ","
     << format_double(nsga.crossover_prob) << "\n";
  return os.str();
}

RunRecord open_run(const std::string& command, const RunConfig& cfg,
                   const std::vector<std::filesystem::path>& inputs) {
  RunRecord record;
  record.command = command;
  const std::string canon = cfg.canonical();
  record.config_hash = hex64(fnv1a(canon));
  std::uint64_t ih = 0xcbf29ce484222325ULL;
  for (const auto& p : inputs)
    if (std::filesystem::exists(p)) ih = fnv1a(p.string(), hash_file(p) ^ ih);
  record.input_hash = hex64(ih);
  record.id = hex64(fnv1a(command + "\n" + canon, ih));
  record.started = now_iso();
  return record;
}

void close_run(RunRecord& record, const RunConfig& cfg) {
  record.finished = now_iso();
  record.save(cfg.results_dir);
}

void RunRecord::save(const std::filesystem::path& results_dir) const {
  std::filesystem::create_directories(results_dir / "runs");
  nlohmann::json j;
  j["id"] = id;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["input_hash"] = input_hash;
  j["started"] = started;
  j["finished"] = finished;
  j["outputs"] = outputs;
  std::ofstream out(results_dir / "runs" / (id + ".json"), std::ios::trunc);
  if (!out) throw IoError("cannot write run record");
  out << j.dump(2) << "\n";
}

}  // namespace metaforge
