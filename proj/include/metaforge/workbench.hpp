#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metaforge/generators.hpp"
#include "metaforge/homogenize.hpp"
#include "metaforge/model.hpp"
#include "metaforge/nsga2.hpp"
#include "metaforge/training.hpp"
#include "metaforge/uq.hpp"

namespace metaforge {

/// Everything one pipeline run needs; a profile sets the defaults, a config
/// file and CLI flags override individual keys.
struct RunConfig {
  std::string profile = "desk";
  std::filesystem::path dataset_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path results_dir = "results";
  std::uint64_t seed = 7;

  GeneratorConfig generator;
  FamilyMix mix;
  MaterialSample base_material;
  SolverConfig solver;
  int noise_draws = 8;
  ModelConfig model;
  SplitSpec split;
  DownselectSpec downselect;
  PhaseSchedule schedule;
  TrainOptions train;
  UqConfig uq;
  NsgaConfig nsga;

  static RunConfig for_profile(const std::string& profile);
  void load_file(const std::filesystem::path& path);
  void apply_kv(const std::string& key, const std::string& value);
  std::string canonical() const;  // stable dump used for run ids
};

struct RunRecord {
  std::string id;
  std::string command;
  std::string config_hash;
  std::string input_hash;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;

  void save(const std::filesystem::path& results_dir) const;
};

/// Deterministic id from (command, config, inputs); timestamps are recorded
/// but do not feed the id.
RunRecord open_run(const std::string& command, const RunConfig& cfg,
                   const std::vector<std::filesystem::path>& inputs = {});
void close_run(RunRecord& record, const RunConfig& cfg);

}  // namespace metaforge
