#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "tsctl/data.hpp"
#include "tsctl/env.hpp"
#include "tsctl/experiment.hpp"
#include "tsctl/rl.hpp"

namespace tsctl {

struct DataSource {
  enum class Kind { csv, processed_csv, synthetic };
  Kind kind = Kind::synthetic;
  std::string path;
  std::map<std::string, FeatureKind> kinds;
  std::vector<std::string> universe;
  SyntheticSpec synthetic;
};

struct ExperimentSettings {
  /// Replica seeds, derived from the master seed when given as a count.
  std::vector<std::uint64_t> seeds;
  std::int64_t total_steps = 1'000'000;
  std::int64_t tune_steps = 100'000;
  int tune_samples = 150;
  int workers = 1;
  HyperparamSpace search_space;
};

/// One experiment grid: data, learner, methods, budgets, output location.
struct RunConfig {
  DataSource data;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  std::string profile;
  AlgoConfig algo;
  EnvConfig env;
  std::vector<MethodSpec> methods;
  ExperimentSettings exp;
  std::uint64_t seed = 0;
  std::string out = "runs/default";
};

/// Parses a config document. Keys may be nested objects or dotted names
/// ("env.state_lag"). Every missing required key is reported in one
/// ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully explicit form; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& cfg);

nlohmann::json algo_to_json(const AlgoConfig& algo);
AlgoConfig algo_from_json(const nlohmann::json& j, AlgoConfig base = {});
nlohmann::json env_to_json(const EnvConfig& env);
EnvConfig env_from_json(const nlohmann::json& j, EnvConfig base = {});

/// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hex64(std::uint64_t value);

/// Loads or generates the configured data and splits it.
ExperimentData load_experiment_data(const RunConfig& cfg);

/// Replica seeds from `exp.seeds` (count or explicit list).
std::vector<std::uint64_t> replica_seeds(std::uint64_t master_seed, std::size_t count);

// Model files.

inline constexpr int kModelFormatVersion = 1;

void save_model(const TrainedModel& model, const std::filesystem::path& path);
/// Throws LoadError on a version or shape mismatch.
TrainedModel load_model(const std::filesystem::path& path);

/// manifest.json: command, config hash, master seed, artifact list.
void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& artifacts);

}  // namespace tsctl
