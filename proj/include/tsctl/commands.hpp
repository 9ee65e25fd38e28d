#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tsctl/config.hpp"

namespace tsctl {

/// Overrides applied on top of a config file, mirroring the CLI flags.
struct CommandOptions {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

/// Reads the config file and applies `opts` before parsing.
RunConfig load_config_with(const std::filesystem::path& path, const CommandOptions& opts);

/// Every command writes under cfg.out and records a manifest. Returned is
/// the main artifact.
std::filesystem::path cmd_process(const RunConfig& cfg);
std::filesystem::path cmd_synth(const RunConfig& cfg);
std::filesystem::path cmd_tune(const RunConfig& cfg);
std::filesystem::path cmd_train(const RunConfig& cfg);
/// With `models_dir`, models written by `train` are evaluated instead of
/// retraining.
std::filesystem::path cmd_evaluate(const RunConfig& cfg,
                                   const std::optional<std::filesystem::path>& models_dir = {});
/// Re-renders results.csv and the curves from results.json in `dir` and
/// returns a printable table.
std::string cmd_report(const std::filesystem::path& dir);

/// Seed for method-level preparation (tuning, oracle, LGN).
std::uint64_t method_seed(std::uint64_t master_seed, const std::string& label);

}  // namespace tsctl
