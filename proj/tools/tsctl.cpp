#include <iostream>

#include "CLI11.hpp"

#include "tsctl/commands.hpp"
#include "tsctl/errors.hpp"

int main(int argc, char** argv) {
  using namespace tsctl;
  CLI::App app{"Curriculum and distillation experiments for RL portfolio control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string models;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory (overrides the config)");
    cmd->add_option("--seed", seed, "master seed (overrides the config)");
    cmd->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
  };

  auto* process = app.add_subcommand("process", "clean a raw CSV into log-returns and differences");
  auto* synth = app.add_subcommand("synth", "generate a synthetic series and its ground truth");
  auto* tune = app.add_subcommand("tune", "tune hyperparameters, S and sigma on the validation range");
  auto* train = app.add_subcommand("train", "train every replica of every method and save models");
  auto* evaluate = app.add_subcommand("evaluate", "train (or load) replicas and test them");
  for (auto* cmd : {process, synth, tune, train, evaluate}) add_common(cmd);
  evaluate->add_option("--models", models, "directory written by train")->check(CLI::ExistingDirectory);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-render tables and curves from results.json");
  report->add_option("dir", report_dir, "evaluate output directory");
  report->add_option("--out", report_dir, "evaluate output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      if (report_dir.empty()) throw UsageError("report needs a directory");
      std::cout << cmd_report(report_dir);
      return 0;
    }
    CommandOptions opts;
    for (auto* cmd : {process, synth, tune, train, evaluate}) {
      if (!cmd->parsed()) continue;
      if (cmd->count("--out")) opts.out = out;
      if (cmd->count("--seed")) opts.seed = seed;
      if (cmd->count("--workers")) opts.workers = workers;
    }
    const RunConfig cfg = load_config_with(config_path, opts);
    std::filesystem::path result;
    if (process->parsed()) result = cmd_process(cfg);
    if (synth->parsed()) result = cmd_synth(cfg);
    if (tune->parsed()) result = cmd_tune(cfg);
    if (train->parsed()) result = cmd_train(cfg);
    if (evaluate->parsed()) {
      std::optional<std::filesystem::path> dir;
      if (!models.empty()) dir = models;
      result = cmd_evaluate(cfg, dir);
    }
    std::cout << result.string() << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
