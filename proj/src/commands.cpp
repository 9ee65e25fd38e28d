#include "tsctl/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "tsctl/errors.hpp"

namespace tsctl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string model_file(std::size_t replica) { return "replica_" + std::to_string(replica) + ".json"; }

const char* kBaselineLabel = "baseline";

void save_ground_truth(const ProcessedSeries& series, const GroundTruth& truth, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date";
  for (std::size_t i = 0; i < truth.signal.size(); ++i) {
    out << ",signal_" << i << ",noise_" << i << ",predictor_" << i;
  }
  out << '\n';
  out.precision(17);
  for (std::size_t t = 0; t < series.rows(); ++t) {
    out << format_date(series.dates[t]);
    for (std::size_t i = 0; i < truth.signal.size(); ++i) {
      out << ',' << truth.signal[i][t] << ',' << truth.noise[i][t] << ',' << truth.predictor[i][t];
    }
    out << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

std::uint64_t method_seed(std::uint64_t master_seed, const std::string& label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(master_seed, h);
}

RunConfig load_config_with(const fs::path& path, const CommandOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.out) doc["out"] = *opts.out;
  RunConfig cfg = parse_run_config(doc);
  if (opts.workers) {
    if (*opts.workers < 1) throw ConfigError("--workers must be at least 1");
    cfg.exp.workers = *opts.workers;
  }
  return cfg;
}

fs::path cmd_process(const RunConfig& cfg) {
  if (cfg.data.kind == DataSource::Kind::synthetic) {
    throw ConfigError("process needs data.csv or data.processed_csv");
  }
  const ExperimentData data = load_experiment_data(cfg);
  fs::create_directories(cfg.out);
  const fs::path out = fs::path(cfg.out) / "processed.csv";
  save_series_csv(*data.series, out);
  write_manifest(cfg.out, "process", cfg, {"processed.csv"});
  return out;
}

fs::path cmd_synth(const RunConfig& cfg) {
  if (cfg.data.kind != DataSource::Kind::synthetic) throw ConfigError("synth needs data.synthetic");
  const auto [series, truth] = generate_synthetic(cfg.data.synthetic);
  fs::create_directories(cfg.out);
  const fs::path out = fs::path(cfg.out) / "series.csv";
  save_series_csv(series, out);
  save_ground_truth(series, truth, fs::path(cfg.out) / "ground_truth.csv");
  write_manifest(cfg.out, "synth", cfg, {"series.csv", "ground_truth.csv"});
  return out;
}

fs::path cmd_tune(const RunConfig& cfg) {
  const ExperimentData data = load_experiment_data(cfg);
  RunConfig tuned = cfg;
  if (!cfg.exp.search_space.grids.empty()) {
    const SearchResult res =
        random_grid_search(cfg.exp.search_space, cfg.algo, cfg.env, cfg.exp.tune_samples,
                           derive_seed(cfg.seed, 7), validation_scorer(data, cfg.exp.tune_steps),
                           cfg.exp.workers);
    tuned.algo = res.algo;
    tuned.env = res.env;
    std::cerr << "search: best validation return " << res.best_score << "%\n";
  }
  for (auto& m : tuned.methods) {
    if (m.method == Method::tis && m.tis_space.size() > 1) {
      const int s = tune_tis(m.tis_space, tuned.algo, tuned.env, m.is_mode, data,
                             cfg.exp.tune_steps, method_seed(cfg.seed, m.name()), cfg.exp.workers);
      m.tis_space = {s};
      std::cerr << m.name() << ": S = " << s << '\n';
    }
    if (m.method == Method::dpd_lgn && m.distill.lgn_sigma.empty()) {
      const double sigma = tune_sigma(m.sigma_space, tuned.algo, tuned.env, data, cfg.exp.tune_steps,
                                      method_seed(cfg.seed, m.name()), cfg.exp.workers);
      m.distill.lgn_sigma = {sigma};
      std::cerr << m.name() << ": sigma = " << sigma << '\n';
    }
  }
  fs::create_directories(cfg.out);
  const fs::path out = fs::path(cfg.out) / "tuned_config.json";
  std::ofstream f(out);
  if (!(f << to_json(tuned).dump(1) << '\n')) throw IoError("cannot write " + out.string());
  write_manifest(cfg.out, "tune", cfg, {"tuned_config.json"});
  return out;
}

fs::path cmd_train(const RunConfig& cfg) {
  const ExperimentData data = load_experiment_data(cfg);
  const ReplicaSettings settings{cfg.exp.total_steps, cfg.exp.tune_steps, cfg.exp.workers};
  const fs::path models = fs::path(cfg.out) / "models";
  std::vector<std::string> artifacts;
  for (const auto& m : cfg.methods) {
    if (m.method == Method::rp) continue;
    const PreparedMethod prepared =
        prepare_method(m, cfg.algo, cfg.env, data, settings, method_seed(cfg.seed, m.name()));
    const auto& seeds = cfg.exp.seeds;
    parallel_for(seeds.size(), cfg.exp.workers, [&](std::size_t i) {
      const TrainedModel model = train(replica_train_spec(prepared, cfg.algo, cfg.env, seeds[i]),
                                       cfg.exp.total_steps, seeds[i]);
      save_model(model, models / m.name() / model_file(i));
    });
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      artifacts.push_back("models/" + m.name() + "/" + model_file(i));
    }
  }
  write_manifest(cfg.out, "train", cfg, artifacts);
  return models;
}

fs::path cmd_evaluate(const RunConfig& cfg, const std::optional<fs::path>& models_dir) {
  const ExperimentData data = load_experiment_data(cfg);
  const ReplicaSettings settings{cfg.exp.total_steps, cfg.exp.tune_steps, cfg.exp.workers};
  std::vector<ReplicaReport> reports;
  for (const auto& m : cfg.methods) {
    if (!models_dir || m.method == Method::rp) {
      reports.push_back(run_replicas(m, cfg.exp.seeds, cfg.algo, cfg.env, data, settings,
                                     method_seed(cfg.seed, m.name())));
      continue;
    }
    ReplicaReport r;
    r.method = m.name();
    for (std::size_t i = 0; i < cfg.exp.seeds.size(); ++i) {
      const fs::path file = *models_dir / m.name() / model_file(i);
      const TrainedModel model = load_model(file);
      const EpisodeResult res = evaluate_model(model.net, model.env, data);
      r.seeds.push_back(model.seed);
      r.returns.push_back(res.cumulative_return_pct);
      r.paths.push_back(cumulative_return_path(res.log_returns));
    }
    r.summarize();
    reports.push_back(std::move(r));
  }
  emit_report(reports, kBaselineLabel, cfg.out);
  std::vector<std::string> artifacts{"results.csv", "results.json"};
  for (const auto& r : reports) artifacts.push_back(r.method + "/equity_curve.svg");
  write_manifest(cfg.out, "evaluate", cfg, artifacts);
  return fs::path(cfg.out) / "results.csv";
}

std::string cmd_report(const fs::path& dir) {
  const fs::path results = dir / "results.json";
  std::ifstream in(results);
  if (!in) throw IoError("cannot open " + results.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(results.string() + ": " + e.what());
  }
  const std::string baseline = doc.value("baseline", kBaselineLabel);
  in.close();
  const auto reports = load_reports(results);
  emit_report(reports, baseline, dir);

  std::ifstream csv(dir / "results.csv");
  std::ostringstream table;
  std::string line;
  while (std::getline(csv, line)) {
    std::istringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      table.width(first ? 14 : 12);
      table << std::left << cell;
      first = false;
    }
    table << '\n';
  }
  return table.str();
}

}  // namespace tsctl
