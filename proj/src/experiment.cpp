#include "tsctl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "json.hpp"

#include "tsctl/errors.hpp"

namespace tsctl {

using nlohmann::json;

Method parse_method(const std::string& name) {
  static const std::map<std::string, Method> table{
      {"baseline", Method::baseline}, {"rp", Method::rp},       {"dpd", Method::dpd},
      {"dpd-lgn", Method::dpd_lgn},   {"opd", Method::opd},     {"round", Method::round},
      {"ema", Method::ema},           {"is", Method::is},       {"tis", Method::tis}};
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::baseline: return "baseline";
    case Method::rp: return "rp";
    case Method::dpd: return "dpd";
    case Method::dpd_lgn: return "dpd-lgn";
    case Method::opd: return "opd";
    case Method::round: return "round";
    case Method::ema: return "ema";
    case Method::is: return "is";
    case Method::tis: return "tis";
  }
  return "?";
}

IndexRange evaluation_range(IndexRange target, const EnvConfig& env) {
  if (env.observation == EnvConfig::Observation::lookahead) return target;
  const auto lag = static_cast<std::size_t>(env.state_lag);
  if (target.begin < lag) {
    throw RangeError("evaluation range starting at row " + std::to_string(target.begin) +
                     " has no room for a state lag of " + std::to_string(lag));
  }
  return {target.begin - lag, target.end};
}

// --- hyperparameter space ---------------------------------------------------

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "lr",     "steps_per_update", "gamma",           "gae_lambda", "entropy_coef", "vf_coef",
      "clip_eps", "epochs",         "partition_factor", "target_kl", "state_lag"};
  return keys;
}

void apply_value(const std::string& key, double v, AlgoConfig& a, EnvConfig& e) {
  const int iv = static_cast<int>(std::lround(v));
  if (key == "lr") a.lr = v;
  else if (key == "steps_per_update") a.steps_per_update = iv;
  else if (key == "gamma") a.gamma = v;
  else if (key == "gae_lambda") a.gae_lambda = v;
  else if (key == "entropy_coef") a.entropy_coef = v;
  else if (key == "vf_coef") a.vf_coef = v;
  else if (key == "clip_eps") a.clip_eps = v;
  else if (key == "epochs") a.epochs = iv;
  else if (key == "partition_factor") a.partition_factor = iv;
  else if (key == "target_kl") a.target_kl = v;
  else if (key == "state_lag") e.state_lag = iv;
  else throw ConfigError("unknown search-space key '" + key + "'");
}

}  // namespace

void HyperparamSpace::validate() const {
  for (const auto& [key, grid] : grids) {
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
      throw ConfigError("unknown search-space key '" + key + "'");
    }
    if (grid.empty()) throw ConfigError("search-space grid '" + key + "' is empty");
    if (key == "state_lag") {
      for (double v : grid) {
        const long lag = std::lround(v);
        if (lag < 5 || lag > 60 || lag % 5 != 0 || static_cast<double>(lag) != v) {
          throw ConfigError("state_lag grid values must lie in {5, 10, ..., 60}");
        }
      }
    }
  }
}

std::uint64_t HyperparamSpace::size() const {
  std::uint64_t total = 1;
  for (const auto& [key, grid] : grids) {
    if (total > std::numeric_limits<std::uint64_t>::max() / grid.size()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= grid.size();
  }
  return total;
}

void HyperparamSpace::apply(std::uint64_t index, AlgoConfig& algo, EnvConfig& env) const {
  for (const auto& [key, grid] : grids) {
    apply_value(key, grid[index % grid.size()], algo, env);
    index /= grid.size();
  }
}

// --- worker pool ----------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// --- tuning --------------------------------------------------------------------

Scorer validation_scorer(const ExperimentData& data, std::int64_t tune_steps, RewardHook reward) {
  return [&data, tune_steps, reward](const AlgoConfig& algo, const EnvConfig& env,
                                     std::uint64_t seed) {
    TrainSpec spec;
    spec.series = data.series;
    spec.range = data.split.train;
    spec.env = env;
    spec.reward = reward;
    spec.algo = algo;
    const TrainedModel model = train(spec, tune_steps, seed);
    PortfolioEnv val(data.series, evaluation_range(data.split.validation, env), env);
    return run_greedy(model.net, std::move(val)).cumulative_return_pct;
  };
}

SearchResult random_grid_search(const HyperparamSpace& space, const AlgoConfig& base_algo,
                                const EnvConfig& base_env, int budget, std::uint64_t seed,
                                const Scorer& scorer, int workers) {
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  space.validate();
  const std::uint64_t total = space.size();
  std::mt19937_64 rng(derive_seed(seed, 40));
  std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);

  SearchResult result;
  result.samples.resize(static_cast<std::size_t>(budget));
  const bool distinct = static_cast<std::uint64_t>(budget) <= total;
  std::unordered_set<std::uint64_t> seen;
  for (auto& s : result.samples) {
    std::uint64_t idx = pick(rng);
    while (distinct && !seen.insert(idx).second) idx = pick(rng);
    s.grid_index = idx;
  }

  parallel_for(result.samples.size(), workers, [&](std::size_t i) {
    auto& s = result.samples[i];
    AlgoConfig algo = base_algo;
    EnvConfig env = base_env;
    try {
      space.apply(s.grid_index, algo, env);
      s.score = scorer(algo, env, derive_seed(seed, 100 + i));
      if (std::isnan(s.score)) s.score = -std::numeric_limits<double>::infinity();
    } catch (const std::exception& e) {
      s.score = -std::numeric_limits<double>::infinity();
      s.error = e.what();
    }
  });

  std::size_t best = result.samples.size();
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    const double sc = result.samples[i].score;
    if (sc == -std::numeric_limits<double>::infinity()) continue;
    if (best == result.samples.size() || sc > result.samples[best].score) best = i;
  }
  if (best == result.samples.size()) {
    throw Error("every search sample failed; first error: " + result.samples.front().error);
  }
  result.algo = base_algo;
  result.env = base_env;
  space.apply(result.samples[best].grid_index, result.algo, result.env);
  result.best_score = result.samples[best].score;
  return result;
}

int tune_tis(const std::vector<int>& s_space, const AlgoConfig& algo, const EnvConfig& env,
             CurriculumSchedule::Mode mode, const ExperimentData& data, std::int64_t tune_steps,
             std::uint64_t seed, int workers) {
  if (s_space.empty()) throw ConfigError("tis search space is empty");
  for (int s : s_space) {
    if (s < 1 || s > 8) throw ConfigError("tis stage counts must lie in 1..8");
  }
  if (s_space.size() == 1) return s_space.front();
  std::vector<double> scores(s_space.size(), -std::numeric_limits<double>::infinity());
  parallel_for(s_space.size(), workers, [&](std::size_t i) {
    TrainSpec spec;
    spec.series = data.series;
    spec.range = data.split.train;
    spec.env = env;
    spec.algo = algo;
    spec.curriculum = CurriculumSchedule{s_space[i], mode};
    const TrainedModel model = train(spec, tune_steps, derive_seed(seed, 200 + i));
    PortfolioEnv val(data.series, evaluation_range(data.split.validation, env), env);
    scores[i] = run_greedy(model.net, std::move(val)).cumulative_return_pct;
  });
  const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
  return s_space[static_cast<std::size_t>(best)];
}

double tune_sigma(const std::vector<double>& sigma_space, const AlgoConfig& algo,
                  const EnvConfig& env, const ExperimentData& data, std::int64_t tune_steps,
                  std::uint64_t seed, int workers) {
  if (sigma_space.empty()) throw ConfigError("sigma search space is empty");
  if (sigma_space.size() == 1) return sigma_space.front();
  const auto oracle =
      analytic_oracle(*data.series, data.split.train, env.gross_limit);
  std::vector<double> scores(sigma_space.size(), -std::numeric_limits<double>::infinity());
  parallel_for(sigma_space.size(), workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, 11));
    const std::vector<double> sigma{sigma_space[i]};
    RewardHook hook;
    hook.kind = RewardHook::Kind::dpd;
    hook.oracle = std::make_shared<const OracleTrajectory>(lgn_perturb(oracle, sigma, rng));
    scores[i] = validation_scorer(data, tune_steps, hook)(algo, env, derive_seed(seed, 300));
  });
  const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
  return sigma_space[static_cast<std::size_t>(best)];
}

std::vector<double> sigma_candidates(double lo, double hi, int n, std::uint64_t seed) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw ConfigError("sigma interval must satisfy 0 <= lo <= hi");
  if (lo == hi) return {lo};
  if (n < 1) throw ConfigError("sigma candidate count must be at least 1");
  std::mt19937_64 rng(derive_seed(seed, 12));
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = u(rng);
  return out;
}

// --- baselines and replicas ---------------------------------------------------------

std::vector<double> rp_baseline(const ProcessedSeries& series, IndexRange range) {
  if (range.begin > range.end || range.end > series.rows()) {
    throw RangeError("rp range outside the series");
  }
  const std::size_t n = series.n_assets();
  if (n == 0) throw ConfigError("rp needs at least one asset");
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  std::vector<double> r(n);
  std::vector<double> out;
  out.reserve(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t i = 0; i < n; ++i) r[i] = series.asset_return(t, i);
    out.push_back(portfolio_log_return(w, r));
  }
  return out;
}

void ReplicaReport::summarize() {
  n = returns.size();
  mean = sample_mean(returns);
  std = sample_std(returns);
}

PreparedMethod prepare_method(const MethodSpec& spec, const AlgoConfig& algo,
                              const EnvConfig& env, const ExperimentData& data,
                              const ReplicaSettings& settings, std::uint64_t seed) {
  PreparedMethod p;
  p.spec = spec;
  p.train_frame = data.series;
  p.train_range = data.train_and_validation();
  switch (spec.method) {
    case Method::baseline:
    case Method::rp:
      break;
    case Method::ema:
    case Method::round: {
      const SmoothingMethod m = spec.method == Method::ema
                                    ? SmoothingMethod::ema(spec.ema_window)
                                    : SmoothingMethod::round(spec.round_decimals);
      // Train and validation are smoothed on their own, then joined.
      auto frame = std::make_shared<ProcessedSeries>(
          concat(apply_smoothing(data.series->slice(data.split.train), m),
                 apply_smoothing(data.series->slice(data.split.validation), m)));
      p.train_range = {0, frame->rows()};
      p.train_frame = std::move(frame);
      break;
    }
    case Method::is:
      p.stages = spec.is_stages;
      p.curriculum = CurriculumSchedule{spec.is_stages, spec.is_mode};
      break;
    case Method::tis:
      p.stages = tune_tis(spec.tis_space, algo, env, spec.is_mode, data, settings.tune_steps,
                          derive_seed(seed, 21), settings.workers);
      p.curriculum = CurriculumSchedule{p.stages, spec.is_mode};
      break;
    case Method::dpd:
    case Method::dpd_lgn:
    case Method::opd: {
      if (spec.distill.oracle == DistillConfig::OracleKind::rl) {
        AlgoConfig oracle_algo = algo;
        p.oracle = std::make_shared<const OracleTrajectory>(
            rl_oracle(data.series, p.train_range, env.gross_limit, oracle_algo,
                      spec.distill.rl_oracle_steps, derive_seed(seed, 22)));
      } else {
        p.oracle = std::make_shared<const OracleTrajectory>(
            analytic_oracle(*data.series, p.train_range, env.gross_limit));
      }
      if (spec.method == Method::dpd_lgn) {
        if (!spec.distill.lgn_sigma.empty()) {
          p.sigma = spec.distill.lgn_sigma;
        } else if (!spec.sigma_space.empty()) {
          p.sigma = {tune_sigma(spec.sigma_space, algo, env, data, settings.tune_steps,
                                derive_seed(seed, 23), settings.workers)};
        } else {
          throw ConfigError("dpd-lgn needs il.lgn_sigma or il.sigma_space");
        }
      }
      break;
    }
  }
  return p;
}

TrainSpec replica_train_spec(const PreparedMethod& prepared, const AlgoConfig& algo,
                             const EnvConfig& env, std::uint64_t replica_seed) {
  TrainSpec spec;
  spec.series = prepared.train_frame;
  spec.range = prepared.train_range;
  spec.env = env;
  spec.algo = algo;
  spec.curriculum = prepared.curriculum;
  switch (prepared.spec.method) {
    case Method::dpd:
      spec.reward = {RewardHook::Kind::dpd, prepared.oracle, prepared.spec.distill.opd_coef};
      break;
    case Method::opd:
      spec.reward = {RewardHook::Kind::opd, prepared.oracle, prepared.spec.distill.opd_coef};
      break;
    case Method::dpd_lgn: {
      std::mt19937_64 rng(derive_seed(replica_seed, 11));
      spec.reward = {RewardHook::Kind::dpd,
                     std::make_shared<const OracleTrajectory>(
                         lgn_perturb(*prepared.oracle, prepared.sigma, rng)),
                     prepared.spec.distill.opd_coef};
      break;
    }
    default:
      break;
  }
  return spec;
}

EpisodeResult evaluate_model(const ActorCritic& net, const EnvConfig& env,
                             const ExperimentData& data) {
  PortfolioEnv test(data.series, evaluation_range(data.split.test, env), env);
  return run_greedy(net, std::move(test));
}

ReplicaReport run_replicas(const MethodSpec& spec, const std::vector<std::uint64_t>& seeds,
                           const AlgoConfig& algo, const EnvConfig& env,
                           const ExperimentData& data, const ReplicaSettings& settings,
                           std::uint64_t method_seed) {
  if (seeds.size() < 2) throw ConfigError("run_replicas needs at least two seeds");
  ReplicaReport report;
  report.method = spec.name();

  if (spec.method == Method::rp) {
    const auto log_returns = rp_baseline(*data.series, data.split.test);
    const auto path = cumulative_return_path(log_returns);
    const double total = cumulative_return(log_returns);
    for (auto s : seeds) {
      report.seeds.push_back(s);
      report.returns.push_back(total);
      report.paths.push_back(path);
    }
    report.summarize();
    return report;
  }

  const PreparedMethod prepared = prepare_method(spec, algo, env, data, settings, method_seed);
  std::vector<std::optional<EpisodeResult>> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  parallel_for(seeds.size(), settings.workers, [&](std::size_t i) {
    try {
      const TrainedModel model =
          train(replica_train_spec(prepared, algo, env, seeds[i]), settings.total_steps, seeds[i]);
      results[i] = evaluate_model(model.net, env, data);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (results[i]) {
      report.seeds.push_back(seeds[i]);
      report.returns.push_back(results[i]->cumulative_return_pct);
      report.paths.push_back(cumulative_return_path(results[i]->log_returns));
    } else {
      report.failures.push_back("seed " + std::to_string(seeds[i]) + ": " + errors[i]);
      std::cerr << "warning: " << report.method << " replica failed, " << report.failures.back()
                << '\n';
    }
  }
  report.summarize();
  return report;
}

// --- reporting -------------------------------------------------------------------

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::pair<std::vector<double>, std::vector<double>> path_bands(const ReplicaReport& r) {
  std::size_t len = 0;
  for (const auto& p : r.paths) len = std::max(len, p.size());
  std::vector<double> mean(len, 0.0), sd(len, 0.0);
  std::vector<double> column;
  for (std::size_t t = 0; t < len; ++t) {
    column.clear();
    for (const auto& p : r.paths) {
      if (t < p.size()) column.push_back(p[t]);
    }
    mean[t] = sample_mean(column);
    sd[t] = sample_std(column);
  }
  return {mean, sd};
}

}  // namespace

std::string equity_curve_svg(const ReplicaReport& report) {
  const auto [mean, sd] = path_bands(report);
  const double width = 800, height = 400, margin = 50;
  double lo = 0.0, hi = 0.0;
  for (std::size_t t = 0; t < mean.size(); ++t) {
    lo = std::min(lo, mean[t] - sd[t]);
    hi = std::max(hi, mean[t] + sd[t]);
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(mean.size()) - 1.0);
  auto x = [&](std::size_t t) { return margin + (width - 2 * margin) * static_cast<double>(t) / n; };
  auto y = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"25\" font-family=\"sans-serif\" font-size=\"14\">"
      << report.method << ": cumulative test return (%), mean and 1 sigma band, n = " << report.n
      << "</text>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << fmt(y(0.0), "%.2f") << "\" x2=\""
      << width - margin << "\" y2=\"" << fmt(y(0.0), "%.2f")
      << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  if (!mean.empty()) {
    svg << "<polygon fill=\"#4a78c2\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t t = 0; t < mean.size(); ++t) {
      svg << fmt(x(t), "%.2f") << ',' << fmt(y(mean[t] + sd[t]), "%.2f") << ' ';
    }
    for (std::size_t t = mean.size(); t-- > 0;) {
      svg << fmt(x(t), "%.2f") << ',' << fmt(y(mean[t] - sd[t]), "%.2f") << ' ';
    }
    svg << "\"/>\n<polyline fill=\"none\" stroke=\"#1f3f7a\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < mean.size(); ++t) {
      svg << fmt(x(t), "%.2f") << ',' << fmt(y(mean[t]), "%.2f") << ' ';
    }
    svg << "\"/>\n";
  }
  svg << "<text x=\"5\" y=\"" << fmt(y(hi), "%.2f") << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(hi, "%.1f") << "</text>\n";
  svg << "<text x=\"5\" y=\"" << fmt(y(lo), "%.2f") << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(lo, "%.1f") << "</text>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 15
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">test step</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const std::vector<ReplicaReport>& reports, const std::string& baseline,
                 const std::filesystem::path& out_dir) {
  if (reports.empty()) throw UsageError("emit_report needs at least one report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const ReplicaReport* base = nullptr;
  for (const auto& r : reports) {
    if (r.method == baseline) base = &r;
  }

  std::ostringstream csv;
  csv << "method,mean,std,n,t_stat,p_value_pct\n";
  json methods = json::array();
  for (const auto& r : reports) {
    std::optional<TTestResult> test;
    if (base && &r != base && base->n >= 2 && r.n >= 2) {
      test = welch_one_sided(base->returns, r.returns);
    }
    csv << r.method << ',' << fmt(r.mean) << ',' << fmt(r.std) << ',' << r.n << ','
        << (test ? fmt(test->t_stat) : "") << ',' << (test ? fmt(test->p_value_pct) : "") << '\n';

    const auto [mean, sd] = path_bands(r);
    json m;
    m["method"] = r.method;
    m["n"] = r.n;
    m["mean"] = r.mean;
    m["std"] = r.std;
    m["t_stat"] = test ? number_or_null(test->t_stat) : json(nullptr);
    m["p_value_pct"] = test ? number_or_null(test->p_value_pct) : json(nullptr);
    m["df"] = test ? number_or_null(test->df) : json(nullptr);
    m["seeds"] = r.seeds;
    m["returns"] = r.returns;
    m["failures"] = r.failures;
    m["paths"] = r.paths;
    m["mean_path"] = mean;
    m["std_path"] = sd;
    methods.push_back(std::move(m));

    const auto dir = out_dir / r.method;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream svg(dir / "equity_curve.svg");
    if (!(svg << equity_curve_svg(r))) throw IoError("cannot write " + (dir / "equity_curve.svg").string());
  }

  json doc;
  doc["baseline"] = baseline;
  doc["methods"] = std::move(methods);

  std::ofstream csv_file(out_dir / "results.csv");
  if (!(csv_file << csv.str())) throw IoError("cannot write " + (out_dir / "results.csv").string());
  std::ofstream json_file(out_dir / "results.json");
  if (!(json_file << doc.dump(1) << '\n')) {
    throw IoError("cannot write " + (out_dir / "results.json").string());
  }
}

std::vector<ReplicaReport> load_reports(const std::filesystem::path& results_json) {
  std::ifstream in(results_json);
  if (!in) throw IoError("cannot open " + results_json.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(results_json.string() + ": " + e.what());
  }
  std::vector<ReplicaReport> out;
  for (const auto& m : doc.at("methods")) {
    ReplicaReport r;
    r.method = m.at("method").get<std::string>();
    r.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    r.returns = m.at("returns").get<std::vector<double>>();
    r.failures = m.at("failures").get<std::vector<std::string>>();
    r.paths = m.at("paths").get<std::vector<std::vector<double>>>();
    r.summarize();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tsctl
