#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tsctl/commands.hpp"
#include "tsctl/errors.hpp"
#include "tsctl/experiment.hpp"
#include "tsctl/imitation.hpp"
#include "tsctl/smoothing.hpp"
#include "tsctl/stats.hpp"

namespace py = pybind11;
using namespace tsctl;

namespace {

/// Market-only frame from a (rows x assets) matrix of log-returns.
ProcessedSeries frame_from_returns(const Eigen::MatrixXd& returns) {
  ProcessedSeries s;
  const auto start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 1};
  for (Eigen::Index t = 0; t < returns.rows(); ++t) {
    s.dates.emplace_back(start + std::chrono::days{static_cast<int>(t)});
  }
  for (Eigen::Index i = 0; i < returns.cols(); ++i) {
    s.names.push_back("asset" + std::to_string(i));
    s.kinds.push_back(FeatureKind::market);
    const auto col = returns.col(i);
    s.columns.emplace_back(col.data(), col.data() + col.size());
    s.universe.push_back(static_cast<std::size_t>(i));
  }
  return s;
}

py::dict ttest_dict(const TTestResult& r) {
  py::dict d;
  d["t_stat"] = r.t_stat;
  d["p_value_pct"] = r.p_value_pct;
  d["df"] = r.df;
  return d;
}

CommandOptions options(std::optional<std::string> out, std::optional<std::uint64_t> seed,
                       std::optional<int> workers) {
  CommandOptions o;
  o.out = std::move(out);
  o.seed = seed;
  o.workers = workers;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-series control laboratory: smoothing curricula, oracle distillation, "
            "actor-critic learners and replicated evaluation";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError");

  m.def("ema_alpha", &ema_alpha, py::arg("window"));
  m.def("ema", [](const std::vector<double>& xs, int window) { return ema(xs, window); },
        py::arg("series"), py::arg("window"));
  m.def("round_returns",
        [](const std::vector<double>& xs, int decimals) { return round_returns(xs, decimals); },
        py::arg("series"), py::arg("decimals"));
  m.def("stage_schedule",
        [](int stages, std::int64_t updates) {
          std::vector<std::pair<int, std::int64_t>> out;
          for (const auto& s : stage_schedule(stages, updates)) out.emplace_back(s.window, s.budget);
          return out;
        },
        py::arg("stages"), py::arg("total_updates"),
        "List of (ema window, update budget) pairs.");

  m.def("normalize_action", &normalize_action, py::arg("action"), py::arg("gross_limit"));
  m.def("portfolio_log_return",
        [](const Eigen::VectorXd& w, const std::vector<double>& r, bool linear) {
          return portfolio_log_return(w, r, linear);
        },
        py::arg("weights"), py::arg("log_returns"), py::arg("linear") = false);

  m.def("oracle_action", [](const std::vector<double>& r) { return oracle_action(r); },
        py::arg("log_returns"));
  m.def("analytic_oracle",
        [](const Eigen::MatrixXd& returns, double gross_limit) {
          const auto s = frame_from_returns(returns);
          return analytic_oracle(s, {0, s.rows()}, gross_limit).actions;
        },
        py::arg("log_returns"), py::arg("gross_limit") = 1.0,
        "Per-row oracle actions for a (rows x assets) matrix of log-returns.");
  m.def("brute_force_oracle",
        [](const Eigen::MatrixXd& returns, double gross_limit) {
          const auto s = frame_from_returns(returns);
          return brute_force_oracle(s, {0, s.rows()}, gross_limit).actions;
        },
        py::arg("log_returns"), py::arg("gross_limit") = 1.0);
  m.def("dnt", [](const std::vector<double>& moves) { return dnt(moves); },
        py::arg("expected_moves"));
  m.def("dpd_reward",
        [](const Action& a, const std::vector<double>& target) { return dpd_reward(a, target); },
        py::arg("action"), py::arg("target"));
  m.def("opd_reward",
        [](double r, const Action& a, const std::vector<double>& target, double c) {
          return opd_reward(r, a, target, c);
        },
        py::arg("env_reward"), py::arg("action"), py::arg("target"), py::arg("coef") = 0.5);

  m.def("cumulative_return",
        [](const std::vector<double>& lr) { return cumulative_return(lr); },
        py::arg("log_returns"));
  m.def("welch_one_sided",
        [](const std::vector<double>& b, const std::vector<double>& x) {
          return ttest_dict(welch_one_sided(b, x));
        },
        py::arg("baseline"), py::arg("method"));
  m.def("welch_one_sided_summary",
        [](double mb, double sb, double nb, double mm, double sm, double nm) {
          return ttest_dict(welch_one_sided(mb, sb, nb, mm, sm, nm));
        },
        py::arg("mean_b"), py::arg("std_b"), py::arg("n_b"), py::arg("mean_m"),
        py::arg("std_m"), py::arg("n_m"));

  m.def("compute_gae",
        [](const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
           const std::vector<int>& dones, double bootstrap, double gamma, double lambda,
           bool normalize) {
          RolloutBuffer b;
          b.resize(static_cast<std::size_t>(rewards.size()), 1);
          if (values.size() != rewards.size() || dones.size() != b.size()) {
            throw UsageError("rewards, values and dones must have equal length");
          }
          b.rewards = rewards;
          b.values = values;
          for (std::size_t i = 0; i < dones.size(); ++i) b.dones[i] = dones[i] != 0;
          b.bootstrap_value = bootstrap;
          compute_gae(b, gamma, lambda, normalize);
          return std::make_pair(b.advantages, b.returns);
        },
        py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap_value"),
        py::arg("gamma"), py::arg("gae_lambda"), py::arg("normalize") = false,
        "Returns (advantages, returns).");

  m.def("generate_synthetic",
        [](std::size_t n_assets, std::size_t length, double noise_scale, std::uint64_t seed,
           double ar_coef, double signal_scale) {
          SyntheticSpec spec;
          spec.n_assets = n_assets;
          spec.length = length;
          spec.noise_scale = noise_scale;
          spec.seed = seed;
          spec.ar_coef = ar_coef;
          spec.signal_scale = signal_scale;
          const auto [series, truth] = generate_synthetic(spec);
          Eigen::MatrixXd returns(static_cast<Eigen::Index>(series.rows()),
                                  static_cast<Eigen::Index>(n_assets));
          for (std::size_t t = 0; t < series.rows(); ++t) {
            for (std::size_t i = 0; i < n_assets; ++i) {
              returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                  series.asset_return(t, i);
            }
          }
          py::dict d;
          d["returns"] = returns;
          d["signal"] = truth.signal;
          d["noise"] = truth.noise;
          d["predictor"] = truth.predictor;
          return d;
        },
        py::arg("n_assets") = 4, py::arg("length") = 2000, py::arg("noise_scale") = 0.0,
        py::arg("seed") = 0, py::arg("ar_coef") = 0.9, py::arg("signal_scale") = 0.01);

  m.def("profile",
        [](const std::string& name, const std::string& algorithm) {
          const Profile p = load_profile(name, parse_algorithm(algorithm));
          nlohmann::json j;
          j["algo"] = algo_to_json(p.algo);
          j["env"] = env_to_json(p.env);
          return j.dump();
        },
        py::arg("name"), py::arg("algorithm") = "ppo", "Profile as a JSON string.");

  auto command = [&m](const char* name, auto fn) {
    m.def(name,
          [fn](const std::string& config, std::optional<std::string> out,
               std::optional<std::uint64_t> seed, std::optional<int> workers) {
            const RunConfig cfg = load_config_with(config, options(out, seed, workers));
            py::gil_scoped_release release;
            return fn(cfg).string();
          },
          py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
          py::arg("workers") = py::none());
  };
  command("process", [](const RunConfig& c) { return cmd_process(c); });
  command("synth", [](const RunConfig& c) { return cmd_synth(c); });
  command("tune", [](const RunConfig& c) { return cmd_tune(c); });
  command("train", [](const RunConfig& c) { return cmd_train(c); });
  command("evaluate", [](const RunConfig& c) { return cmd_evaluate(c); });
  m.def("report", [](const std::string& dir) { return cmd_report(dir); }, py::arg("dir"));
}
