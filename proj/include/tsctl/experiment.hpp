#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsctl/data.hpp"
#include "tsctl/env.hpp"
#include "tsctl/imitation.hpp"
#include "tsctl/rl.hpp"
#include "tsctl/smoothing.hpp"
#include "tsctl/stats.hpp"

namespace tsctl {

/// Method taxonomy: heuristic (rp), vanilla learner (baseline), imitation
/// (dpd, dpd-lgn, opd) and curriculum (round, ema, is, tis).
enum class Method { baseline, rp, dpd, dpd_lgn, opd, round, ema, is, tis };

Method parse_method(const std::string& name);
std::string to_string(Method method);

struct MethodSpec {
  Method method = Method::baseline;
  /// Row label in reports; defaults to the method name.
  std::string label;
  int ema_window = 5;
  int round_decimals = 2;
  int is_stages = 8;
  CurriculumSchedule::Mode is_mode = CurriculumSchedule::Mode::staged;
  /// Candidate stage counts for tis; a single entry skips tuning.
  std::vector<int> tis_space{1, 2, 3, 4, 5, 6, 7, 8};
  DistillConfig distill;
  /// Candidate sigmas for dpd-lgn when distill.lgn_sigma is empty.
  std::vector<double> sigma_space;

  std::string name() const { return label.empty() ? to_string(method) : label; }
};

/// A processed frame and its contiguous split.
struct ExperimentData {
  std::shared_ptr<const ProcessedSeries> series;
  DataSplit split;

  IndexRange train_and_validation() const { return {split.train.begin, split.validation.end}; }
};

/// Range an evaluation episode runs over so that every row of `target`
/// is traded: the state-lag warm-up is taken from the rows before it.
IndexRange evaluation_range(IndexRange target, const EnvConfig& env);

/// Discrete grids over learner fields and the state lag. Keys: lr,
/// steps_per_update, gamma, gae_lambda, entropy_coef, vf_coef, clip_eps,
/// epochs, partition_factor, target_kl, state_lag.
struct HyperparamSpace {
  std::map<std::string, std::vector<double>> grids;

  void validate() const;
  /// Number of grid points (saturates at UINT64_MAX).
  std::uint64_t size() const;
  /// Applies grid point `index` (mixed radix over the keys in order).
  void apply(std::uint64_t index, AlgoConfig& algo, EnvConfig& env) const;
};

/// Validation score of a candidate configuration.
using Scorer =
    std::function<double(const AlgoConfig& algo, const EnvConfig& env, std::uint64_t seed)>;

/// Trains on the train range for `tune_steps` with `reward` and returns the
/// greedy cumulative return (percent) over the validation range.
Scorer validation_scorer(const ExperimentData& data, std::int64_t tune_steps,
                         RewardHook reward = {});

struct SearchSample {
  std::uint64_t grid_index = 0;
  double score = 0.0;
  std::string error;
};

struct SearchResult {
  AlgoConfig algo;
  EnvConfig env;
  double best_score = 0.0;
  std::vector<SearchSample> samples;  // in sampling order
};

/// Samples `budget` grid points (without replacement unless the grid is
/// smaller than the budget), scores each and returns the best. Failed
/// samples score -inf; ties go to the earliest sample.
SearchResult random_grid_search(const HyperparamSpace& space, const AlgoConfig& base_algo,
                                const EnvConfig& base_env, int budget, std::uint64_t seed,
                                const Scorer& scorer, int workers = 1);

/// Trains one model per S on IS-smoothed training data and returns the S
/// with the best validation return.
int tune_tis(const std::vector<int>& s_space, const AlgoConfig& algo, const EnvConfig& env,
             CurriculumSchedule::Mode mode, const ExperimentData& data, std::int64_t tune_steps,
             std::uint64_t seed, int workers = 1);

/// Trains one DPD-LGN student per sigma and returns the best by validation
/// return.
double tune_sigma(const std::vector<double>& sigma_space, const AlgoConfig& algo,
                  const EnvConfig& env, const ExperimentData& data, std::int64_t tune_steps,
                  std::uint64_t seed, int workers = 1);

/// `n` candidates drawn uniformly from [lo, hi]; a collapsed interval
/// gives the single point.
std::vector<double> sigma_candidates(double lo, double hi, int n, std::uint64_t seed);

/// Equal-weight long portfolio (weights 1/N), rebalanced each step, over
/// the rows of `range`. Returns per-step log-returns.
std::vector<double> rp_baseline(const ProcessedSeries& series, IndexRange range);

struct ReplicaReport {
  std::string method;
  std::vector<std::uint64_t> seeds;  // seeds of the successful runs
  std::vector<double> returns;       // cumulative test return (%) per run
  std::vector<std::vector<double>> paths;  // cumulative return (%) after each test step
  std::vector<std::string> failures;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;

  void summarize();
};

struct ReplicaSettings {
  std::int64_t total_steps = 1'000'000;
  std::int64_t tune_steps = 100'000;
  int workers = 1;
};

/// Method-level state shared by every replica: the tuned stage count, the
/// tuned sigma and the oracle trajectory.
struct PreparedMethod {
  MethodSpec spec;
  std::shared_ptr<const ProcessedSeries> train_frame;
  IndexRange train_range;
  std::optional<CurriculumSchedule> curriculum;
  std::shared_ptr<const OracleTrajectory> oracle;
  std::vector<double> sigma;  // LGN std actually used
  int stages = 1;
};

PreparedMethod prepare_method(const MethodSpec& spec, const AlgoConfig& algo,
                              const EnvConfig& env, const ExperimentData& data,
                              const ReplicaSettings& settings, std::uint64_t seed);

/// TrainSpec of one replica; LGN labels are drawn from `replica_seed`.
TrainSpec replica_train_spec(const PreparedMethod& prepared, const AlgoConfig& algo,
                             const EnvConfig& env, std::uint64_t replica_seed);

/// Greedy test-range evaluation of a trained model.
EpisodeResult evaluate_model(const ActorCritic& net, const EnvConfig& env,
                             const ExperimentData& data);

/// Trains one model per seed on train + validation (smoothed, curriculum
/// or distilled as the method requires) and evaluates each greedily over
/// the test range. Failed runs are recorded and excluded.
ReplicaReport run_replicas(const MethodSpec& spec, const std::vector<std::uint64_t>& seeds,
                           const AlgoConfig& algo, const EnvConfig& env,
                           const ExperimentData& data, const ReplicaSettings& settings,
                           std::uint64_t method_seed);

/// Runs `n` tasks on up to `workers` threads. Exceptions are rethrown
/// after all tasks finished (the first by index wins).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

/// Writes results.csv, results.json and <method>/equity_curve.svg under
/// `out_dir`. Each method is tested against `baseline` when that report is
/// present.
void emit_report(const std::vector<ReplicaReport>& reports, const std::string& baseline,
                 const std::filesystem::path& out_dir);

/// Reads back the reports stored in results.json.
std::vector<ReplicaReport> load_reports(const std::filesystem::path& results_json);

/// Renders the mean path with a +-1 sigma band per step.
std::string equity_curve_svg(const ReplicaReport& report);

}  // namespace tsctl
