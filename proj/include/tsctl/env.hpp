#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsctl/data.hpp"

namespace tsctl {

using Vector = Eigen::VectorXd;

/// Per-asset position signal in {-1, 0, 1}.
using Action = std::vector<int>;

/// Per-step oracle actions over a row range. Entries are in {-1, 0, 1}
/// unless the trajectory has been perturbed with label noise.
struct OracleTrajectory {
  std::size_t begin = 0;
  std::vector<std::vector<double>> actions;
  bool perturbed = false;

  std::size_t size() const { return actions.size(); }
  bool covers(std::size_t row) const { return row >= begin && row < begin + actions.size(); }
  const std::vector<double>& at_row(std::size_t row) const;
};

/// What the learner is paid per step.
struct RewardHook {
  enum class Kind { env_return, dpd, opd };
  Kind kind = Kind::env_return;
  std::shared_ptr<const OracleTrajectory> oracle;
  double opd_coef = 0.5;
};

std::string to_string(RewardHook::Kind kind);

struct EnvConfig {
  /// `lagged` builds the trailing-window state; `lookahead` exposes the
  /// current step's asset returns (oracle training only).
  enum class Observation { lagged, lookahead };

  int state_lag = 10;
  double gross_limit = 1.0;
  bool linear_reward = false;
  Observation observation = Observation::lagged;

  void validate() const;
};

/// Window lengths of the lag block: 1..5, then 10, 15, ..., state_lag.
std::vector<int> lag_windows(int state_lag);
std::size_t observation_dim(const ProcessedSeries& series, const EnvConfig& cfg);

/// State at row t from rows < t only: non-market values at t-1 followed,
/// per market column, by trailing sums over lag_windows(state_lag).
Vector build_observation(const ProcessedSeries& series, std::size_t t, const EnvConfig& cfg);
void build_observation_into(const ProcessedSeries& series, std::size_t t, const EnvConfig& cfg,
                            std::span<double> out);

/// w_i = L * a_i / sum_j |a_j|; all-zero action maps to all-zero weights.
Vector normalize_action(const Action& action, double gross_limit);

/// ln(1 + sum_i w_i (exp(r_i) - 1)). Throws RuinError when the portfolio
/// simple return is -100% or worse. `linear` uses sum_i w_i r_i instead.
double portfolio_log_return(const Vector& weights, std::span<const double> log_returns,
                            bool linear = false);

struct StepInfo {
  Vector weights;
  double log_return = 0.0;
  double portfolio_value = 1.0;
};

struct StepOutcome {
  Vector next_observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// One traversal of `range`: starts at range.begin + state_lag (lagged
/// observations) and ends when t reaches range.end.
class PortfolioEnv {
 public:
  PortfolioEnv(std::shared_ptr<const ProcessedSeries> series, IndexRange range, EnvConfig cfg,
               RewardHook hook = {});

  Vector reset();
  StepOutcome step(const Action& action);

  std::size_t observation_dim() const { return obs_dim_; }
  std::size_t n_assets() const { return series_->n_assets(); }
  std::size_t episode_length() const { return range_.end - start_; }
  std::size_t time() const { return t_; }
  bool done() const { return done_; }
  double portfolio_value() const { return std::exp(log_value_); }
  /// Running sum of per-step portfolio log-returns.
  double log_value() const { return log_value_; }
  const EnvConfig& config() const { return cfg_; }
  const ProcessedSeries& series() const { return *series_; }
  IndexRange range() const { return range_; }

 private:
  Vector observe() const;

  std::shared_ptr<const ProcessedSeries> series_;
  IndexRange range_;
  EnvConfig cfg_;
  RewardHook hook_;
  std::size_t obs_dim_ = 0;
  std::size_t start_ = 0;
  std::size_t t_ = 0;
  bool done_ = true;
  double log_value_ = 0.0;
  std::vector<double> returns_scratch_;
};

}  // namespace tsctl
