#include "tsctl/env.hpp"

#include <cmath>

#include "tsctl/errors.hpp"
#include "tsctl/imitation.hpp"

namespace tsctl {

const std::vector<double>& OracleTrajectory::at_row(std::size_t row) const {
  if (!covers(row)) {
    throw RangeError("oracle trajectory has no entry for row " + std::to_string(row));
  }
  return actions[row - begin];
}

std::string to_string(RewardHook::Kind kind) {
  switch (kind) {
    case RewardHook::Kind::env_return: return "env_return";
    case RewardHook::Kind::dpd: return "dpd";
    case RewardHook::Kind::opd: return "opd";
  }
  return "?";
}

void EnvConfig::validate() const {
  if (state_lag < 5 || state_lag > 60 || state_lag % 5 != 0) {
    throw ConfigError("env.state_lag must be one of 5, 10, ..., 60; got " +
                      std::to_string(state_lag));
  }
  if (!(gross_limit > 0.0)) throw ConfigError("env.gross_limit must be positive");
}

std::vector<int> lag_windows(int state_lag) {
  std::vector<int> out{1, 2, 3, 4, 5};
  for (int w = 10; w <= state_lag; w += 5) out.push_back(w);
  return out;
}

std::size_t observation_dim(const ProcessedSeries& series, const EnvConfig& cfg) {
  if (cfg.observation == EnvConfig::Observation::lookahead) return series.n_assets();
  const std::size_t per_feature = 5 + static_cast<std::size_t>((cfg.state_lag - 5) / 5);
  return series.non_market_columns().size() + series.market_columns().size() * per_feature;
}

void build_observation_into(const ProcessedSeries& series, std::size_t t, const EnvConfig& cfg,
                            std::span<double> out) {
  if (out.size() != observation_dim(series, cfg)) throw UsageError("observation buffer size");
  if (cfg.observation == EnvConfig::Observation::lookahead) {
    if (t >= series.rows()) throw RangeError("lookahead observation past series end");
    for (std::size_t i = 0; i < series.n_assets(); ++i) out[i] = series.asset_return(t, i);
    return;
  }
  const auto lag = static_cast<std::size_t>(cfg.state_lag);
  if (t < lag || t > series.rows()) {
    throw RangeError("observation at t = " + std::to_string(t) + " needs " + std::to_string(lag) +
                     " rows of history");
  }
  std::size_t k = 0;
  for (auto c : series.non_market_columns()) out[k++] = series.columns[c][t - 1];
  const auto windows = lag_windows(cfg.state_lag);
  for (auto c : series.market_columns()) {
    const auto& col = series.columns[c];
    double sum = 0.0;
    std::size_t taken = 0;
    for (int w : windows) {
      while (taken < static_cast<std::size_t>(w)) {
        sum += col[t - 1 - taken];
        ++taken;
      }
      out[k++] = sum;
    }
  }
}

Vector build_observation(const ProcessedSeries& series, std::size_t t, const EnvConfig& cfg) {
  Vector obs(static_cast<Eigen::Index>(observation_dim(series, cfg)));
  build_observation_into(series, t, cfg, std::span<double>(obs.data(), obs.size()));
  return obs;
}

Vector normalize_action(const Action& action, double gross_limit) {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(action.size()));
  double gross = 0.0;
  for (int a : action) {
    if (a < -1 || a > 1) throw DomainError("action components must be -1, 0 or 1");
    gross += std::abs(a);
  }
  if (gross == 0.0) return w;
  for (std::size_t i = 0; i < action.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = gross_limit * action[i] / gross;
  }
  return w;
}

double portfolio_log_return(const Vector& weights, std::span<const double> log_returns,
                            bool linear) {
  if (static_cast<std::size_t>(weights.size()) != log_returns.size()) {
    throw UsageError("weights and returns differ in length");
  }
  double growth = 0.0;
  for (std::size_t i = 0; i < log_returns.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    if (w == 0.0) continue;
    growth += linear ? w * log_returns[i] : w * std::expm1(log_returns[i]);
  }
  if (linear) return growth;
  if (!(1.0 + growth > 0.0)) {
    throw RuinError("portfolio simple return " + std::to_string(100.0 * growth) +
                    "% wipes out the portfolio");
  }
  return std::log1p(growth);
}

PortfolioEnv::PortfolioEnv(std::shared_ptr<const ProcessedSeries> series, IndexRange range,
                           EnvConfig cfg, RewardHook hook)
    : series_(std::move(series)), range_(range), cfg_(cfg), hook_(std::move(hook)) {
  if (!series_) throw UsageError("environment needs a series");
  cfg_.validate();
  if (series_->n_assets() == 0) throw ConfigError("environment universe is empty");
  if (range_.begin > range_.end || range_.end > series_->rows()) {
    throw RangeError("environment range outside the series");
  }
  const std::size_t warmup =
      cfg_.observation == EnvConfig::Observation::lagged ? static_cast<std::size_t>(cfg_.state_lag)
                                                         : 0;
  if (range_.size() < warmup + 1) {
    throw RangeError("environment range of " + std::to_string(range_.size()) +
                     " rows is too short for state lag " + std::to_string(cfg_.state_lag));
  }
  if (hook_.kind != RewardHook::Kind::env_return) {
    if (!hook_.oracle) throw ConfigError("distillation reward needs an oracle trajectory");
    if (hook_.oracle->actions.empty() || hook_.oracle->actions.front().size() != n_assets()) {
      throw ConfigError("oracle trajectory does not match the universe size");
    }
  }
  start_ = range_.begin + warmup;
  obs_dim_ = tsctl::observation_dim(*series_, cfg_);
  returns_scratch_.resize(n_assets());
}

Vector PortfolioEnv::observe() const { return build_observation(*series_, t_, cfg_); }

Vector PortfolioEnv::reset() {
  t_ = start_;
  done_ = false;
  log_value_ = 0.0;
  return observe();
}

StepOutcome PortfolioEnv::step(const Action& action) {
  if (done_) throw UsageError("step called on a finished episode; call reset first");
  if (action.size() != n_assets()) throw UsageError("action size differs from universe size");

  StepOutcome out;
  out.info.weights = normalize_action(action, cfg_.gross_limit);
  for (std::size_t i = 0; i < n_assets(); ++i) returns_scratch_[i] = series_->asset_return(t_, i);
  out.info.log_return = portfolio_log_return(out.info.weights, returns_scratch_, cfg_.linear_reward);
  log_value_ += out.info.log_return;
  out.info.portfolio_value = std::exp(log_value_);

  if (hook_.kind == RewardHook::Kind::env_return) {
    out.reward = out.info.log_return;
  } else {
    const auto& target = hook_.oracle->at_row(t_);
    out.reward = hook_.kind == RewardHook::Kind::dpd
                     ? dpd_reward(action, target)
                     : opd_reward(out.info.log_return, action, target, hook_.opd_coef);
  }

  ++t_;
  done_ = t_ >= range_.end;
  if (!done_) out.next_observation = observe();
  out.done = done_;
  return out;
}

}  // namespace tsctl
