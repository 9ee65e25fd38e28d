#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tsctl/data.hpp"
#include "tsctl/env.hpp"

namespace tsctl {

struct AlgoConfig;

struct DistillConfig {
  enum class Mode { dpd, opd };
  enum class OracleKind { analytic, rl };

  Mode mode = Mode::dpd;
  double opd_coef = 0.5;
  /// Per-asset label-noise std; a single entry is broadcast to every asset.
  std::vector<double> lgn_sigma;
  OracleKind oracle = OracleKind::analytic;
  std::int64_t rl_oracle_steps = 5'000'000;

  void validate() const;
};

DistillConfig::Mode parse_distill_mode(const std::string& text);
DistillConfig::OracleKind parse_oracle_kind(const std::string& text);

/// Best single-step action for one row of asset log-returns: the full gross
/// budget on the asset with the largest absolute simple return, signed by
/// that return. All-zero returns give the flat action; ties go to the lower
/// asset index.
Action oracle_action(std::span<const double> log_returns);

OracleTrajectory analytic_oracle(const ProcessedSeries& series, IndexRange range,
                                 double gross_limit);

/// Exhaustive search over all 3^N actions per row (N <= 10). Among actions
/// within 1e-14 of the best log-return the one with the fewest positions
/// wins, then the one whose positions sit on the lowest asset indices.
OracleTrajectory brute_force_oracle(const ProcessedSeries& series, IndexRange range,
                                    double gross_limit);

/// Oracle learned by RL: a policy trained for `steps` on observations that
/// hold the current step's asset returns (no state lag), then rolled out
/// greedily over `range`.
OracleTrajectory rl_oracle(std::shared_ptr<const ProcessedSeries> series, IndexRange range,
                           double gross_limit, const AlgoConfig& algo, std::int64_t steps,
                           std::uint64_t seed);

/// -||a - a*||_2
double dpd_reward(const Action& action, std::span<const double> target);
/// env_reward - coef * ||a - a*||_2
double opd_reward(double env_reward, const Action& action, std::span<const double> target,
                  double coef);

/// Adds i.i.d. N(0, sigma_i^2) to every label of asset i. `sigma` holds one
/// entry per asset or a single broadcast entry.
OracleTrajectory lgn_perturb(const OracleTrajectory& trajectory, std::span<const double> sigma,
                             std::mt19937_64& rng);

/// Gap between the largest and second-largest absolute expected move.
double dnt(std::span<const double> expected_moves);

}  // namespace tsctl
