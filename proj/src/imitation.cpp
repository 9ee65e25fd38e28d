#include "tsctl/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "tsctl/errors.hpp"

namespace tsctl {

void DistillConfig::validate() const {
  if (!(opd_coef >= 0.0)) throw ConfigError("il.opd_coef must be >= 0");
  for (double s : lgn_sigma) {
    if (!(s >= 0.0)) throw ConfigError("il.lgn_sigma entries must be >= 0");
  }
}

DistillConfig::Mode parse_distill_mode(const std::string& text) {
  if (text == "dpd") return DistillConfig::Mode::dpd;
  if (text == "opd") return DistillConfig::Mode::opd;
  throw ConfigError("unknown il.mode '" + text + "' (expected dpd | opd)");
}

DistillConfig::OracleKind parse_oracle_kind(const std::string& text) {
  if (text == "analytic") return DistillConfig::OracleKind::analytic;
  if (text == "rl") return DistillConfig::OracleKind::rl;
  throw ConfigError("unknown il.oracle '" + text + "' (expected analytic | rl)");
}

Action oracle_action(std::span<const double> log_returns) {
  Action a(log_returns.size(), 0);
  double best = 0.0;
  std::size_t best_i = log_returns.size();
  for (std::size_t i = 0; i < log_returns.size(); ++i) {
    const double simple = std::abs(std::expm1(log_returns[i]));
    if (simple > best) {
      best = simple;
      best_i = i;
    }
  }
  if (best_i < log_returns.size()) a[best_i] = log_returns[best_i] > 0.0 ? 1 : -1;
  return a;
}

namespace {

void check_range(const ProcessedSeries& series, IndexRange range) {
  if (range.begin > range.end || range.end > series.rows()) {
    throw RangeError("oracle range outside the series");
  }
  if (series.n_assets() == 0) throw ConfigError("oracle needs a non-empty universe");
}

std::vector<double> row_returns(const ProcessedSeries& series, std::size_t t) {
  std::vector<double> r(series.n_assets());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = series.asset_return(t, i);
  return r;
}

std::vector<double> to_labels(const Action& a) { return {a.begin(), a.end()}; }

// Smaller is preferred among equally good actions.
bool tie_preferred(const Action& a, const Action& b) {
  auto nnz = [](const Action& x) {
    return std::count_if(x.begin(), x.end(), [](int v) { return v != 0; });
  };
  const auto na = nnz(a), nb = nnz(b);
  if (na != nb) return na < nb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    if (pa != pb) return pa;
  }
  return a > b;  // long before short on identical support
}

}  // namespace

OracleTrajectory analytic_oracle(const ProcessedSeries& series, IndexRange range,
                                 double gross_limit) {
  check_range(series, range);
  if (!(gross_limit > 0.0)) throw ConfigError("gross limit must be positive");
  OracleTrajectory out;
  out.begin = range.begin;
  out.actions.reserve(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) {
    out.actions.push_back(to_labels(oracle_action(row_returns(series, t))));
  }
  return out;
}

OracleTrajectory brute_force_oracle(const ProcessedSeries& series, IndexRange range,
                                    double gross_limit) {
  check_range(series, range);
  const std::size_t n = series.n_assets();
  if (n > 10) {
    throw CapacityError("brute-force oracle enumerates 3^N actions; N = " + std::to_string(n) +
                        " exceeds 10");
  }
  std::size_t n_actions = 1;
  for (std::size_t i = 0; i < n; ++i) n_actions *= 3;

  std::vector<Action> actions(n_actions, Action(n));
  std::vector<Vector> weights(n_actions);
  for (std::size_t k = 0; k < n_actions; ++k) {
    std::size_t code = k;
    for (std::size_t i = 0; i < n; ++i) {
      actions[k][i] = static_cast<int>(code % 3) - 1;
      code /= 3;
    }
    weights[k] = normalize_action(actions[k], gross_limit);
  }

  constexpr double kTieTolerance = 1e-14;
  OracleTrajectory out;
  out.begin = range.begin;
  out.actions.reserve(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) {
    const auto r = row_returns(series, t);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < n_actions; ++k) {
      double value;
      try {
        value = portfolio_log_return(weights[k], r);
      } catch (const RuinError&) {
        continue;
      }
      if (value > best + kTieTolerance ||
          (std::abs(value - best) <= kTieTolerance && tie_preferred(actions[k], actions[best_k]))) {
        if (value > best) best = value;
        best_k = k;
      }
    }
    out.actions.push_back(to_labels(actions[best_k]));
  }
  return out;
}

double dpd_reward(const Action& action, std::span<const double> target) {
  if (action.size() != target.size()) throw UsageError("action and oracle label differ in size");
  double sq = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double d = action[i] - target[i];
    sq += d * d;
  }
  return -std::sqrt(sq);
}

double opd_reward(double env_reward, const Action& action, std::span<const double> target,
                  double coef) {
  if (coef == 0.0) return env_reward;
  return env_reward + coef * dpd_reward(action, target);
}

OracleTrajectory lgn_perturb(const OracleTrajectory& trajectory, std::span<const double> sigma,
                             std::mt19937_64& rng) {
  if (trajectory.actions.empty()) return trajectory;
  const std::size_t n = trajectory.actions.front().size();
  if (sigma.size() != n && sigma.size() != 1) {
    throw DomainError("lgn sigma must have one entry per asset or a single entry");
  }
  for (double s : sigma) {
    if (!(s >= 0.0)) throw DomainError("lgn sigma must be non-negative");
  }
  OracleTrajectory out = trajectory;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& row : out.actions) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigma.size() == 1 ? sigma[0] : sigma[i];
      const double z = gauss(rng);
      row[i] += s * z;
    }
  }
  out.perturbed = true;
  return out;
}

double dnt(std::span<const double> expected_moves) {
  if (expected_moves.size() < 2) throw DomainError("DNT needs at least two assets");
  std::vector<double> mags;
  mags.reserve(expected_moves.size());
  for (double m : expected_moves) mags.push_back(std::abs(m));
  std::partial_sort(mags.begin(), mags.begin() + 2, mags.end(), std::greater<>());
  return mags[0] - mags[1];
}

}  // namespace tsctl
