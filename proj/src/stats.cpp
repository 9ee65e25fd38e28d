#include "tsctl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "tsctl/errors.hpp"

namespace tsctl {

double cumulative_return(std::span<const double> log_returns) {
  const double total = std::accumulate(log_returns.begin(), log_returns.end(), 0.0);
  return std::expm1(total) * 100.0;
}

std::vector<double> cumulative_return_path(std::span<const double> log_returns) {
  std::vector<double> out;
  out.reserve(log_returns.size());
  double total = 0.0;
  for (double r : log_returns) {
    total += r;
    out.push_back(std::expm1(total) * 100.0);
  }
  return out;
}

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

TTestResult welch_one_sided(double mean_b, double std_b, double n_b, double mean_m, double std_m,
                            double n_m) {
  if (n_b < 2 || n_m < 2) throw DomainError("Welch test needs at least two samples per group");
  const double vb = std_b * std_b / n_b;
  const double vm = std_m * std_m / n_m;
  const double se2 = vb + vm;
  TTestResult out;
  if (se2 == 0.0) {
    if (mean_b == mean_m) return out;  // t = 0, p = 50 by convention
    out.t_stat = mean_b > mean_m ? INFINITY : -INFINITY;
    out.p_value_pct = mean_b > mean_m ? 100.0 : 0.0;
    out.df = n_b + n_m - 2.0;
    return out;
  }
  out.t_stat = (mean_b - mean_m) / std::sqrt(se2);
  out.df = se2 * se2 / (vb * vb / (n_b - 1.0) + vm * vm / (n_m - 1.0));
  boost::math::students_t dist(out.df);
  out.p_value_pct = 100.0 * boost::math::cdf(dist, out.t_stat);
  return out;
}

TTestResult welch_one_sided(std::span<const double> baseline, std::span<const double> method) {
  return welch_one_sided(sample_mean(baseline), sample_std(baseline),
                         static_cast<double>(baseline.size()), sample_mean(method),
                         sample_std(method), static_cast<double>(method.size()));
}

}  // namespace tsctl
