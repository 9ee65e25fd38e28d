#pragma once

#include <span>
#include <vector>

namespace tsctl {

/// (exp(sum of log-returns) - 1) * 100.
double cumulative_return(std::span<const double> log_returns);

/// Running cumulative return (percent) after each step.
std::vector<double> cumulative_return_path(std::span<const double> log_returns);

double sample_mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_std(std::span<const double> xs);

struct TTestResult {
  double t_stat = 0.0;
  double p_value_pct = 50.0;
  double df = 0.0;
};

/// One-sided Welch test of "method beats baseline":
/// t = (mean_b - mean_m) / sqrt(s_b^2 / n_b + s_m^2 / n_m) with
/// Welch-Satterthwaite df and p = 100 * StudentCDF(t, df). Small p means the
/// method's mean is significantly higher.
TTestResult welch_one_sided(std::span<const double> baseline, std::span<const double> method);

/// Same test from summary statistics (sample std, sample size).
TTestResult welch_one_sided(double mean_b, double std_b, double n_b, double mean_m, double std_m,
                            double n_m);

}  // namespace tsctl
