#include "tsctl/smoothing.hpp"

#include <cmath>

#include "tsctl/errors.hpp"

namespace tsctl {

void CurriculumSchedule::validate() const {
  if (stages < 1) throw DomainError("curriculum needs at least one stage");
}

CurriculumSchedule::Mode parse_curriculum_mode(const std::string& text) {
  if (text == "staged") return CurriculumSchedule::Mode::staged;
  if (text == "positional") return CurriculumSchedule::Mode::positional;
  throw ConfigError("unknown smoothing.mode '" + text + "' (expected staged | positional)");
}

std::string to_string(CurriculumSchedule::Mode mode) {
  return mode == CurriculumSchedule::Mode::staged ? "staged" : "positional";
}

double ema_alpha(int window) {
  if (window < 1) throw DomainError("EMA window must be >= 1, got " + std::to_string(window));
  return 2.0 / (static_cast<double>(window) + 1.0);
}

std::vector<double> ema(std::span<const double> series, int window) {
  const double alpha = ema_alpha(window);
  if (series.empty()) throw DomainError("EMA of an empty sequence");
  std::vector<double> out(series.begin(), series.end());
  if (window == 1) return out;
  for (std::size_t t = 1; t < out.size(); ++t) {
    out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1];
  }
  return out;
}

double round_half_away(double value, int decimals) {
  if (decimals < 0) throw DomainError("decimal places must be >= 0");
  if (!std::isfinite(value)) return value;
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  const double whole = std::trunc(scaled);
  const double frac = std::abs(scaled - whole);
  // 0.015 * 100 = 1.4999999999999998; treat representation-level misses
  // of the .5 boundary as ties.
  if (std::abs(frac - 0.5) <= 1e-9 * std::max(1.0, std::abs(scaled))) {
    return (whole + std::copysign(1.0, value)) / scale;
  }
  return std::round(scaled) / scale;
}

std::vector<double> round_returns(std::span<const double> series, int decimals) {
  std::vector<double> out;
  out.reserve(series.size());
  for (double v : series) out.push_back(round_half_away(v, decimals));
  return out;
}

ProcessedSeries apply_smoothing(const ProcessedSeries& series, const SmoothingMethod& method) {
  if (method.kind == SmoothingMethod::Kind::none || series.rows() == 0) return series;
  ProcessedSeries out = series;
  for (auto& col : out.columns) {
    col = method.kind == SmoothingMethod::Kind::ema ? ema(col, method.window)
                                                     : round_returns(col, method.decimals);
  }
  return out;
}

ProcessedSeries inverse_smooth_positional(const ProcessedSeries& series, int stages) {
  if (stages < 1 || static_cast<std::size_t>(stages) > series.rows()) {
    throw DomainError("inverse smoothing needs 1 <= S <= rows, got S = " + std::to_string(stages));
  }
  const std::size_t part = series.rows() / static_cast<std::size_t>(stages);
  ProcessedSeries out = series;
  for (int i = 0; i < stages; ++i) {
    const std::size_t begin = static_cast<std::size_t>(i) * part;
    const std::size_t end = i + 1 == stages ? series.rows() : begin + part;
    const int window = stages - i;
    for (std::size_t c = 0; c < out.cols(); ++c) {
      std::span<const double> piece(series.columns[c].data() + begin, end - begin);
      auto smoothed = ema(piece, window);
      std::copy(smoothed.begin(), smoothed.end(), out.columns[c].begin() + begin);
    }
  }
  return out;
}

std::vector<Stage> stage_schedule(int stages, std::int64_t total_updates) {
  if (stages < 1) throw DomainError("stage count must be >= 1");
  if (total_updates < stages) {
    throw DomainError("stage schedule needs at least one update per stage (" +
                      std::to_string(total_updates) + " < " + std::to_string(stages) + ")");
  }
  const std::int64_t base = total_updates / stages;
  const std::int64_t remainder = total_updates % stages;
  std::vector<Stage> out;
  for (int i = 0; i < stages; ++i) {
    out.push_back({stages - i, base + (i < remainder ? 1 : 0)});
  }
  return out;
}

}  // namespace tsctl
