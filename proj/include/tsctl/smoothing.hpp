#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsctl/data.hpp"

namespace tsctl {

/// Smoothing applied to a whole training frame.
struct SmoothingMethod {
  enum class Kind { none, ema, round };
  Kind kind = Kind::none;
  int window = 1;    // EMA lagging window w_l
  int decimals = 2;  // rounding places

  static SmoothingMethod none() { return {}; }
  static SmoothingMethod ema(int window) { return {Kind::ema, window, 2}; }
  static SmoothingMethod round(int decimals) { return {Kind::round, 1, decimals}; }
};

/// Inverse-smoothing curriculum over `stages` levels of decreasing
/// smoothing. `staged` retrains on the whole frame at each level;
/// `positional` smooths consecutive partitions of the frame once.
struct CurriculumSchedule {
  enum class Mode { staged, positional };
  int stages = 1;
  Mode mode = Mode::staged;

  void validate() const;
};

CurriculumSchedule::Mode parse_curriculum_mode(const std::string& text);
std::string to_string(CurriculumSchedule::Mode mode);

/// EMA weight for a lagging window: 2 / (w_l + 1).
double ema_alpha(int window);

/// out[0] = in[0]; out[t] = alpha * in[t] + (1 - alpha) * out[t-1].
std::vector<double> ema(std::span<const double> series, int window);

/// Rounds half away from zero to `decimals` places. Values that sit on a
/// decimal tie up to floating-point representation error (0.015 at 2
/// places) are treated as exact ties.
std::vector<double> round_returns(std::span<const double> series, int decimals);
double round_half_away(double value, int decimals);

/// Applies `method` to every column.
ProcessedSeries apply_smoothing(const ProcessedSeries& series, const SmoothingMethod& method);

/// Splits the frame into `stages` partitions of floor(rows / stages) rows
/// (remainder joins the last) and smooths partition i with w_l = stages - i.
ProcessedSeries inverse_smooth_positional(const ProcessedSeries& series, int stages);

struct Stage {
  int window;
  std::int64_t budget;

  bool operator==(const Stage&) const = default;
};

/// Windows stages..1 with budgets that differ by at most one and sum to
/// `total_updates`; earlier stages receive the remainder.
std::vector<Stage> stage_schedule(int stages, std::int64_t total_updates);

}  // namespace tsctl
