#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tsctl {

using Date = std::chrono::year_month_day;

enum class FeatureKind { market, non_market };

FeatureKind parse_feature_kind(const std::string& text);
std::string to_string(FeatureKind kind);

Date parse_date(const std::string& text);
std::string format_date(Date date);

/// Half-open row interval [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Dated, column-major table as read from disk. Missing cells are NaN.
struct RawSeries {
  std::vector<Date> dates;
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return dates.size(); }
  std::size_t cols() const { return columns.size(); }
};

/// Per-feature log-returns (market) or first differences (non-market).
/// `universe` holds column indices of the tradable assets, in asset order.
struct ProcessedSeries {
  std::vector<Date> dates;
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  std::vector<std::vector<double>> columns;
  std::vector<std::size_t> universe;

  std::size_t rows() const { return dates.size(); }
  std::size_t cols() const { return columns.size(); }
  std::size_t n_assets() const { return universe.size(); }

  double at(std::size_t row, std::size_t col) const { return columns[col][row]; }
  double asset_return(std::size_t row, std::size_t asset) const {
    return columns[universe[asset]][row];
  }

  std::vector<std::size_t> market_columns() const;
  std::vector<std::size_t> non_market_columns() const;
  std::size_t column_index(const std::string& name) const;

  /// Rows [range.begin, range.end) with the same schema.
  ProcessedSeries slice(IndexRange range) const;

  /// Throws ValidationError when any structural invariant is broken.
  void validate() const;
};

struct DataSplit {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
};

/// Ground-truth decomposition for synthetic series: per asset, per row.
struct GroundTruth {
  std::vector<std::vector<double>> signal;
  std::vector<std::vector<double>> noise;
  std::vector<std::vector<double>> predictor;
};

/// Synthetic market of `n_assets` assets. Each asset owns a hidden AR(1)
/// predictor x (unit stationary variance) that is published as a
/// non-market column; the asset's signal at t is `signal_scale * x[t-1]`
/// and its noise is i.i.d. N(0, noise_scale^2).
struct SyntheticSpec {
  std::size_t n_assets = 4;
  std::size_t length = 2000;
  double ar_coef = 0.9;
  double signal_scale = 0.01;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;
  bool publish_predictors = true;

  void validate() const;
};

/// Reads `date,<feat1>,...` CSV. Empty cells are missing. Every column must
/// have an entry in `kinds`. Rows are returned sorted by date.
RawSeries load_csv(const std::filesystem::path& path,
                   const std::map<std::string, FeatureKind>& kinds);

/// Log-returns for market columns, last-valid-value differences for the
/// rest; the first row is dropped. An empty `universe` selects every market
/// column.
ProcessedSeries process_raw(const RawSeries& raw,
                            const std::vector<std::string>& universe = {});

/// Contiguous train/validation/test split. Validation and test sizes are
/// floor(length * ratio); train takes the remainder.
DataSplit split(std::size_t length, std::array<double, 3> ratios,
                std::size_t min_range_length = 0);
DataSplit split(const ProcessedSeries& series, std::array<double, 3> ratios,
                std::size_t min_range_length = 0);

std::pair<ProcessedSeries, GroundTruth> generate_synthetic(const SyntheticSpec& spec);

ProcessedSeries concat(const ProcessedSeries& a, const ProcessedSeries& b);

/// Writes a processed series as CSV (same layout as the raw input).
void save_series_csv(const ProcessedSeries& series, const std::filesystem::path& path);

/// Reads an already-processed CSV written by save_series_csv.
ProcessedSeries load_processed_csv(const std::filesystem::path& path,
                                   const std::map<std::string, FeatureKind>& kinds,
                                   const std::vector<std::string>& universe = {});

}  // namespace tsctl
