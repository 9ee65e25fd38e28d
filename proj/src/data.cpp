#include "tsctl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tsctl/errors.hpp"

namespace tsctl {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

struct Table {
  std::vector<std::string> header;
  std::vector<Date> dates;
  std::vector<std::vector<double>> columns;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  Table table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  for (auto& name : split_line(line)) table.header.push_back(trim(name));
  if (table.header.size() < 2) {
    throw ParseError(path.string() + ": header needs a date column and at least one feature");
  }
  const std::size_t n_features = table.header.size() - 1;
  table.columns.assign(n_features, {});

  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    }
    try {
      table.dates.push_back(parse_date(trim(cells[0])));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
    for (std::size_t c = 0; c < n_features; ++c) {
      const std::string cell = trim(cells[c + 1]);
      double value = kMissing;
      if (!cell.empty() && !parse_double(cell, value)) {
        throw ParseError(path.string() + ": row " + std::to_string(row) + ", column '" +
                         table.header[c + 1] + "': not a number: '" + cell + "'");
      }
      table.columns[c].push_back(value);
    }
  }
  return table;
}

// Sorts rows by date and rejects duplicates.
void sort_rows(std::vector<Date>& dates, std::vector<std::vector<double>>& columns) {
  std::vector<std::size_t> order(dates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (dates[order[i]] == dates[order[i - 1]]) {
      throw ValidationError("duplicate date " + format_date(dates[order[i]]));
    }
  }
  std::vector<Date> sorted_dates;
  sorted_dates.reserve(dates.size());
  for (auto i : order) sorted_dates.push_back(dates[i]);
  dates = std::move(sorted_dates);
  for (auto& col : columns) {
    std::vector<double> sorted;
    sorted.reserve(col.size());
    for (auto i : order) sorted.push_back(col[i]);
    col = std::move(sorted);
  }
}

std::vector<std::size_t> resolve_universe(const ProcessedSeries& s,
                                          const std::vector<std::string>& universe) {
  std::vector<std::size_t> out;
  if (universe.empty()) return s.market_columns();
  for (const auto& name : universe) out.push_back(s.column_index(name));
  return out;
}

}  // namespace

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "market") return FeatureKind::market;
  if (text == "non_market") return FeatureKind::non_market;
  throw ConfigError("unknown feature kind '" + text + "' (expected market | non_market)");
}

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::market ? "market" : "non_market";
}

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(text);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("malformed date '" + text + "' (expected YYYY-MM-DD)");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw ParseError("invalid calendar date '" + text + "'");
  return date;
}

std::string format_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::vector<std::size_t> ProcessedSeries::market_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < kinds.size(); ++c)
    if (kinds[c] == FeatureKind::market) out.push_back(c);
  return out;
}

std::vector<std::size_t> ProcessedSeries::non_market_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < kinds.size(); ++c)
    if (kinds[c] == FeatureKind::non_market) out.push_back(c);
  return out;
}

std::size_t ProcessedSeries::column_index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("unknown column '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

ProcessedSeries ProcessedSeries::slice(IndexRange range) const {
  if (range.begin > range.end || range.end > rows()) {
    throw RangeError("slice [" + std::to_string(range.begin) + ", " +
                     std::to_string(range.end) + ") outside series of length " +
                     std::to_string(rows()));
  }
  ProcessedSeries out;
  out.names = names;
  out.kinds = kinds;
  out.universe = universe;
  out.dates.assign(dates.begin() + range.begin, dates.begin() + range.end);
  out.columns.reserve(columns.size());
  for (const auto& col : columns) {
    out.columns.emplace_back(col.begin() + range.begin, col.begin() + range.end);
  }
  return out;
}

void ProcessedSeries::validate() const {
  if (names.size() != columns.size() || kinds.size() != columns.size()) {
    throw ValidationError("column names/kinds/data count mismatch");
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != dates.size()) {
      throw ValidationError("column '" + names[c] + "' length differs from date count");
    }
    for (double v : columns[c]) {
      if (std::isnan(v)) throw ValidationError("column '" + names[c] + "' has missing values");
    }
  }
  for (std::size_t i = 1; i < dates.size(); ++i) {
    if (!(dates[i - 1] < dates[i])) throw ValidationError("dates not strictly increasing");
  }
  for (auto u : universe) {
    if (u >= columns.size() || kinds[u] != FeatureKind::market) {
      throw ValidationError("universe column must be an existing market column");
    }
  }
}

void SyntheticSpec::validate() const {
  if (n_assets < 1) throw ValidationError("synthetic spec: n_assets must be >= 1");
  if (length < 10) throw ValidationError("synthetic spec: length must be >= 10");
  if (!(noise_scale >= 0.0)) throw ValidationError("synthetic spec: noise_scale must be >= 0");
  if (!(signal_scale >= 0.0)) throw ValidationError("synthetic spec: signal_scale must be >= 0");
  if (!(std::abs(ar_coef) < 1.0)) throw ValidationError("synthetic spec: |ar_coef| must be < 1");
}

RawSeries load_csv(const std::filesystem::path& path,
                   const std::map<std::string, FeatureKind>& kinds) {
  Table table = read_table(path);
  RawSeries raw;
  std::set<std::string> seen;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (!seen.insert(name).second) throw ValidationError("duplicate column '" + name + "'");
    auto it = kinds.find(name);
    if (it == kinds.end()) throw ConfigError("no feature kind given for column '" + name + "'");
    raw.names.push_back(name);
    raw.kinds.push_back(it->second);
  }
  sort_rows(table.dates, table.columns);
  raw.dates = std::move(table.dates);
  raw.columns = std::move(table.columns);

  for (std::size_t c = 0; c < raw.cols(); ++c) {
    if (raw.kinds[c] != FeatureKind::market) continue;
    const auto& col = raw.columns[c];
    auto first_valid = std::find_if(col.begin(), col.end(), [](double v) { return !std::isnan(v); });
    for (auto it = first_valid; it != col.end(); ++it) {
      if (std::isnan(*it)) {
        throw ValidationError("market column '" + raw.names[c] + "' has a missing value at row " +
                              std::to_string(it - col.begin() + 1));
      }
    }
  }
  return raw;
}

ProcessedSeries process_raw(const RawSeries& raw, const std::vector<std::string>& universe) {
  if (raw.rows() < 2) throw ValidationError("process_raw needs at least 2 rows");
  ProcessedSeries out;
  out.names = raw.names;
  out.kinds = raw.kinds;
  out.dates.assign(raw.dates.begin() + 1, raw.dates.end());

  for (std::size_t c = 0; c < raw.cols(); ++c) {
    const auto& in = raw.columns[c];
    std::vector<double> col(raw.rows() - 1);
    if (raw.kinds[c] == FeatureKind::market) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (std::isnan(in[i])) {
          throw ValidationError("market column '" + raw.names[c] + "' has a missing price at row " +
                                std::to_string(i));
        }
        if (!(in[i] > 0.0)) {
          throw DomainError("market column '" + raw.names[c] + "' has non-positive price at row " +
                            std::to_string(i));
        }
      }
      for (std::size_t i = 1; i < in.size(); ++i) col[i - 1] = std::log(in[i] / in[i - 1]);
    } else {
      auto first_valid = std::find_if(in.begin(), in.end(), [](double v) { return !std::isnan(v); });
      if (first_valid == in.end()) {
        throw ValidationError("column '" + raw.names[c] + "' has no valid values");
      }
      // Missing cells carry the most recent valid value forward; leading
      // gaps take the first valid value, so their difference is zero.
      double prev = std::isnan(in[0]) ? *first_valid : in[0];
      for (std::size_t i = 1; i < in.size(); ++i) {
        const double current = std::isnan(in[i]) ? prev : in[i];
        col[i - 1] = current - prev;
        prev = current;
      }
    }
    out.columns.push_back(std::move(col));
  }
  out.universe = resolve_universe(out, universe);
  out.validate();
  return out;
}

DataSplit split(std::size_t length, std::array<double, 3> ratios, std::size_t min_range_length) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  // Floor, with a guard against products like 100 * 0.2 landing a hair low.
  auto floor_rows = [length](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(length) * r + 1e-9));
  };
  const std::size_t n_val = floor_rows(ratios[1]);
  const std::size_t n_test = floor_rows(ratios[2]);
  if (n_val + n_test > length) throw ConfigError("series too short to split");
  const std::size_t n_train = length - n_val - n_test;

  DataSplit out;
  out.train = {0, n_train};
  out.validation = {n_train, n_train + n_val};
  out.test = {n_train + n_val, length};
  for (const auto* r : {&out.train, &out.validation, &out.test}) {
    if (r->size() < min_range_length || r->size() == 0) {
      throw ConfigError("split range of " + std::to_string(r->size()) +
                        " rows is shorter than the required " +
                        std::to_string(std::max<std::size_t>(min_range_length, 1)));
    }
  }
  return out;
}

DataSplit split(const ProcessedSeries& series, std::array<double, 3> ratios,
                std::size_t min_range_length) {
  return split(series.rows(), ratios, min_range_length);
}

std::pair<ProcessedSeries, GroundTruth> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_assets;
  const std::size_t len = spec.length;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  GroundTruth truth;
  truth.signal.assign(n, std::vector<double>(len));
  truth.noise.assign(n, std::vector<double>(len));
  truth.predictor.assign(n, std::vector<double>(len));

  const double phi = spec.ar_coef;
  const double innovation = std::sqrt(1.0 - phi * phi);
  std::vector<double> x(n);
  for (auto& v : x) v = gauss(rng);  // stationary start
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      truth.signal[i][t] = spec.signal_scale * x[i];
      truth.noise[i][t] = spec.noise_scale == 0.0 ? 0.0 : spec.noise_scale * gauss(rng);
      x[i] = phi * x[i] + innovation * gauss(rng);
      truth.predictor[i][t] = x[i];
    }
  }

  ProcessedSeries s;
  const auto start = std::chrono::sys_days{std::chrono::year{2000} / 1 / 1};
  for (std::size_t t = 0; t < len; ++t) {
    s.dates.emplace_back(start + std::chrono::days{static_cast<int>(t)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> col(len);
    for (std::size_t t = 0; t < len; ++t) col[t] = truth.signal[i][t] + truth.noise[i][t];
    s.names.push_back("asset_" + std::to_string(i));
    s.kinds.push_back(FeatureKind::market);
    s.columns.push_back(std::move(col));
    s.universe.push_back(i);
  }
  if (spec.publish_predictors) {
    for (std::size_t i = 0; i < n; ++i) {
      s.names.push_back("predictor_" + std::to_string(i));
      s.kinds.push_back(FeatureKind::non_market);
      s.columns.push_back(truth.predictor[i]);
    }
  }
  return {std::move(s), std::move(truth)};
}

ProcessedSeries concat(const ProcessedSeries& a, const ProcessedSeries& b) {
  if (a.names != b.names || a.kinds != b.kinds || a.universe != b.universe) {
    throw ValidationError("concat: column schema mismatch");
  }
  if (b.rows() == 0) return a;
  if (a.rows() == 0) return b;
  if (!(a.dates.back() < b.dates.front())) {
    throw ValidationError("concat: first series must end before the second begins");
  }
  ProcessedSeries out = a;
  out.dates.insert(out.dates.end(), b.dates.begin(), b.dates.end());
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    out.columns[c].insert(out.columns[c].end(), b.columns[c].begin(), b.columns[c].end());
  }
  return out;
}

void save_series_csv(const ProcessedSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date";
  for (const auto& name : series.names) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < series.rows(); ++r) {
    out << format_date(series.dates[r]);
    for (const auto& col : series.columns) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, col[r]);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

ProcessedSeries load_processed_csv(const std::filesystem::path& path,
                                   const std::map<std::string, FeatureKind>& kinds,
                                   const std::vector<std::string>& universe) {
  Table table = read_table(path);
  sort_rows(table.dates, table.columns);
  ProcessedSeries s;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    auto it = kinds.find(table.header[c]);
    if (it == kinds.end()) {
      throw ConfigError("no feature kind given for column '" + table.header[c] + "'");
    }
    s.names.push_back(table.header[c]);
    s.kinds.push_back(it->second);
  }
  s.dates = std::move(table.dates);
  s.columns = std::move(table.columns);
  s.universe = resolve_universe(s, universe);
  s.validate();
  return s;
}

}  // namespace tsctl
