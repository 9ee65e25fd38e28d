#include "doctest.h"

#include <cmath>
#include <random>

#include "../common/test_util.hpp"
#include "tsctl/data.hpp"
#include "tsctl/errors.hpp"

using namespace tsctl;
using tsctl::testing::scratch_dir;
using tsctl::testing::write_file;

namespace {

const std::map<std::string, FeatureKind> kTwoCols{{"spy", FeatureKind::market},
                                                 {"rate", FeatureKind::non_market}};

}  // namespace

TEST_CASE("dates round-trip and reject garbage") {
  CHECK(format_date(parse_date("2021-03-04")) == "2021-03-04");
  CHECK_THROWS_AS(parse_date("2021/03/04"), ParseError);
  CHECK_THROWS_AS(parse_date("2021-02-30"), ParseError);
}

TEST_CASE("load_csv parses, sorts and names bad cells") {
  const auto dir = scratch_dir("load_csv");
  auto ok = write_file(dir / "ok.csv", "date,spy,rate\n2020-01-01,100,1.5\n2020-01-02,101,1.6\n2020-01-03,102,1.7\n");
  RawSeries raw = load_csv(ok, kTwoCols);
  CHECK(raw.rows() == 3);
  CHECK(raw.cols() == 2);
  CHECK(raw.columns[0][2] == 102.0);

  auto unsorted = write_file(dir / "unsorted.csv", "date,spy,rate\n2020-01-03,102,1.7\n2020-01-01,100,1.5\n2020-01-02,101,1.6\n");
  raw = load_csv(unsorted, kTwoCols);
  CHECK(format_date(raw.dates[0]) == "2020-01-01");
  CHECK(raw.columns[0][0] == 100.0);
  CHECK(raw.columns[0][2] == 102.0);

  auto bad = write_file(dir / "bad.csv", "date,spy,rate\n2020-01-01,100,1.5\n2020-01-02,abc,1.6\n");
  try {
    load_csv(bad, kTwoCols);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row") != std::string::npos);
    CHECK(msg.find("spy") != std::string::npos);
  }

  auto dup = write_file(dir / "dup.csv", "date,spy,rate\n2020-01-01,100,1.5\n2020-01-01,101,1.6\n");
  CHECK_THROWS_AS(load_csv(dup, kTwoCols), ValidationError);
  CHECK_THROWS_AS(load_csv(dir / "missing.csv", kTwoCols), IoError);
  CHECK_THROWS_AS(load_csv(ok, {{"spy", FeatureKind::market}}), ConfigError);
}

TEST_CASE("process_raw: log-returns and last-valid differences") {
  RawSeries raw;
  raw.dates = {parse_date("2020-01-01"), parse_date("2020-01-02"), parse_date("2020-01-03")};
  raw.names = {"spy", "rate"};
  raw.kinds = {FeatureKind::market, FeatureKind::non_market};
  raw.columns = {{100.0, 100.0, 110.0}, {2.0, NAN, 2.5}};
  const ProcessedSeries s = process_raw(raw);
  REQUIRE(s.rows() == 2);
  CHECK(s.columns[0][0] == 0.0);
  CHECK(s.columns[0][1] == doctest::Approx(std::log(1.1)).epsilon(1e-14));
  CHECK(std::log(1.1) == doctest::Approx(0.09531).epsilon(1e-4));
  CHECK(s.columns[1][0] == 0.0);  // forward-filled 2.0 - 2.0
  CHECK(s.columns[1][1] == doctest::Approx(0.5));
  CHECK(s.n_assets() == 1);
  CHECK(s.universe[0] == 0);

  raw.columns[0][1] = NAN;
  CHECK_THROWS_AS(process_raw(raw), ValidationError);
  raw.columns[0][1] = -1.0;
  CHECK_THROWS_AS(process_raw(raw), DomainError);
}

TEST_CASE("price reconstruction from processed log-returns") {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> step(0.0, 0.02);
  RawSeries raw;
  raw.names = {"a"};
  raw.kinds = {FeatureKind::market};
  raw.columns.resize(1);
  double price = 57.3;
  for (int t = 0; t < 500; ++t) {
    raw.dates.push_back(parse_date("2001-01-01"));
    raw.dates.back() = std::chrono::sys_days{raw.dates.back()} + std::chrono::days{t};
    raw.columns[0].push_back(price);
    price *= step(rng);
  }
  const ProcessedSeries s = process_raw(raw);
  double rebuilt = raw.columns[0][0];
  double worst = 0.0;
  for (std::size_t t = 0; t < s.rows(); ++t) {
    rebuilt *= std::exp(s.columns[0][t]);
    worst = std::max(worst, std::abs(rebuilt / raw.columns[0][t + 1] - 1.0));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("split arithmetic") {
  DataSplit d = split(100, {0.6, 0.2, 0.2});
  CHECK(d.train == IndexRange{0, 60});
  CHECK(d.validation == IndexRange{60, 80});
  CHECK(d.test == IndexRange{80, 100});

  d = split(101, {0.6, 0.2, 0.2});
  CHECK(d.train.size() == 61);
  CHECK(d.validation.size() == 20);
  CHECK(d.test.size() == 20);

  CHECK_THROWS_AS(split(100, {0.5, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(split(30, {0.6, 0.2, 0.2}, 10), ConfigError);
}

TEST_CASE("split partitions every length exactly") {
  CHECK_THROWS_AS(split(4, {0.6, 0.2, 0.2}), ConfigError);
  for (std::size_t n = 5; n <= 10000; ++n) {
    const DataSplit d = split(n, {0.6, 0.2, 0.2});
    REQUIRE(d.train.begin == 0);
    REQUIRE(d.train.end == d.validation.begin);
    REQUIRE(d.validation.end == d.test.begin);
    REQUIRE(d.test.end == n);
    REQUIRE(d.validation.size() == static_cast<std::size_t>(std::floor(n * 0.2 + 1e-9)));
  }
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.n_assets = 3;
  spec.length = 500;
  spec.seed = 11;
  auto [s, truth] = generate_synthetic(spec);
  for (const auto& col : truth.noise) {
    for (double v : col) CHECK(v == 0.0);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t t = 0; t < s.rows(); ++t) REQUIRE(s.asset_return(t, i) == truth.signal[i][t]);
  }
  auto again = generate_synthetic(spec);
  CHECK(again.first.columns == s.columns);

  // Noise-to-signal ratio and symmetry.
  spec.n_assets = 1;
  spec.length = 10000;
  spec.noise_scale = 5.0 * spec.signal_scale;
  auto [noisy, nt] = generate_synthetic(spec);
  double ss = 0.0, sn = 0.0, mn = 0.0;
  for (std::size_t t = 0; t < spec.length; ++t) {
    ss += nt.signal[0][t] * nt.signal[0][t];
    sn += nt.noise[0][t] * nt.noise[0][t];
    mn += nt.noise[0][t];
  }
  const double ratio = std::sqrt(sn / ss);
  CHECK(ratio == doctest::Approx(5.0).epsilon(0.10));
  mn /= static_cast<double>(spec.length);
  CHECK(std::abs(mn) <= 3.0 * spec.noise_scale / std::sqrt(static_cast<double>(spec.length)));
}

TEST_CASE("synthetic predictor at t-1 drives the return at t") {
  SyntheticSpec spec;
  spec.n_assets = 2;
  spec.length = 50;
  auto [s, truth] = generate_synthetic(spec);
  const auto p0 = s.column_index("predictor_0");
  for (std::size_t t = 1; t < s.rows(); ++t) {
    CHECK(s.asset_return(t, 0) == doctest::Approx(spec.signal_scale * s.columns[p0][t - 1]));
  }
}

TEST_CASE("concat and slice") {
  SyntheticSpec spec;
  spec.length = 80;
  auto s = generate_synthetic(spec).first;
  auto a = s.slice({0, 60});
  auto b = s.slice({60, 80});
  auto c = concat(a, b);
  CHECK(c.rows() == 80);
  CHECK(c.columns == s.columns);
  CHECK(concat(a, s.slice({0, 0})).columns == a.columns);

  auto bad = b;
  bad.names[0] = "other";
  CHECK_THROWS_AS(concat(a, bad), ValidationError);
}

TEST_CASE("processed CSV round-trip") {
  const auto dir = scratch_dir("processed_csv");
  SyntheticSpec spec;
  spec.n_assets = 2;
  spec.length = 30;
  auto s = generate_synthetic(spec).first;
  save_series_csv(s, dir / "s.csv");
  std::map<std::string, FeatureKind> kinds;
  for (std::size_t c = 0; c < s.cols(); ++c) kinds[s.names[c]] = s.kinds[c];
  auto back = load_processed_csv(dir / "s.csv", kinds);
  CHECK(back.names == s.names);
  CHECK(back.universe == s.universe);
  for (std::size_t c = 0; c < s.cols(); ++c) {
    for (std::size_t t = 0; t < s.rows(); ++t) REQUIRE(back.columns[c][t] == s.columns[c][t]);
  }
}
