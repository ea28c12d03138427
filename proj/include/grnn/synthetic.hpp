// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic inputs: a noiseless sine for smoke runs and a
// six-source market bundle with the same file layout as the real one.

#pragma once

#include <chrono>
#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "grnn/data.hpp"

namespace grnn::synthetic {

/// Weekdays from `first` through `last` inclusive.
inline std::vector<Date> business_days(Date first, Date last) {
  std::vector<Date> out;
  for (std::chrono::sys_days d{first}; d <= std::chrono::sys_days{last}; d += std::chrono::days{1}) {
    const std::chrono::weekday wd{d};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(d);
  }
  return out;
}

/// sin(2*pi*i/period) on consecutive business days.
inline TimeSeriesFrame sine_frame(std::size_t points = 200, double period = 25.0,
                                  const std::string& name = "sine") {
  TimeSeriesFrame f;
  const auto days = business_days(Date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}},
                                  Date{std::chrono::year{2030}, std::chrono::January, std::chrono::day{1}});
  f.dates.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(points));
  Vector v(points);
  for (std::size_t i = 0; i < points; ++i)
    v[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period);
  f.add_column(name, std::move(v));
  return f;
}

/// Windowed sine with min-max scaling fit on the training rows.
inline WindowedDataset sine_dataset(std::size_t points = 200, std::size_t lookback = 8,
                                    double train_fraction = 0.8) {
  const auto frame = sine_frame(points);
  auto [norm_frame, norm] = normalize(frame, FitOn::TrainOnly, train_fraction);
  return window(norm_frame, norm, lookback, "sine", train_fraction);
}

struct MarketOptions {
  Date first{std::chrono::year{2009}, std::chrono::January, std::chrono::day{2}};
  Date last{std::chrono::year{2023}, std::chrono::December, std::chrono::day{29}};
  double missing_rate = 0.02;
  std::uint64_t seed = 20240101;
};

struct Series {
  std::string name;
  std::vector<Date> dates;
  Vector values;
};

/// Source name and the [min, max] its synthetic path is pinned to. The
/// ranges follow published statistics of the real series over 2009-2023,
/// except gold, whose published minimum is not credible for spot prices.
struct SourceRange {
  const char* name;
  double min;
  double max;
};

inline constexpr SourceRange kMarketSources[] = {
    {"NIFTY", 2573.15, 21778.3}, {"SP500", 676.53, 4798.30}, {"CrudeOil", 37.63, 123.70},
    {"IndiaVIX", 10.14, 83.61},  {"INRUSD", 43.90, 85.19},   {"Gold", 1049.40, 2081.90},
};

namespace detail {

inline double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

/// Rescales a log path so that exp() spans exactly [lo, hi].
inline Vector pin_log_range(const Vector& log_path, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(log_path.begin(), log_path.end());
  const double a = (std::log(hi) - std::log(lo)) / (*mx - *mn);
  Vector out(log_path.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = round_cents(std::exp(std::log(lo) + a * (log_path[i] - *mn)));
  // Guard the endpoints against rounding drift in exp/log.
  out[static_cast<std::size_t>(mn - log_path.begin())] = lo;
  out[static_cast<std::size_t>(mx - log_path.begin())] = hi;
  return out;
}

}  // namespace detail

/// Six correlated daily log-price paths, each pinned to its source range.
/// Both equity indices load on one global stochastic trend plus their own
/// mean-reverting deviation, so they are cointegrated as long-run equity
/// levels tend to be. The exchange rate drifts, gold follows its own walk,
/// and crude oil and the volatility index mean-revert. Each source
/// independently drops about `missing_rate` of the days to mimic differing
/// holiday calendars.
inline std::vector<Series> market_series(const MarketOptions& opt = {}) {
  const auto days = business_days(opt.first, opt.last);
  const std::size_t n = days.size();
  const Rng root(opt.seed);
  Rng shocks = root.split(0);

  std::vector<Vector> logs(6, Vector(n));
  double trend = 0, nifty_dev = 0, spx_dev = 0, oil = 0, vix = 0, fx = 0, gold = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double market = shocks.normal();
    // Volatility regime follows the volatility index.
    const double regime = 0.6 + 0.8 * std::exp(vix) / (1.0 + std::exp(vix));
    trend += 0.0005 + 0.008 * regime * market;
    nifty_dev += -0.01 * nifty_dev + 0.007 * shocks.normal();
    spx_dev += -0.01 * spx_dev + 0.005 * shocks.normal();
    oil += -0.004 * oil + 0.02 * (0.3 * market + 0.95 * shocks.normal());
    vix += -0.02 * vix - 0.05 * market + 0.04 * shocks.normal();
    fx += 0.00016 + 0.004 * (-0.3 * market + 0.95 * shocks.normal());
    gold += 0.0002 + 0.009 * shocks.normal();
    const double row[] = {trend + nifty_dev, 0.8 * trend + spx_dev, oil, vix, fx, gold};
    for (std::size_t k = 0; k < 6; ++k) logs[k][t] = row[k];
  }

  std::vector<Series> out;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const Vector values = detail::pin_log_range(logs[k], kMarketSources[k].min, kMarketSources[k].max);
    Rng gaps = root.split(100 + k);
    Series s{kMarketSources[k].name, {}, {}};
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    for (std::size_t t = 0; t < n; ++t) {
      // Endpoints and extremes are always present so span and range hold.
      const bool pinned = t == 0 || t + 1 == n || values.begin() + static_cast<std::ptrdiff_t>(t) == lo ||
                          values.begin() + static_cast<std::ptrdiff_t>(t) == hi;
      const bool keep = gaps.uniform() >= opt.missing_rate || pinned;
      if (!keep) continue;
      s.dates.push_back(days[t]);
      s.values.push_back(values[t]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Writes one `Date,Close` file per source into `dir` and returns the
/// manifest entries pointing at them.
inline std::vector<SourceSpec> write_market_bundle(const std::filesystem::path& dir,
                                                   const MarketOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  std::vector<SourceSpec> specs;
  for (const auto& s : market_series(opt)) {
    const auto path = dir / (s.name + ".csv");
    std::ofstream os(path);
    if (!os) throw DataError("cannot write '" + path.string() + "'");
    os << "Date,Close\n";
    for (std::size_t i = 0; i < s.dates.size(); ++i)
      os << format_date(s.dates[i]) << ',' << format_double(s.values[i]) << '\n';
    specs.push_back({s.name, path.string()});
  }
  return specs;
}

}  // namespace grnn::synthetic
