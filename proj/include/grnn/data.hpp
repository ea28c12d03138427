// SPDX-License-Identifier: Apache-2.0
//
// Dataset preparation: delimited-text ingestion with date alignment,
// technical indicators, min-max scaling, chronological split and sliding
// windows.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grnn/numerics.hpp"

namespace grnn {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

inline Date parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return DataError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  if (std::from_chars(s.data(), s.data() + 4, y).ec != std::errc{} ||
      std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc{} ||
      std::from_chars(s.data() + 8, s.data() + 10, d).ec != std::errc{})
    throw bad();
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw bad();
  return date;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

/// Shortest round-trip text for a double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Delimited text

/// Splits one comma-separated record, honoring double-quoted fields with
/// doubled-quote escapes.
inline std::vector<std::string> split_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string quote_csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::size_t column_index(const std::string& name, const std::string& context) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(context + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_record(line);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (t.header.empty()) {
      // Strip a UTF-8 byte order mark from the first header cell.
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      t.header = std::move(fields);
      continue;
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw DataError("'" + path + "' is empty");
  return t;
}

/// Parses a price cell. Thousands separators are accepted. Returns false for
/// cells that mark a missing observation ("", "null", "NaN", "-").
inline bool parse_price(std::string cell, double& out) {
  cell.erase(std::remove(cell.begin(), cell.end(), ','), cell.end());
  cell.erase(0, cell.find_first_not_of(' '));
  cell.erase(cell.find_last_not_of(' ') + 1);
  if (cell.empty() || cell == "null" || cell == "NaN" || cell == "nan" || cell == "-") return false;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e || !std::isfinite(out))
    throw DataError("cannot parse number '" + cell + "'");
  return true;
}

// ---------------------------------------------------------------------------
// Frames

struct TimeSeriesFrame {
  std::vector<Date> dates;
  std::vector<std::string> names;
  std::vector<Vector> columns;

  std::size_t rows() const noexcept { return dates.size(); }

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("no column named '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }
  const Vector& column(const std::string& name) const { return columns[index_of(name)]; }

  void add_column(std::string name, Vector values) {
    if (values.size() != rows())
      throw DataError("column '" + name + "' has " + std::to_string(values.size()) +
                      " values for " + std::to_string(rows()) + " dates");
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  /// Rows [first, rows()).
  TimeSeriesFrame drop_leading(std::size_t first) const {
    TimeSeriesFrame f;
    f.names = names;
    f.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first), dates.end());
    for (const auto& c : columns)
      f.columns.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(first), c.end());
    return f;
  }

  void validate() const {
    for (std::size_t i = 1; i < dates.size(); ++i)
      if (!(dates[i - 1] < dates[i])) throw DataError("frame dates are not strictly increasing");
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (columns[k].size() != dates.size())
        throw DataError("column '" + names[k] + "' length mismatch");
      if (!all_finite(columns[k])) throw DataError("column '" + names[k] + "' has missing values");
    }
  }
};

/// One input series: a file, its date column and the value column to use.
struct SourceSpec {
  std::string name;
  std::string path;
  std::string value_column = "Close";
  std::string date_column = "Date";
};

/// Reads one source into (date -> value). Missing cells drop the row.
inline std::map<Date, double> read_source(const SourceSpec& src) {
  const CsvTable t = read_csv(src.path);
  const auto di = t.column_index(src.date_column, src.path);
  const auto vi = t.column_index(src.value_column, src.path);
  std::map<Date, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = src.path + ":" + std::to_string(t.line_numbers[r]);
    const auto& row = t.rows[r];
    if (row.size() != t.header.size())
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(row.size()));
    try {
      const Date d = parse_date(row[di]);
      double v = 0.0;
      if (!parse_price(row[vi], v)) continue;
      if (!out.emplace(d, v).second) throw DataError("duplicate date " + row[di]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

/// Inner join of all sources on date, ascending.
inline TimeSeriesFrame ingest(const std::vector<SourceSpec>& sources) {
  if (sources.empty()) throw DataError("no data sources given");
  std::vector<std::map<Date, double>> series;
  for (const auto& s : sources) series.push_back(read_source(s));

  TimeSeriesFrame f;
  for (const auto& [date, _] : series.front()) {
    const bool everywhere = std::all_of(series.begin() + 1, series.end(),
                                        [&](const auto& s) { return s.contains(date); });
    if (everywhere) f.dates.push_back(date);
  }
  if (f.dates.empty()) throw DataError("sources share no common dates");
  for (std::size_t k = 0; k < sources.size(); ++k) {
    Vector col;
    col.reserve(f.dates.size());
    for (const auto& d : f.dates) col.push_back(series[k].at(d));
    f.add_column(sources[k].name, std::move(col));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Indicators

/// Exponential moving average with k = 2/(period+1), seeded by the simple
/// mean of the first `period` points. The result is aligned to index
/// period-1 of the input (earlier indices are undefined and omitted).
inline Vector ema(std::span<const double> series, std::size_t period) {
  if (period == 0) throw DataError("ema period must be >= 1");
  if (series.size() < period)
    throw DataError("ema(" + std::to_string(period) + ") needs at least " +
                    std::to_string(period) + " points, got " + std::to_string(series.size()));
  const double k = 2.0 / (static_cast<double>(period) + 1.0);
  Vector out;
  out.reserve(series.size() - period + 1);
  double seed = 0.0;
  for (std::size_t i = 0; i < period; ++i) seed += series[i];
  double prev = seed / static_cast<double>(period);
  out.push_back(prev);
  for (std::size_t i = period; i < series.size(); ++i) {
    prev = k * series[i] + (1.0 - k) * prev;
    out.push_back(prev);
  }
  return out;
}

inline constexpr std::size_t kMacdFast = 12;
inline constexpr std::size_t kMacdSlow = 26;
inline constexpr std::size_t kRsiPeriod = 14;

/// EMA(12) - EMA(26), aligned to input index 25 onward.
inline Vector macd(std::span<const double> close) {
  if (close.size() < kMacdSlow)
    throw DataError("macd needs at least 26 points, got " + std::to_string(close.size()));
  const Vector fast = ema(close, kMacdFast);
  const Vector slow = ema(close, kMacdSlow);
  const std::size_t offset = kMacdSlow - kMacdFast;
  Vector out(slow.size());
  for (std::size_t i = 0; i < slow.size(); ++i) out[i] = fast[i + offset] - slow[i];
  return out;
}

/// Wilder's RSI, aligned to input index `period` onward.
inline Vector rsi(std::span<const double> close, std::size_t period = kRsiPeriod) {
  if (period == 0) throw DataError("rsi period must be >= 1");
  if (close.size() < period + 1)
    throw DataError("rsi(" + std::to_string(period) + ") needs at least " +
                    std::to_string(period + 1) + " points, got " + std::to_string(close.size()));
  const double p = static_cast<double>(period);
  auto value = [](double gain, double loss) {
    if (loss == 0.0) return 100.0;
    return 100.0 - 100.0 / (1.0 + gain / loss);
  };
  double gain = 0.0, loss = 0.0;
  for (std::size_t i = 1; i <= period; ++i) {
    const double d = close[i] - close[i - 1];
    if (d > 0) gain += d;
    else loss -= d;
  }
  gain /= p;
  loss /= p;
  Vector out;
  out.reserve(close.size() - period);
  out.push_back(value(gain, loss));
  for (std::size_t i = period + 1; i < close.size(); ++i) {
    const double d = close[i] - close[i - 1];
    gain = (gain * (p - 1.0) + std::max(d, 0.0)) / p;
    loss = (loss * (p - 1.0) + std::max(-d, 0.0)) / p;
    out.push_back(value(gain, loss));
  }
  return out;
}

/// Appends MACD and RSI of `target` and drops the leading rows where MACD is
/// undefined (RSI is defined earlier, so its warm-up is covered).
inline TimeSeriesFrame add_indicators(const TimeSeriesFrame& frame, const std::string& target) {
  const Vector& close = frame.column(target);
  const Vector m = macd(close);
  const Vector r = rsi(close);
  const std::size_t trim = kMacdSlow - 1;
  TimeSeriesFrame out = frame.drop_leading(trim);
  out.add_column("MACD", m);
  out.add_column("RSI", Vector(r.begin() + static_cast<std::ptrdiff_t>(trim - kRsiPeriod), r.end()));
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

struct ColumnRange {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

struct NormalizationParams {
  std::vector<ColumnRange> columns;

  const ColumnRange& get(const std::string& name) const {
    for (const auto& c : columns)
      if (c.name == name) return c;
    throw DataError("no normalization parameters for column '" + name + "'");
  }
};

enum class FitOn { TrainOnly, Full };

inline FitOn fit_on_from_string(const std::string& s) {
  if (s == "train_only") return FitOn::TrainOnly;
  if (s == "full") return FitOn::Full;
  throw std::invalid_argument("fit_on must be train_only or full, got '" + s + "'");
}

/// Number of rows in the training side of a chronological split.
inline std::size_t split_point(std::size_t rows, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DataError("split fraction must be in (0, 1)");
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows)));
}

inline NormalizationParams fit_normalization(const TimeSeriesFrame& frame, FitOn fit_on,
                                             double train_fraction = 0.8) {
  const std::size_t n =
      fit_on == FitOn::Full ? frame.rows() : split_point(frame.rows(), train_fraction);
  if (n == 0) throw DataError("no rows to fit normalization on");
  NormalizationParams p;
  for (std::size_t k = 0; k < frame.columns.size(); ++k) {
    const auto& col = frame.columns[k];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n));
    if (!(*hi > *lo)) throw DataError("column '" + frame.names[k] + "' is constant; cannot scale");
    p.columns.push_back({frame.names[k], *lo, *hi});
  }
  return p;
}

inline TimeSeriesFrame apply_normalization(const TimeSeriesFrame& frame,
                                           const NormalizationParams& params) {
  TimeSeriesFrame out = frame;
  for (std::size_t k = 0; k < out.columns.size(); ++k) {
    const auto& r = params.get(out.names[k]);
    if (!(r.max > r.min)) throw DataError("degenerate range for column '" + r.name + "'");
    const double span = r.max - r.min;
    for (auto& v : out.columns[k]) v = (v - r.min) / span;
  }
  return out;
}

inline std::pair<TimeSeriesFrame, NormalizationParams> normalize(const TimeSeriesFrame& frame,
                                                                 FitOn fit_on = FitOn::TrainOnly,
                                                                 double train_fraction = 0.8) {
  auto params = fit_normalization(frame, fit_on, train_fraction);
  return {apply_normalization(frame, params), std::move(params)};
}

inline Vector inverse_transform(std::span<const double> values, const NormalizationParams& norm,
                                const std::string& column) {
  const auto& r = norm.get(column);
  Vector out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * (r.max - r.min) + r.min;
  return out;
}

// ---------------------------------------------------------------------------
// Windowing

struct WindowedDataset {
  std::vector<Matrix> train_x;
  Vector train_y;
  std::vector<Date> train_dates;  // date of each target
  std::vector<Matrix> test_x;
  Vector test_y;
  std::vector<Date> test_dates;
  NormalizationParams norm;
  std::vector<std::string> feature_order;
  std::string target_name = "NIFTY";
  std::size_t lookback = 0;

  std::size_t input_dim() const noexcept { return feature_order.size(); }
};

namespace detail {
inline void append_windows(const TimeSeriesFrame& f, std::size_t begin, std::size_t end,
                           std::size_t lookback, std::size_t target, std::vector<Matrix>& xs,
                           Vector& ys, std::vector<Date>& dates) {
  const std::size_t cols = f.columns.size();
  for (std::size_t i = begin; i + lookback < end; ++i) {
    Matrix w(lookback, cols);
    for (std::size_t t = 0; t < lookback; ++t)
      for (std::size_t c = 0; c < cols; ++c) w(t, c) = f.columns[c][i + t];
    xs.push_back(std::move(w));
    ys.push_back(f.columns[target][i + lookback]);
    dates.push_back(f.dates[i + lookback]);
  }
}
}  // namespace detail

/// Splits `frame` (already normalized) chronologically and frames each side
/// into (lookback rows -> next-row target) samples. No window crosses the
/// split.
inline WindowedDataset window(const TimeSeriesFrame& frame, const NormalizationParams& norm,
                              std::size_t lookback, const std::string& target,
                              double train_fraction = 0.8) {
  if (lookback == 0) throw DataError("lookback must be >= 1");
  const std::size_t n = frame.rows();
  const std::size_t n_train = split_point(n, train_fraction);
  if (n_train < lookback + 1 || n - n_train < lookback + 1)
    throw DataError("split of " + std::to_string(n) + " rows leaves a side shorter than lookback+1 (" +
                    std::to_string(lookback + 1) + ")");
  const std::size_t ti = frame.index_of(target);
  WindowedDataset ds;
  ds.norm = norm;
  ds.feature_order = frame.names;
  ds.target_name = target;
  ds.lookback = lookback;
  detail::append_windows(frame, 0, n_train, lookback, ti, ds.train_x, ds.train_y, ds.train_dates);
  detail::append_windows(frame, n_train, n, lookback, ti, ds.test_x, ds.test_y, ds.test_dates);
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_frame_csv(const TimeSeriesFrame& f, std::ostream& os) {
  os << "Date";
  for (const auto& n : f.names) os << ',' << quote_csv_field(n);
  os << '\n';
  for (std::size_t r = 0; r < f.rows(); ++r) {
    os << format_date(f.dates[r]);
    for (const auto& c : f.columns) os << ',' << format_double(c[r]);
    os << '\n';
  }
}

inline TimeSeriesFrame read_frame_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "Date")
    throw DataError(path + ": first column must be Date");
  TimeSeriesFrame f;
  f.names.assign(t.header.begin() + 1, t.header.end());
  f.columns.assign(f.names.size(), {});
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = path + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) throw DataError(where + ": wrong field count");
    try {
      f.dates.push_back(parse_date(row[0]));
      for (std::size_t c = 0; c < f.names.size(); ++c) {
        double v = 0.0;
        if (!parse_price(row[c + 1], v)) throw DataError("missing value");
        f.columns[c].push_back(v);
      }
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  f.validate();
  return f;
}

inline void write_normalization(const NormalizationParams& p, std::ostream& os) {
  os << "column,min,max\n";
  for (const auto& c : p.columns)
    os << quote_csv_field(c.name) << ',' << format_double(c.min) << ',' << format_double(c.max)
       << '\n';
}

inline NormalizationParams read_normalization(const std::string& path) {
  const CsvTable t = read_csv(path);
  const auto ci = t.column_index("column", path);
  const auto lo = t.column_index("min", path);
  const auto hi = t.column_index("max", path);
  NormalizationParams p;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ColumnRange c{row.at(ci), 0.0, 0.0};
    if (!parse_price(row.at(lo), c.min) || !parse_price(row.at(hi), c.max))
      throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": missing bound");
    p.columns.push_back(std::move(c));
  }
  return p;
}

struct ColumnSummary {
  std::string name;
  double mean = 0, std = 0, min = 0, max = 0;
};

/// Mean, sample standard deviation, min and max per column.
inline std::vector<ColumnSummary> summarize(const TimeSeriesFrame& f) {
  std::vector<ColumnSummary> out;
  for (std::size_t k = 0; k < f.columns.size(); ++k) {
    const auto& c = f.columns[k];
    ColumnSummary s{f.names[k]};
    if (c.empty()) {
      out.push_back(s);
      continue;
    }
    s.mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    double ss = 0.0;
    for (double v : c) ss += (v - s.mean) * (v - s.mean);
    s.std = c.size() > 1 ? std::sqrt(ss / static_cast<double>(c.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    s.min = *lo;
    s.max = *hi;
    out.push_back(s);
  }
  return out;
}

}  // namespace grnn
