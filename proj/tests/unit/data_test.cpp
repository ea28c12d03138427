// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "grnn/data.hpp"
#include "grnn/synthetic.hpp"

namespace grnn {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("grnn_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& body) const {
    const auto p = path_ / name;
    std::ofstream(p) << body;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Straight transcriptions of the indicator definitions, kept deliberately
// naive so they share no code with the library.
Vector brute_ema(const Vector& x, std::size_t period) {
  const double k = 2.0 / (static_cast<double>(period) + 1.0);
  double seed = 0.0;
  for (std::size_t i = 0; i < period; ++i) seed += x[i];
  seed /= static_cast<double>(period);
  Vector out{seed};
  for (std::size_t i = period; i < x.size(); ++i) out.push_back(k * x[i] + (1.0 - k) * out.back());
  return out;
}

Vector brute_rsi(const Vector& x, std::size_t period) {
  Vector gains, losses;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    gains.push_back(d > 0 ? d : 0.0);
    losses.push_back(d < 0 ? -d : 0.0);
  }
  double ag = 0, al = 0;
  for (std::size_t i = 0; i < period; ++i) {
    ag += gains[i];
    al += losses[i];
  }
  ag /= static_cast<double>(period);
  al /= static_cast<double>(period);
  const auto value = [](double g, double l) { return l == 0.0 ? 100.0 : 100.0 - 100.0 / (1.0 + g / l); };
  Vector out{value(ag, al)};
  for (std::size_t i = period; i < gains.size(); ++i) {
    ag = (ag * static_cast<double>(period - 1) + gains[i]) / static_cast<double>(period);
    al = (al * static_cast<double>(period - 1) + losses[i]) / static_cast<double>(period);
    out.push_back(value(ag, al));
  }
  return out;
}

void expect_rel_close(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_LE(std::abs(a[i] - b[i]), tol * std::max(1.0, std::abs(b[i]))) << "at " << i;
}

Vector random_walk(Rng& rng, std::size_t n) {
  Vector v{100.0};
  while (v.size() < n) v.push_back(v.back() * std::exp(0.02 * rng.normal()));
  return v;
}

TEST(Ema, ConstantSeriesIsFixedPoint) {
  for (double v : ema(Vector(30, 4.5), 12)) EXPECT_DOUBLE_EQ(v, 4.5);
}

TEST(Ema, PeriodOneIsIdentity) {
  const Vector x{3, 1, 4, 1, 5, 9, 2, 6};
  EXPECT_EQ(ema(x, 1), x);
}

TEST(Ema, MatchesRecurrenceOnRamp) {
  Vector x;
  for (int i = 1; i <= 30; ++i) x.push_back(i);
  const auto e = ema(x, 12);
  EXPECT_EQ(e.size(), 19u);
  expect_rel_close(e, brute_ema(x, 12), 1e-12);
}

TEST(Ema, RejectsShortSeries) { EXPECT_THROW(ema(Vector(5, 1.0), 12), DataError); }

TEST(Macd, ConstantSeriesIsZero) {
  for (double v : macd(Vector(60, 7.0))) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Macd, RisingSeriesIsPositiveAndAligned) {
  Vector x;
  for (int i = 0; i < 80; ++i) x.push_back(10.0 + 0.5 * i);
  const auto m = macd(x);
  EXPECT_EQ(m.size(), x.size() - 25);
  for (double v : m) EXPECT_GT(v, 0.0);
}

TEST(Macd, MatchesBruteForce) {
  Rng rng(1);
  const Vector x = random_walk(rng, 120);
  const auto fast = brute_ema(x, 12), slow = brute_ema(x, 26);
  Vector expected;
  for (std::size_t i = 0; i < slow.size(); ++i) expected.push_back(fast[i + 14] - slow[i]);
  expect_rel_close(macd(x), expected, 1e-9);
  EXPECT_THROW(macd(Vector(25, 1.0)), DataError);
}

TEST(Rsi, MonotoneSeriesSaturates) {
  Vector up, down;
  for (int i = 0; i < 40; ++i) {
    up.push_back(i);
    down.push_back(-i);
  }
  for (double v : rsi(up)) EXPECT_EQ(v, 100.0);
  for (double v : rsi(down)) EXPECT_EQ(v, 0.0);
}

TEST(Rsi, MixedSeriesMatchesWilderRecurrence) {
  const Vector x{44.34, 44.09, 44.15, 43.61, 44.33, 44.83, 45.10, 45.42, 45.84, 46.08,
                 45.89, 46.03, 45.61, 46.28, 46.28, 46.00, 46.03, 46.41, 46.22, 45.64,
                 46.21, 46.25, 45.71, 46.45, 45.78, 45.35, 44.03, 44.18, 44.22, 44.57};
  const auto r = rsi(x);
  EXPECT_EQ(r.size(), x.size() - 14);
  expect_rel_close(r, brute_rsi(x, 14), 1e-12);
  for (double v : r) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  EXPECT_THROW(rsi(Vector(14, 1.0)), DataError);
}

TEST(Indicators, AppendedAndTrimmed) {
  TimeSeriesFrame f = synthetic::sine_frame(100);
  Rng rng(2);
  f.columns[0] = random_walk(rng, 100);
  const auto g = add_indicators(f, "sine");
  EXPECT_EQ(g.rows(), 75u);
  EXPECT_EQ(g.names, (std::vector<std::string>{"sine", "MACD", "RSI"}));
  EXPECT_EQ(g.dates.front(), f.dates[25]);
  EXPECT_EQ(g.column("RSI").back(), rsi(f.columns[0]).back());
  EXPECT_NO_THROW(g.validate());
}

TEST(Normalize, ExtremesMapToUnitInterval) {
  TimeSeriesFrame f = synthetic::sine_frame(3, 25.0, "NIFTY");
  f.columns[0] = {2573.15, 12000.0, 21778.3};
  const auto [n, params] = normalize(f, FitOn::Full);
  EXPECT_EQ(n.columns[0][0], 0.0);
  EXPECT_EQ(n.columns[0][2], 1.0);
  EXPECT_NEAR(inverse_transform(Vector{0.5}, params, "NIFTY")[0], 12175.725, 1e-9);
  EXPECT_EQ(inverse_transform(Vector{0.0, 1.0}, params, "NIFTY"), (Vector{2573.15, 21778.3}));
}

TEST(Normalize, TrainOnlyIgnoresTestRows) {
  TimeSeriesFrame f = synthetic::sine_frame(10, 25.0, "x");
  f.columns[0] = {1, 2, 3, 4, 5, 6, 7, 8, 100, -100};
  const auto [n, p] = normalize(f, FitOn::TrainOnly);
  EXPECT_EQ(p.get("x").min, 1.0);
  EXPECT_EQ(p.get("x").max, 8.0);
  const auto [n2, p2] = normalize(f, FitOn::Full);
  EXPECT_EQ(p2.get("x").min, -100.0);
}

TEST(Normalize, FittingRowsSpanZeroToOne) {
  Rng rng(3);
  TimeSeriesFrame f = synthetic::sine_frame(50, 25.0, "a");
  f.add_column("b", random_walk(rng, 50));
  const auto [n, p] = normalize(f, FitOn::TrainOnly);
  for (const auto& c : n.columns) {
    const auto [lo, hi] = std::minmax_element(c.begin(), c.begin() + 40);
    EXPECT_DOUBLE_EQ(*lo, 0.0);
    EXPECT_DOUBLE_EQ(*hi, 1.0);
  }
}

TEST(Normalize, ConstantColumnNamed) {
  TimeSeriesFrame f = synthetic::sine_frame(10, 25.0, "a");
  f.add_column("flat", Vector(10, 3.0));
  try {
    normalize(f, FitOn::Full);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
  }
}

TEST(Normalize, RoundTripWithinTolerance) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    TimeSeriesFrame f = synthetic::sine_frame(60, 25.0, "p");
    f.columns[0] = random_walk(rng, 60);
    const auto [n, p] = normalize(f, FitOn::Full);
    expect_rel_close(inverse_transform(n.columns[0], p, "p"), f.columns[0], 1e-9);
  }
  EXPECT_THROW(inverse_transform(Vector{0.0}, NormalizationParams{}, "nope"), DataError);
}

TEST(Split, FloorOfTrainFraction) {
  EXPECT_EQ(split_point(3649, 0.8), 2919u);
  EXPECT_EQ(3649 - split_point(3649, 0.8), 730u);
}

TEST(Window, CountsTargetsAndNoLeakage) {
  const auto f = synthetic::sine_frame(100);
  const auto [n, p] = normalize(f, FitOn::TrainOnly);
  const auto ds = window(n, p, 5, "sine");
  EXPECT_EQ(ds.train_x.size(), 80u - 5u);
  EXPECT_EQ(ds.test_x.size(), 20u - 5u);
  EXPECT_EQ(ds.train_x.size() + ds.test_x.size() + 2 * 5, 100u);
  for (std::size_t i = 0; i < ds.train_x.size(); ++i) {
    EXPECT_EQ(ds.train_x[i](0, 0), n.columns[0][i]);
    EXPECT_EQ(ds.train_y[i], n.columns[0][i + 5]);
    EXPECT_EQ(ds.train_dates[i], n.dates[i + 5]);
  }
  // First test window starts at the split row, after the last train target.
  EXPECT_EQ(ds.test_x[0](0, 0), n.columns[0][80]);
  EXPECT_LT(ds.train_dates.back(), n.dates[80]);
  EXPECT_EQ(ds.test_dates.front(), n.dates[85]);
}

TEST(Window, TargetAlwaysFollowsWindow) {
  const auto f = synthetic::sine_frame(60);
  const auto [n, p] = normalize(f, FitOn::Full);
  const auto ds = window(n, p, 7, "sine");
  for (std::size_t i = 0; i + 1 < ds.test_dates.size(); ++i) EXPECT_LT(ds.test_dates[i], ds.test_dates[i + 1]);
  EXPECT_THROW(window(n, p, 12, "sine"), DataError);
  EXPECT_THROW(window(n, p, 0, "sine"), DataError);
}

TEST(Csv, QuotedFieldsAndCommasInNumbers) {
  const auto r = split_csv_record(R"(2020-01-02,"1,234.5","say ""hi""",)");
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[1], "1,234.5");
  EXPECT_EQ(r[2], "say \"hi\"");
  EXPECT_EQ(r[3], "");
  double v = 0;
  EXPECT_TRUE(parse_price(r[1], v));
  EXPECT_EQ(v, 1234.5);
  EXPECT_FALSE(parse_price("null", v));
  EXPECT_FALSE(parse_price("", v));
  EXPECT_THROW(parse_price("abc", v), DataError);
}

TEST(Ingest, IdenticalDatesKeepAllRows) {
  TempDir d;
  const std::string body = "Date,Close\n2020-01-02,1\n2020-01-03,2\n2020-01-06,3\n";
  const auto f = ingest({{"A", d.file("a.csv", body).string()}, {"B", d.file("b.csv", body).string()}});
  EXPECT_EQ(f.rows(), 3u);
  EXPECT_EQ(f.names, (std::vector<std::string>{"A", "B"}));
}

TEST(Ingest, DisjointDatesIsAnError) {
  TempDir d;
  EXPECT_THROW(ingest({{"A", d.file("a.csv", "Date,Close\n2020-01-02,1\n").string()},
                       {"B", d.file("b.csv", "Date,Close\n2020-01-03,1\n").string()}}),
               DataError);
}

TEST(Ingest, PartialOverlapIsIntersection) {
  TempDir d;
  Rng rng(5);
  const auto days = synthetic::business_days(Date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}},
                                             Date{std::chrono::year{2020}, std::chrono::December, std::chrono::day{31}});
  std::vector<std::set<std::size_t>> kept(3);
  std::vector<SourceSpec> specs;
  for (int s = 0; s < 3; ++s) {
    std::ostringstream body;
    body << "Date,Close\n";
    for (std::size_t i = 0; i < days.size(); ++i) {
      if (rng.uniform() < 0.2) continue;
      kept[static_cast<std::size_t>(s)].insert(i);
      body << format_date(days[i]) << ',' << 100 + i << '\n';
    }
    specs.push_back({"S" + std::to_string(s), d.file("s" + std::to_string(s) + ".csv", body.str()).string()});
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < days.size(); ++i)
    expected += kept[0].contains(i) && kept[1].contains(i) && kept[2].contains(i);
  const auto f = ingest(specs);
  EXPECT_EQ(f.rows(), expected);
  EXPECT_NO_THROW(f.validate());
}

TEST(Ingest, BadRowNamesFileAndLine) {
  TempDir d;
  const auto p = d.file("bad.csv", "Date,Close\n2020-01-02,1\n2020-01-03,oops\n");
  try {
    read_source({"X", p.string()});
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.csv:3"), std::string::npos) << msg;
  }
  EXPECT_THROW(read_source({"X", (d.path() / "missing.csv").string()}), DataError);
}

TEST(Ingest, MissingCellsDropRowsAndOrderIsAscending) {
  TempDir d;
  const auto p = d.file("x.csv", "Date,Close\n2020-01-06,3\n2020-01-02,1\n2020-01-03,null\n");
  const auto s = read_source({"X", p.string()});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.begin()->second, 1.0);
}

TEST(FrameCsv, RoundTripIsExact) {
  TempDir d;
  Rng rng(6);
  TimeSeriesFrame f = synthetic::sine_frame(40, 25.0, "a");
  f.add_column("b", random_walk(rng, 40));
  std::ostringstream os;
  write_frame_csv(f, os);
  const auto p = d.file("frame.csv", os.str());
  const auto g = read_frame_csv(p.string());
  EXPECT_EQ(g.dates, f.dates);
  EXPECT_EQ(g.names, f.names);
  EXPECT_EQ(g.columns, f.columns);
}

TEST(NormalizationCsv, RoundTripIsExact) {
  TempDir d;
  NormalizationParams p{{{"NIFTY", 2573.15, 21778.3}, {"RSI", 6.98, 95.02}}};
  std::ostringstream os;
  write_normalization(p, os);
  const auto q = read_normalization(d.file("norm.csv", os.str()).string());
  ASSERT_EQ(q.columns.size(), 2u);
  EXPECT_EQ(q.get("NIFTY").min, 2573.15);
  EXPECT_EQ(q.get("RSI").max, 95.02);
}

TEST(Synthetic, MarketBundleHasPinnedTargetRange) {
  TempDir d;
  const auto specs = synthetic::write_market_bundle(d.path());
  ASSERT_EQ(specs.size(), 6u);
  const auto frame = add_indicators(ingest(specs), "NIFTY");
  EXPECT_EQ(frame.names.size(), 8u);
  const auto s = summarize(frame);
  EXPECT_EQ(s[0].name, "NIFTY");
  EXPECT_EQ(s[0].min, 2573.15);
  EXPECT_EQ(s[0].max, 21778.3);
  EXPECT_EQ(format_date(frame.dates.back()), "2023-12-29");
}

TEST(Summary, MeanStdMinMax) {
  TimeSeriesFrame f = synthetic::sine_frame(4, 25.0, "x");
  f.columns[0] = {1, 2, 3, 4};
  const auto s = summarize(f)[0];
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 4.0);
}

TEST(Dates, ParseAndFormat) {
  EXPECT_EQ(format_date(parse_date("2009-01-02")), "2009-01-02");
  EXPECT_THROW(parse_date("2009-13-01"), DataError);
  EXPECT_THROW(parse_date("02/01/2009"), DataError);
}

}  // namespace
}  // namespace grnn
