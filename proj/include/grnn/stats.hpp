// SPDX-License-Identifier: Apache-2.0
//
// D'Agostino-Pearson omnibus normality test and Welch's unequal-variance
// t-test, with the special functions they need.

#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "grnn/eval.hpp"
#include "grnn/numerics.hpp"

namespace grnn {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace special {

inline constexpr int kMaxIterations = 500;
inline constexpr double kTiny = 1e-300;
inline constexpr double kEps = 1e-16;

// Continued fraction for I_x(a, b), modified Lentz.
inline double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw StatsError("incomplete_beta: a, b must be > 0");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw StatsError("gamma_q: a must be > 0");
  if (x <= 0.0) return 1.0;
  const double log_front = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    // Series for P(a, x).
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < kMaxIterations; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_front);
  }
  // Continued fraction for Q(a, x).
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(log_front) * h;
}

/// Student t CDF with (possibly non-integer) dof.
inline double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw StatsError("student_t_cdf: dof must be > 0");
  if (t == 0.0) return 0.5;
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t > 0.0 ? 1.0 - tail : tail;
}

/// P(|T| >= |t|).
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw StatsError("student_t: dof must be > 0");
  if (t == 0.0) return 1.0;
  return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

inline double chi_square_sf(double x, double dof) {
  if (!(dof > 0.0)) throw StatsError("chi_square_sf: dof must be > 0");
  return gamma_q(0.5 * dof, 0.5 * x);
}

}  // namespace special

// ---------------------------------------------------------------------------

struct NormalityResult {
  double statistic = 0.0;  // K^2
  double p_value = 1.0;
  double z_skew = 0.0;
  double z_kurtosis = 0.0;
  std::size_t n = 0;
};

inline constexpr std::size_t kMinNormalitySample = 20;

/// Skewness z-score (D'Agostino 1970 transform).
inline double skewness_z(double b2, double n) {
  double y = b2 * std::sqrt(((n + 1.0) * (n + 3.0)) / (6.0 * (n - 2.0)));
  const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                       ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
  const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
  const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
  const double alpha = std::sqrt(2.0 / (w2 - 1.0));
  if (y == 0.0) y = 1.0;
  return delta * std::log(y / alpha + std::sqrt((y / alpha) * (y / alpha) + 1.0));
}

/// Kurtosis z-score (Anscombe-Glynn transform).
inline double kurtosis_z(double b2, double n) {
  const double e = 3.0 * (n - 1.0) / (n + 1.0);
  const double var = 24.0 * n * (n - 2.0) * (n - 3.0) /
                     ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double x = (b2 - e) / std::sqrt(var);
  const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                            std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double a =
      6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
  const double term1 = 1.0 - 2.0 / (9.0 * a);
  const double denom = 1.0 + x * std::sqrt(2.0 / (a - 4.0));
  if (denom == 0.0) throw StatsError("kurtosis transform is undefined for this sample");
  const double term2 =
      (denom > 0.0 ? 1.0 : -1.0) * std::cbrt((1.0 - 2.0 / a) / std::abs(denom));
  return (term1 - term2) / std::sqrt(2.0 / (9.0 * a));
}

inline NormalityResult dagostino_pearson(std::span<const double> sample) {
  const std::size_t count = sample.size();
  if (count < kMinNormalitySample)
    throw StatsError("normality test needs at least 20 observations, got " +
                     std::to_string(count));
  const double n = static_cast<double>(count);
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : sample) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw StatsError("normality test on a zero-variance sample");

  NormalityResult r;
  r.n = count;
  r.z_skew = skewness_z(m3 / std::pow(m2, 1.5), n);
  r.z_kurtosis = kurtosis_z(m4 / (m2 * m2), n);
  r.statistic = r.z_skew * r.z_skew + r.z_kurtosis * r.z_kurtosis;
  r.p_value = special::chi_square_sf(r.statistic, 2.0);
  return r;
}

struct WelchResult {
  double t_statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool significant_at_05 = false;
};

inline WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw StatsError("welch_t needs at least 2 values per sample");
  auto moments = [](std::span<const double> s) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  if (!(va > 0.0) || !(vb > 0.0)) throw StatsError("welch_t on a zero-variance sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;

  WelchResult r;
  r.t_statistic = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p_value = special::student_t_two_sided_p(r.t_statistic, r.dof);
  r.significant_at_05 = r.p_value < 0.05;
  return r;
}

// ---------------------------------------------------------------------------
// Architecture comparison

enum class Metric { Rmse, Mape, R2 };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::Rmse: return "RMSE";
    case Metric::Mape: return "MAPE";
    case Metric::R2: return "R2";
  }
  return "?";
}

inline double metric_value(const EvalReport& r, Metric m) {
  switch (m) {
    case Metric::Rmse: return r.rmse;
    case Metric::Mape: return r.mape;
    case Metric::R2: return r.r2;
  }
  return 0.0;
}

/// A test outcome or the reason it could not be computed.
template <typename Result>
struct TestCell {
  std::optional<Result> result;
  std::string note;
};

struct MetricComparison {
  Metric metric = Metric::Rmse;
  std::vector<TestCell<NormalityResult>> normality;                 // per label
  std::vector<std::pair<std::size_t, std::size_t>> pairs;           // label indices
  std::vector<TestCell<WelchResult>> welch;                         // per pair
};

struct ComparisonReport {
  std::vector<std::string> labels;
  std::vector<MetricComparison> metrics;
};

using LabeledSamples = std::vector<std::pair<std::string, std::vector<EvalReport>>>;

/// Normality per label and Welch tests over all unordered label pairs, for
/// each requested metric. Insufficient data yields a note, not an error.
inline ComparisonReport compare_architectures(const LabeledSamples& archives,
                                              const std::vector<Metric>& metrics = {
                                                  Metric::Rmse, Metric::Mape, Metric::R2}) {
  ComparisonReport rep;
  for (const auto& [label, _] : archives) rep.labels.push_back(label);
  for (Metric m : metrics) {
    MetricComparison mc;
    mc.metric = m;
    std::vector<Vector> samples;
    for (const auto& [_, reports] : archives) {
      Vector s;
      for (const auto& r : reports) s.push_back(metric_value(r, m));
      samples.push_back(std::move(s));
    }
    for (const auto& s : samples) {
      TestCell<NormalityResult> cell;
      if (s.size() < kMinNormalitySample) {
        cell.note = "insufficient data (n=" + std::to_string(s.size()) + ")";
      } else {
        try {
          cell.result = dagostino_pearson(s);
        } catch (const StatsError& e) {
          cell.note = e.what();
        }
      }
      mc.normality.push_back(std::move(cell));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = i + 1; j < samples.size(); ++j) {
        TestCell<WelchResult> cell;
        if (samples[i].size() < 2 || samples[j].size() < 2) {
          cell.note = "insufficient data";
        } else {
          try {
            cell.result = welch_t(samples[i], samples[j]);
          } catch (const StatsError& e) {
            cell.note = e.what();
          }
        }
        mc.pairs.emplace_back(i, j);
        mc.welch.push_back(std::move(cell));
      }
    }
    rep.metrics.push_back(std::move(mc));
  }
  return rep;
}

namespace detail {
inline std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}
inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}
}  // namespace detail

/// Normality table: one block per metric with K^2 and p-value rows.
inline std::string render_normality_table(const ComparisonReport& rep) {
  std::ostringstream os;
  constexpr std::size_t w = 16;
  os << detail::pad("", 8) << detail::pad("", 8);
  for (const auto& l : rep.labels) os << detail::pad(l, w);
  os << '\n';
  for (const auto& mc : rep.metrics) {
    os << detail::pad(to_string(mc.metric), 8) << detail::pad("K2", 8);
    for (const auto& c : mc.normality)
      os << detail::pad(c.result ? detail::fixed4(c.result->statistic) : "n/a", w);
    os << '\n' << detail::pad("", 8) << detail::pad("p-value", 8);
    for (const auto& c : mc.normality)
      os << detail::pad(c.result ? detail::fixed4(c.result->p_value) : "n/a", w);
    os << '\n';
  }
  return os.str();
}

/// Pairwise Welch table: one block per metric with t and p-value rows.
inline std::string render_welch_table(const ComparisonReport& rep) {
  std::ostringstream os;
  if (rep.metrics.empty() || rep.metrics.front().pairs.empty()) return "(no pairs to compare)\n";
  constexpr std::size_t w = 22;
  os << detail::pad("", 8) << detail::pad("", 12);
  for (const auto& [i, j] : rep.metrics.front().pairs)
    os << detail::pad("(" + rep.labels[i] + ", " + rep.labels[j] + ")", w);
  os << '\n';
  for (const auto& mc : rep.metrics) {
    os << detail::pad(to_string(mc.metric), 8) << detail::pad("t-statistic", 12);
    for (const auto& c : mc.welch)
      os << detail::pad(c.result ? detail::fixed4(c.result->t_statistic) : "n/a", w);
    os << '\n' << detail::pad("", 8) << detail::pad("p-value", 12);
    for (const auto& c : mc.welch)
      os << detail::pad(c.result ? detail::fixed4(c.result->p_value) : "n/a", w);
    os << '\n';
  }
  return os.str();
}

/// One JSON record per test.
inline std::vector<nlohmann::json> comparison_records(const ComparisonReport& rep) {
  std::vector<nlohmann::json> out;
  for (const auto& mc : rep.metrics) {
    for (std::size_t k = 0; k < mc.normality.size(); ++k) {
      const auto& c = mc.normality[k];
      nlohmann::json j{{"test", "dagostino_pearson"},
                       {"metric", to_string(mc.metric)},
                       {"label", rep.labels[k]}};
      if (c.result) {
        j["k2"] = c.result->statistic;
        j["p_value"] = c.result->p_value;
        j["n"] = c.result->n;
      } else {
        j["note"] = c.note;
      }
      out.push_back(std::move(j));
    }
    for (std::size_t k = 0; k < mc.welch.size(); ++k) {
      const auto& c = mc.welch[k];
      nlohmann::json j{{"test", "welch_t"},
                       {"metric", to_string(mc.metric)},
                       {"a", rep.labels[mc.pairs[k].first]},
                       {"b", rep.labels[mc.pairs[k].second]}};
      if (c.result) {
        j["t"] = c.result->t_statistic;
        j["dof"] = c.result->dof;
        j["p_value"] = c.result->p_value;
        j["significant_at_05"] = c.result->significant_at_05;
      } else {
        j["note"] = c.note;
      }
      out.push_back(std::move(j));
    }
  }
  return out;
}

}  // namespace grnn
