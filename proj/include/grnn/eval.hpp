// SPDX-License-Identifier: Apache-2.0
//
// Prediction-quality metrics and the per-run evaluation report.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "grnn/data.hpp"
#include "grnn/network.hpp"

namespace grnn {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Guard used by MAPE against zero targets.
inline constexpr double kMapeEpsilon = 1e-8;

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> yhat, const char* what) {
  if (y.size() != yhat.size())
    throw MetricError(std::string(what) + ": length mismatch (" + std::to_string(y.size()) +
                      " vs " + std::to_string(yhat.size()) + ")");
  if (y.empty()) throw MetricError(std::string(what) + ": empty input");
}
}  // namespace detail

/// 1 - SS_res / SS_tot. Throws when y is constant.
inline double r2(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat, "r2");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw MetricError("r2: target is constant");
  return 1.0 - ss_res / ss_tot;
}

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

/// Mean of |y - yhat| / max(eps, |y|), as a fraction (multiply by 100 for percent).
inline double mape(std::span<const double> y, std::span<const double> yhat,
                   double eps = kMapeEpsilon) {
  detail::check_pair(y, yhat, "mape");
  if (!(eps > 0.0)) throw MetricError("mape: epsilon must be > 0");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += std::abs(y[i] - yhat[i]) / std::max(eps, std::abs(y[i]));
  return s / static_cast<double>(y.size());
}

struct EvalReport {
  std::string label;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double r2 = 0.0;
  double rmse = 0.0;      // target units
  double mape = 0.0;      // fraction
  double rmse_nd = 0.0;   // normalized units

  double mape_percent() const noexcept { return mape * 100.0; }
};

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"label", r.label},     {"seed", r.seed},
                     {"n", r.n},             {"r2", r.r2},
                     {"rmse", r.rmse},       {"mape", r.mape},
                     {"mape_percent", r.mape_percent()},
                     {"rmse_nd", r.rmse_nd}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  r.label = j.value("label", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.n = j.at("n").get<std::size_t>();
  r.r2 = j.at("r2").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.mape = j.at("mape").get<double>();
  r.rmse_nd = j.at("rmse_nd").get<double>();
}

/// Metrics from normalized targets and predictions. RMSE(ND) is computed in
/// normalized space; R2, RMSE and MAPE after mapping both back to the target
/// column's raw units.
inline EvalReport evaluate_predictions(std::span<const double> y_norm,
                                       std::span<const double> pred_norm,
                                       const NormalizationParams& norm, const std::string& target) {
  EvalReport r;
  r.n = y_norm.size();
  r.rmse_nd = rmse(y_norm, pred_norm);
  const Vector y = inverse_transform(y_norm, norm, target);
  const Vector yhat = inverse_transform(pred_norm, norm, target);
  r.r2 = grnn::r2(y, yhat);
  r.rmse = grnn::rmse(y, yhat);
  r.mape = grnn::mape(y, yhat);
  return r;
}

/// Evaluates a trained network on the dataset's test split.
inline EvalReport evaluate(const NetworkSpec& spec, const NetworkParams& params,
                           const WindowedDataset& ds) {
  if (spec.input_dim != ds.input_dim())
    throw ShapeError("model expects " + std::to_string(spec.input_dim) + " features, dataset has " +
                     std::to_string(ds.input_dim()));
  const Vector pred = predict_batch(spec, params, ds.test_x);
  return evaluate_predictions(ds.test_y, pred, ds.norm, ds.target_name);
}

}  // namespace grnn
