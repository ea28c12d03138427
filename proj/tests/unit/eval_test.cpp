// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "grnn/eval.hpp"
#include "grnn/synthetic.hpp"

namespace grnn {
namespace {

TEST(R2, Examples) {
  const Vector y{1, 2, 3};
  EXPECT_EQ(r2(y, y), 1.0);
  EXPECT_EQ(r2(y, Vector{2, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(r2(y, Vector{1, 2, 4}), 0.5);
  EXPECT_THROW(r2(Vector{5, 5}, Vector{1, 2}), MetricError);
  EXPECT_THROW(r2(Vector{}, Vector{}), MetricError);
}

TEST(Rmse, Examples) {
  EXPECT_EQ(rmse(Vector{1, 2}, Vector{1, 2}), 0.0);
  EXPECT_NEAR(rmse(Vector{0, 0}, Vector{3, 4}), 3.535534, 1e-6);
  EXPECT_DOUBLE_EQ(rmse(Vector{0, 0}, Vector{3, 4}), std::sqrt(12.5));
  EXPECT_THROW(rmse(Vector{1}, Vector{1, 2}), MetricError);
}

TEST(Mape, Examples) {
  EXPECT_EQ(mape(Vector{3, 4}, Vector{3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(mape(Vector{100}, Vector{99}), 0.01);
  EXPECT_DOUBLE_EQ(mape(Vector{0}, Vector{1}), 1e8);
  EXPECT_THROW(mape(Vector{1, 2}, Vector{1}), MetricError);
}

TEST(Metrics, HomogeneityAndInvariance) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Vector y(20), yhat(20);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng.uniform(1.0, 10.0);
      yhat[i] = y[i] + rng.normal(0.0, 0.5);
    }
    const double c = rng.uniform(0.1, 50.0), shift = rng.uniform(-100.0, 100.0);
    Vector ys(20), yhs(20), ya(20), yha(20);
    for (std::size_t i = 0; i < y.size(); ++i) {
      ys[i] = c * y[i];
      yhs[i] = c * yhat[i];
      ya[i] = -c * y[i] + shift;
      yha[i] = -c * yhat[i] + shift;
    }
    EXPECT_NEAR(rmse(ys, yhs), c * rmse(y, yhat), 1e-9 * c * rmse(y, yhat));
    EXPECT_NEAR(r2(ya, yha), r2(y, yhat), 1e-9);
    EXPECT_NEAR(mape(ys, yhs), mape(y, yhat), 1e-12);
    EXPECT_LE(r2(y, yhat), 1.0);
    EXPECT_GE(mape(y, yhat), 0.0);
  }
}

TEST(EvaluatePredictions, RmseScalesWithTargetRange) {
  NormalizationParams norm{{{"NIFTY", 2573.15, 21778.3}}};
  Rng rng(2);
  Vector y(50), p(50);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rng.uniform(0.5, 1.0);
    p[i] = y[i] + rng.normal(0.0, 0.01);
  }
  const auto r = evaluate_predictions(y, p, norm, "NIFTY");
  EXPECT_EQ(r.n, 50u);
  EXPECT_NEAR(r.rmse, r.rmse_nd * (21778.3 - 2573.15), 1e-9 * r.rmse);
  EXPECT_DOUBLE_EQ(r.mape_percent(), r.mape * 100.0);
}

TEST(EvaluatePredictions, PerfectAndMeanPredictors) {
  NormalizationParams norm{{{"t", 10.0, 20.0}}};
  const Vector y{0.1, 0.4, 0.9, 0.3};
  const auto perfect = evaluate_predictions(y, y, norm, "t");
  EXPECT_EQ(perfect.r2, 1.0);
  EXPECT_EQ(perfect.rmse, 0.0);
  const Vector mean(4, (0.1 + 0.4 + 0.9 + 0.3) / 4.0);
  EXPECT_NEAR(evaluate_predictions(y, mean, norm, "t").r2, 0.0, 1e-12);
}

TEST(Evaluate, ShapeMismatchRejected) {
  const auto ds = synthetic::sine_dataset(120, 4);
  const auto spec = make_spec("lstm1", {2}, 3);
  Rng rng(3);
  EXPECT_THROW(evaluate(spec, init_params(spec, rng), ds), ShapeError);
}

TEST(EvalReport, JsonRoundTrip) {
  const EvalReport r{"lstm-gru1", 9, 730, 0.9645, 295.9468, 0.000137, 0.0154};
  const nlohmann::json j = r;
  EXPECT_DOUBLE_EQ(j.at("mape_percent").get<double>(), 0.0137);
  const auto back = j.get<EvalReport>();
  EXPECT_EQ(back.label, r.label);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.rmse, r.rmse);
  EXPECT_EQ(back.rmse_nd, r.rmse_nd);
}

}  // namespace
}  // namespace grnn
