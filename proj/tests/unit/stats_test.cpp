// SPDX-License-Identifier: Apache-2.0
//
// Reference values were computed once with scipy.stats / scipy.special and
// frozen here.

#include <gtest/gtest.h>

#include <cmath>

#include "grnn/stats.hpp"

namespace grnn {
namespace {

struct Case3 {
  double a, b, x, expected;
};

TEST(Special, IncompleteBetaMatchesReference) {
  const Case3 cases[] = {
      {0.5, 0.5, 0.3, 0.36901011956554536},   {2, 3, 0.4, 0.5248},
      {10, 0.5, 0.9, 0.15164090963470994},    {0.9, 0.9, 0.1, 0.11464699677582495},
      {30, 40, 0.45, 0.6447480085585666},     {4.5, 0.5, 0.2, 0.00020249932206764079},
      {100, 0.5, 0.999, 0.6550435163244294},
  };
  for (const auto& c : cases)
    EXPECT_NEAR(special::incomplete_beta(c.a, c.b, c.x), c.expected, 1e-12 * std::max(1.0, c.expected))
        << c.a << "," << c.b << "," << c.x;
  EXPECT_EQ(special::incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(special::incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(Special, UpperGammaMatchesReference) {
  const double cases[][3] = {
      {1, 2.5, 0.0820849986238988},   {0.5, 0.3, 0.4385780260809997},
      {3, 7.2, 0.025473507781812302}, {10, 4, 0.9918677572030661},
      {2.5, 12, 0.0002171129434527233},
  };
  for (const auto& c : cases)
    EXPECT_NEAR(special::gamma_q(c[0], c[1]), c[2], 1e-12 * std::max(1e-3, c[2])) << c[0] << "," << c[1];
}

TEST(Special, StudentTCdfMatchesReference) {
  const double cases[][3] = {
      {0.5, 3, 0.6742760175759246},    {2, 8, 0.9597418810213687},   {-1.3, 4.7, 0.12684864793230508},
      {3.5, 20.2, 0.9988853623017461}, {10, 2, 0.9950737714883371},
  };
  for (const auto& c : cases) EXPECT_NEAR(special::student_t_cdf(c[0], c[1]), c[2], 1e-12);
  EXPECT_DOUBLE_EQ(special::student_t_cdf(0.0, 7.0), 0.5);
}

TEST(Special, ChiSquareSurvivalMatchesReference) {
  EXPECT_NEAR(special::chi_square_sf(3.1913, 2), 0.20277668081415826, 1e-12);
  EXPECT_NEAR(special::chi_square_sf(5, 3), 0.1717971442967335, 1e-12);
  EXPECT_NEAR(special::chi_square_sf(12, 7), 0.10055886850835878, 1e-12);
  // Two degrees of freedom reduce to exp(-x/2).
  for (double x : {0.1, 1.0, 4.0, 20.0}) EXPECT_NEAR(special::chi_square_sf(x, 2), std::exp(-x / 2), 1e-14);
}

TEST(Normality, MatchesReferenceSamples) {
  Vector x, y;
  for (int i = 0; i < 50; ++i) x.push_back(std::sin(1.7 * i) * 2 + 0.3 * (i % 7) + 0.05 * i);
  for (int i = 0; i < 30; ++i) y.push_back(std::pow(std::cos(0.9 * i), 3) + 0.01 * i * i);
  const auto rx = dagostino_pearson(x);
  EXPECT_NEAR(rx.statistic, 5.201061428499684, 1e-10);
  EXPECT_NEAR(rx.p_value, 0.07423417062599807, 1e-11);
  EXPECT_NEAR(rx.z_skew, -0.13882634997594037, 1e-10);
  EXPECT_NEAR(rx.z_kurtosis, -2.276354250342429, 1e-10);
  EXPECT_EQ(rx.n, 50u);
  const auto ry = dagostino_pearson(y);
  EXPECT_NEAR(ry.statistic, 3.1587999852358677, 1e-10);
  EXPECT_NEAR(ry.p_value, 0.20609872186817468, 1e-11);
}

TEST(Normality, RejectsSmallOrConstantSamples) {
  EXPECT_THROW(dagostino_pearson(Vector(19, 1.0)), StatsError);
  EXPECT_THROW(dagostino_pearson(Vector(40, 1.0)), StatsError);
}

TEST(Normality, AffineInvariant) {
  Rng rng(1);
  Vector s(60);
  for (auto& v : s) v = rng.normal() + 0.3 * rng.uniform();
  const auto base = dagostino_pearson(s);
  for (auto& v : s) v = 3.5 * v - 12.0;
  EXPECT_NEAR(dagostino_pearson(s).statistic, base.statistic, 1e-9);
}

TEST(Normality, GaussianFalseRejectionRateNearFivePercent) {
  Rng rng(2);
  int rejected = 0;
  constexpr int kTrials = 2000;
  for (int t = 0; t < kTrials; ++t) {
    Vector s(100);
    for (auto& v : s) v = rng.normal();
    rejected += dagostino_pearson(s).p_value < 0.05;
  }
  EXPECT_NEAR(rejected / double(kTrials), 0.05, 0.02);
}

TEST(Normality, DetectsSkewedSamples) {
  Rng rng(3);
  Vector s(200);
  for (auto& v : s) v = std::exp(rng.normal());
  EXPECT_LT(dagostino_pearson(s).p_value, 1e-6);
}

TEST(Welch, MatchesReference) {
  const auto r1 = welch_t(Vector{1, 2, 3, 4, 5}, Vector{2, 3, 4, 5, 6});
  EXPECT_NEAR(r1.t_statistic, -1.0, 1e-14);
  EXPECT_NEAR(r1.dof, 8.0, 1e-12);
  EXPECT_NEAR(r1.p_value, 0.34659350708733416, 1e-12);
  EXPECT_FALSE(r1.significant_at_05);

  const Vector a{.9645, .951, .948, .957, .962, .944, .953, .96};
  const Vector b{.9233, .93, .915, .941, .902, .925, .918, .933, .911, .928, .936};
  const auto r2 = welch_t(a, b);
  EXPECT_NEAR(r2.t_statistic, 7.218348287549768, 1e-10);
  EXPECT_NEAR(r2.dof, 16.690774022528032, 1e-9);
  EXPECT_NEAR(r2.p_value, 1.6005244500739607e-06, 1e-15);
  EXPECT_TRUE(r2.significant_at_05);

  const Vector c{295.9, 310.2, 305.5, 330.1, 299.9, 320.4};
  const Vector d{337.6, 362.0, 341.9, 329.8, 355.1, 348.3, 371.5};
  const auto r3 = welch_t(c, d);
  EXPECT_NEAR(r3.t_statistic, -5.147619495241946, 1e-10);
  EXPECT_NEAR(r3.dof, 10.970296900499827, 1e-9);
  EXPECT_NEAR(r3.p_value, 0.0003221941937682717, 1e-13);
}

TEST(Welch, AntisymmetricAndDofBounded) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    Vector a(static_cast<std::size_t>(rng.uniform_int(2, 30))), b(static_cast<std::size_t>(rng.uniform_int(2, 30)));
    for (auto& v : a) v = rng.normal(0.0, rng.uniform(0.1, 3.0));
    for (auto& v : b) v = rng.normal(0.5, 1.0);
    const auto ab = welch_t(a, b), ba = welch_t(b, a);
    EXPECT_DOUBLE_EQ(ab.t_statistic, -ba.t_statistic);
    EXPECT_DOUBLE_EQ(ab.p_value, ba.p_value);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    const double lo = static_cast<double>(std::min(a.size(), b.size())) - 1.0;
    EXPECT_GE(ab.dof, lo - 1e-9);
    EXPECT_LE(ab.dof, static_cast<double>(a.size() + b.size()) - 2.0 + 1e-9);
  }
}

TEST(Welch, RejectsDegenerateSamples) {
  EXPECT_THROW(welch_t(Vector{1.0}, Vector{1, 2}), StatsError);
  EXPECT_THROW(welch_t(Vector{2, 2, 2}, Vector{1, 2}), StatsError);
}

TEST(Welch, IdenticalSamplesGiveZeroAndOne) {
  const Vector a{0.3, 1.2, -0.4, 2.2, 0.9};
  const auto r = welch_t(a, a);
  EXPECT_EQ(r.t_statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(Special, TwoSidedPDecreasesWithAbsT) {
  for (double dof : {1.5, 4.0, 17.3, 120.0}) {
    double prev = 1.0;
    for (double t = 0.0; t < 12.0; t += 0.25) {
      const double p = special::student_t_two_sided_p(t, dof);
      EXPECT_LE(p, prev);
      EXPECT_DOUBLE_EQ(p, special::student_t_two_sided_p(-t, dof));
      prev = p;
    }
  }
  EXPECT_EQ(special::chi_square_sf(0.0, 2.0), 1.0);
}

// Acceptance of a Gaussian sample at the 5% level happens with probability
// 0.95 exactly, so the rate is checked over enough repeats to resolve it.
TEST(Normality, LargeGaussianAcceptanceRateIsNominal) {
  Rng rng(7);
  int accepted = 0;
  constexpr int kRepeats = 4000;
  for (int rep = 0; rep < kRepeats; ++rep) {
    Vector g(10000);
    for (auto& v : g) v = rng.normal();
    accepted += dagostino_pearson(g).p_value > 0.05;
  }
  EXPECT_NEAR(accepted / double(kRepeats), 0.95, 0.01);
}

TEST(Normality, UniformSamplesRejected) {
  Rng rng(9);
  int rejected = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Vector u(1000);
    for (auto& v : u) v = rng.uniform();
    rejected += dagostino_pearson(u).p_value < 0.05;
  }
  EXPECT_GE(rejected, 95);
}

TEST(Welch, NullAndShiftedAlternative) {
  Rng rng(8);
  int kept = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Vector a(30), b(30);
    for (auto& v : a) v = rng.normal(0.95, 0.01);
    for (auto& v : b) v = rng.normal(0.95, 0.01);
    kept += welch_t(a, b).p_value > 0.05;
  }
  EXPECT_GE(kept, 180);
  Vector a(30), b(30);
  for (auto& v : a) v = rng.normal(0.0, 1.0);
  for (auto& v : b) v = rng.normal(5.0, 1.0);
  EXPECT_LT(welch_t(a, b).p_value, 1e-3);
}

EvalReport report(double r2, double rmse, double mape) { return {"x", 0, 10, r2, rmse, mape, 0.0}; }

TEST(Compare, ReportsInsufficientDataAsNotes) {
  LabeledSamples s{{"lstm1", {report(.95, 300, .014)}}, {"gru1", {report(.94, 310, .015), report(.96, 290, .013)}}};
  const auto rep = compare_architectures(s);
  ASSERT_EQ(rep.metrics.size(), 3u);
  for (const auto& mc : rep.metrics) {
    ASSERT_EQ(mc.normality.size(), 2u);
    EXPECT_FALSE(mc.normality[0].result.has_value());
    EXPECT_NE(mc.normality[0].note.find("n=1"), std::string::npos);
    ASSERT_EQ(mc.welch.size(), 1u);
    EXPECT_FALSE(mc.welch[0].result.has_value());
  }
  EXPECT_NE(render_welch_table(rep).find("n/a"), std::string::npos);
}

TEST(Compare, SingleArchitectureHasNoPairs) {
  std::vector<EvalReport> rs;
  for (int i = 0; i < 20; ++i) rs.push_back(report(0.9 + 0.001 * i * (i % 3), 300 + i, 0.01 + 1e-4 * (i % 5)));
  const auto rep = compare_architectures({{"lstm1", rs}});
  for (const auto& mc : rep.metrics) {
    EXPECT_TRUE(mc.welch.empty());
    ASSERT_EQ(mc.normality.size(), 1u);
    EXPECT_TRUE(mc.normality[0].result.has_value());
  }
  EXPECT_EQ(render_welch_table(rep), "(no pairs to compare)\n");
}

TEST(Compare, ThreeLabelsGiveThreePairsAndRecords) {
  Rng rng(5);
  LabeledSamples s;
  for (const char* l : {"lstm1", "gru1", "lstm-gru1"}) {
    std::vector<EvalReport> rs;
    for (int i = 0; i < 25; ++i) rs.push_back(report(0.95 + 0.01 * rng.normal(), 300 + 10 * rng.normal(), 0.014 + 0.001 * rng.normal()));
    s.emplace_back(l, rs);
  }
  const auto rep = compare_architectures(s);
  for (const auto& mc : rep.metrics) {
    EXPECT_EQ(mc.pairs.size(), 3u);
    for (const auto& c : mc.normality) EXPECT_TRUE(c.result.has_value());
    for (const auto& c : mc.welch) EXPECT_TRUE(c.result.has_value());
  }
  EXPECT_EQ(comparison_records(rep).size(), 3u * (3u + 3u));
  const auto table = render_normality_table(rep);
  EXPECT_NE(table.find("lstm-gru1"), std::string::npos);
  EXPECT_NE(table.find("K2"), std::string::npos);
}

}  // namespace
}  // namespace grnn
