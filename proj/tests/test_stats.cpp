#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "xaifn/analysis.hpp"

using namespace xaifn;
using namespace xaifn::stats;

namespace {

// Reference values below were frozen from scipy 1.15.3.
const std::vector<Group> kThree = {{"a", {2.1, 3.4, 1.9, 5.0, 4.2}},
                                   {"b", {6.3, 5.9, 7.1, 8.0}},
                                   {"c", {4.4, 3.3, 5.5, 4.9, 6.1, 5.2}}};

const std::vector<double> kLowSpread = {0.1257,  -0.1321, 0.6404,  0.1049,  -0.5357, 0.3616,  1.304,   0.9471,
                                        -0.7037, -1.2654, -0.6233, 0.0413,  -2.325,  -0.2188, -1.2459, -0.7323,
                                        -0.5443, -0.3163, 0.4116,  1.0425,  -0.1285, 1.3665,  -0.6652, 0.3515,
                                        0.9035,  0.094,   -0.7435, -0.9217, -0.4577, 0.2202};
const std::vector<double> kHighSpread = {-10.0962, -2.0918, -1.5923, 5.4085,   2.1466,   3.5537,  -6.5383, -1.2961,
                                         7.8398,   14.9343, -12.5907, 15.1392, 13.4588,  7.8131,  2.6446,  -3.1392,
                                         14.5802,  19.6026, 18.0163,  13.151,  3.5738,   -12.0832, -0.0445, 6.5647,
                                         -12.8836, 3.9512,  4.2986,   6.9604,  -11.8412, -6.617};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------- distributions

TEST(Distributions, FCriticalValues) {
  struct Row {
    double d1, d2, crit;
  };
  for (const Row& r : {Row{1, 5, 6.607890973703367}, Row{2, 10, 4.1028210151304005}, Row{3, 20, 3.09839121214078},
                       Row{4, 30, 2.6896275736914177}, Row{2, 117, 3.073762904449709}}) {
    EXPECT_NEAR(f_quantile(0.95, r.d1, r.d2), r.crit, 1e-3);
    EXPECT_NEAR(f_sf(r.crit, r.d1, r.d2), 0.05, 1e-8);
  }
  EXPECT_EQ(f_sf(0.0, 2, 3), 1.0);
  EXPECT_EQ(error_code([] { f_sf(1.0, 0, 3); }), "BAD_DF");
}

TEST(Distributions, StudentizedRangeCriticalValues) {
  struct Row {
    double k, df, q;
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (const Row& r : {Row{2, 5, 3.63535169514679}, Row{3, 10, 3.876776750013158}, Row{4, 20, 3.9582935609453846},
                       Row{5, 30, 4.102079019506422}, Row{2, 10, 3.151064183329372}, Row{4, 12, 4.198660231300105},
                       Row{3, 60, 3.3986612406682806}, Row{10, 24, 4.915249921745297}, Row{3, inf, 3.314493155398122}}) {
    EXPECT_NEAR(qtukey(0.95, r.k, r.df), r.q, 1e-3) << "k=" << r.k << " df=" << r.df;
  }
  EXPECT_NEAR(ptukey(3.5, 4, 15), 0.8948899115202119, 1e-6);
  EXPECT_NEAR(ptukey(2.0, 3, 8), 0.6210642944699188, 1e-6);
}

TEST(Distributions, RangeOfTwoNormalsClosedForm) {
  // The range of two standard normals is |X1 - X2| ~ sqrt(2)|Z|.
  boost::math::normal_distribution<> n;
  const double inf = std::numeric_limits<double>::infinity();
  for (double q : {0.5, 1.0, 2.0, 3.5}) {
    const double expected = 2.0 * boost::math::cdf(n, q / std::sqrt(2.0)) - 1.0;
    EXPECT_NEAR(ptukey(q, 2, inf), expected, 1e-9);
  }
}

TEST(Distributions, TwoSidedT) {
  EXPECT_NEAR(t_two_sided(2.228138851986274, 10), 0.05, 1e-9);
  EXPECT_NEAR(t_two_sided(0.0, 7), 1.0, 1e-12);
  EXPECT_NEAR(normal_sf(1.6448536269514722), 0.05, 1e-12);
}

// ---------------------------------------------------------------- anova

TEST(Anova, IdenticalGroups) {
  const auto r = anova_oneway({{"a", {1, 2, 3}}, {"b", {1, 2, 3}}, {"c", {1, 2, 3}}});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(Anova, HandSumsOfSquares) {
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const double grand = 3.5;
  const double ssb = 3 * std::pow(mean(a) - grand, 2) + 3 * std::pow(mean(b) - grand, 2);
  double ssw = 0.0;
  for (double v : a) ssw += std::pow(v - mean(a), 2);
  for (double v : b) ssw += std::pow(v - mean(b), 2);
  const double f = (ssb / 1.0) / (ssw / 4.0);
  const auto r = anova_oneway({{"a", a}, {"b", b}});
  EXPECT_NEAR(r.statistic, f, 1e-12);
  EXPECT_NEAR(r.statistic, 13.5, 1e-12);
  EXPECT_NEAR(r.p_value, 0.02131164112875672, 1e-9);
  EXPECT_EQ(r.df, (std::vector<double>{1, 4}));
}

TEST(Anova, ScipyReference) {
  const auto r = anova_oneway(kThree);
  EXPECT_NEAR(r.statistic, 11.379319926365875, 1e-9);
  EXPECT_NEAR(r.p_value, 0.0016932100377686473, 1e-9);
  EXPECT_EQ(r.df, (std::vector<double>{2, 12}));
}

TEST(Anova, DegreesOfFreedomFormula) {
  std::vector<Group> g(3);
  for (int i = 0; i < 3; ++i) {
    g[i].name = std::to_string(i);
    for (int j = 0; j < 40; ++j) g[i].values.push_back(std::sin(i * 40 + j));
  }
  EXPECT_EQ(anova_oneway(g).df, (std::vector<double>{2, 117}));
}

TEST(Anova, TwoGroupsEqualsPooledTSquared) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(5 + trial % 7), b(4 + trial % 5);
    for (double& v : a) v = n(rng);
    for (double& v : b) v = n(rng) + 0.5;
    const double ma = mean(a), mb = mean(b);
    double ss = 0.0;
    for (double v : a) ss += (v - ma) * (v - ma);
    for (double v : b) ss += (v - mb) * (v - mb);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sp2 = ss / (na + nb - 2);
    const double t = (ma - mb) / std::sqrt(sp2 * (1 / na + 1 / nb));
    const auto r = anova_oneway({{"a", a}, {"b", b}});
    EXPECT_NEAR(r.statistic, t * t, 1e-9 * std::max(1.0, t * t));
    EXPECT_NEAR(r.p_value, t_two_sided(t, na + nb - 2), 1e-9);
  }
}

TEST(Anova, Errors) {
  EXPECT_EQ(error_code([] { anova_oneway({{"a", {1, 2}}}); }), "TOO_FEW_GROUPS");
  EXPECT_EQ(error_code([] { anova_oneway({{"a", {1, 2}}, {"b", {3}}}); }), "GROUP_TOO_SMALL");
}

TEST(Anova, PermutedNullRejectsAboutFivePercent) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> pooled(60);
  for (double& v : pooled) v = n(rng);
  int rejections = 0;
  for (int i = 0; i < 1000; ++i) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    std::vector<Group> g = {{"a", {pooled.begin(), pooled.begin() + 20}},
                            {"b", {pooled.begin() + 20, pooled.begin() + 40}},
                            {"c", {pooled.begin() + 40, pooled.end()}}};
    const auto r = anova_oneway(g);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    rejections += r.p_value < 0.05;
  }
  EXPECT_NEAR(rejections / 1000.0, 0.05, 0.02);
}

// ---------------------------------------------------------------- tukey

TEST(Tukey, ScipyReference) {
  const auto r = tukey_hsd(kThree);
  ASSERT_EQ(r.pairwise.size(), 3u);
  const double expected[3] = {0.00122414, 0.08205397, 0.04538918};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.pairwise[i].p_value, expected[i], 1e-5) << i;
  EXPECT_EQ(r.pairwise[0].a, "a");
  EXPECT_EQ(r.pairwise[0].b, "b");
  EXPECT_NEAR(r.pairwise[0].mean_difference, mean(kThree[1].values) - mean(kThree[0].values), 1e-12);
  EXPECT_TRUE(r.pairwise[0].reject);
  EXPECT_FALSE(r.pairwise[1].reject);
}

TEST(Tukey, SeparatedGroups) {
  const auto r = tukey_hsd({{"a", {0.1, -0.2, 0.05}}, {"b", {10.2, 9.9, 10.05}}, {"c", {0.3, 0.0, -0.1}}});
  EXPECT_LT(r.pairwise[0].p_value, 0.01);
  EXPECT_LT(r.pairwise[2].p_value, 0.01);
  EXPECT_NEAR(r.pairwise[1].p_value, 0.833483497, 1e-4);
}

TEST(Tukey, IdenticalGroupsAndRowCount) {
  const auto r = tukey_hsd({{"a", {1, 2, 3}}, {"b", {1, 2, 3}}, {"c", {1, 2, 3}}, {"d", {1, 2, 3}}});
  EXPECT_EQ(r.pairwise.size(), 6u);
  for (const auto& p : r.pairwise) EXPECT_NEAR(p.p_value, 1.0, 1e-9);
  std::vector<Group> five;
  for (int i = 0; i < 5; ++i) five.push_back({std::to_string(i), {1.0 * i, 2.0, 3.0 + i}});
  EXPECT_EQ(tukey_hsd(five).pairwise.size(), 10u);
  EXPECT_EQ(error_code([] { tukey_hsd({{"a", {1, 2}}}); }), "TOO_FEW_GROUPS");
}

// ---------------------------------------------------------------- pearson

TEST(Pearson, PerfectAndInverse) {
  EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {1, 2, 3}).statistic, 1.0);
  EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {-1, -2, -3}).statistic, -1.0);
  EXPECT_EQ(pearson({1, 2, 3}, {1, 2, 3}).p_value, 0.0);
}

TEST(Pearson, HandCovariance) {
  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 9};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (x[i] - mean(x)) * (y[i] - mean(y));
    sxx += (x[i] - mean(x)) * (x[i] - mean(x));
    syy += (y[i] - mean(y)) * (y[i] - mean(y));
  }
  const auto r = pearson(x, y);
  EXPECT_NEAR(r.statistic, sxy / std::sqrt(sxx * syy), 1e-14);
  EXPECT_NEAR(r.statistic, 0.9943767126843688, 1e-12);
  EXPECT_NEAR(r.p_value, 0.00562328731563122, 1e-9);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(25), y(25);
  for (int i = 0; i < 25; ++i) {
    x[i] = n(rng);
    y[i] = 0.4 * x[i] + n(rng);
  }
  const double r = pearson(x, y).statistic;
  std::vector<double> x2 = x, y2 = y;
  for (double& v : x2) v = 3.5 * v - 7.0;
  for (double& v : y2) v = 0.02 * v + 100.0;
  EXPECT_NEAR(pearson(x2, y).statistic, r, 1e-12);
  EXPECT_NEAR(pearson(x, y2).statistic, r, 1e-12);
}

TEST(Pearson, Errors) {
  EXPECT_EQ(error_code([] { pearson({1, 1, 1}, {1, 2, 3}); }), "CONSTANT_INPUT");
}

// ---------------------------------------------------------------- shapiro

TEST(Shapiro, ScipyReference) {
  std::vector<double> all;
  for (const auto& g : kThree) all.insert(all.end(), g.values.begin(), g.values.end());
  struct Case {
    std::vector<double> x;
    double w, p;
  };
  std::vector<double> bimodal(20, 0.0);
  bimodal.resize(40, 100.0);
  std::vector<double> powers;
  for (int i = 1; i <= 30; ++i) powers.push_back(std::pow(i, 1.5));
  const std::vector<Case> cases = {{all, 0.979377540206857, 0.9650781092875955},
                                   {bimodal, 0.6372492336875555, 1.0470883881834911e-08},
                                   {{1, 2, 4}, 0.9642857142857142, 0.6368868450289689},
                                   {{1.5, 2.5, 2.7, 3.1, 9.0, 2.2, 2.8}, 0.6520872741414979, 0.0010867419162503516},
                                   {powers, 0.9345615457434135, 0.06497732401750264}};
  for (const auto& c : cases) {
    const auto r = shapiro_wilk(c.x);
    EXPECT_NEAR(r.statistic, c.w, 1e-4);
    EXPECT_NEAR(r.p_value, c.p, std::max(1e-4, 0.02 * c.p));
  }
}

TEST(Shapiro, NormalQuantilesGiveWNearOne) {
  boost::math::normal_distribution<> n;
  std::vector<double> x;
  for (int i = 1; i <= 30; ++i) x.push_back(boost::math::quantile(n, (i - 0.375) / 30.25));
  EXPECT_GE(shapiro_wilk(x).statistic, 0.99);
}

TEST(Shapiro, Errors) {
  EXPECT_EQ(error_code([] { shapiro_wilk({1, 2}); }), "BAD_SAMPLE_SIZE");
  EXPECT_EQ(error_code([] { shapiro_wilk({2, 2, 2, 2}); }), "CONSTANT_INPUT");
}

// ---------------------------------------------------------------- levene

TEST(Levene, ScipyReference) {
  const auto mean_c = levene(kThree);
  EXPECT_NEAR(mean_c.statistic, 0.6362500397106948, 1e-9);
  EXPECT_NEAR(mean_c.p_value, 0.5462243500912185, 1e-9);
  const auto med = levene(kThree, LeveneCenter::Median);
  EXPECT_NEAR(med.statistic, 0.5238950772547619, 1e-9);
  EXPECT_NEAR(med.p_value, 0.605153704051617, 1e-9);
}

TEST(Levene, VarianceOneVersusHundred) {
  const auto r = levene({{"low", kLowSpread}, {"high", kHighSpread}});
  EXPECT_NEAR(r.statistic, 48.21727328249101, 1e-8);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(Levene, IdenticalSpreadGivesPOne) {
  const auto r = levene({{"a", {1, 2, 3, 4}}, {"b", {11, 12, 13, 14}}, {"c", {-4, -3, -2, -1}}});
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(Levene, EqualsAnovaOverAbsoluteDeviations) {
  for (auto center : {LeveneCenter::Mean, LeveneCenter::Median}) {
    const auto a = levene(kThree, center);
    const auto b = anova_oneway(absolute_deviations(kThree, center));
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(a.p_value, b.p_value);
    EXPECT_EQ(a.df, b.df);
  }
  // Deviations recomputed by hand for the mean center.
  const auto dev = absolute_deviations(kThree, LeveneCenter::Mean);
  for (std::size_t g = 0; g < kThree.size(); ++g) {
    const double m = mean(kThree[g].values);
    for (std::size_t i = 0; i < kThree[g].values.size(); ++i) {
      EXPECT_DOUBLE_EQ(dev[g].values[i], std::abs(kThree[g].values[i] - m));
    }
  }
}

TEST(Results, JsonShape) {
  const json j = tukey_hsd(kThree).to_json();
  EXPECT_EQ(j["test"], "tukey");
  EXPECT_EQ(j["pairwise"].size(), 3u);
  EXPECT_TRUE(anova_oneway(kThree).to_json().contains("df"));
}

// ---------------------------------------------------------------- study analysis

namespace {

MetricsReport participant(Condition c, int i, double cred, double minutes = 20.0) {
  MetricsReport m;
  m.session_id = to_string(c) + "-" + std::to_string(i);
  m.condition = c;
  const auto k = static_cast<std::int64_t>(std::lround(cred * 12));
  m.credibility = Rate::of(k, 12);
  m.incredibility = Rate::of(3 + i % 2, 5);
  m.prediction_task_accuracy = Rate::of(i % 5, 4);
  if (c != Condition::Baseline) {
    m.agreement = Rate::of(6 + i % 3, 10);
    m.engagement = Rate::of(5 + i % 4, 10);
  }
  m.perceived_accuracy = 50.0 + i % 7;
  m.expected_ai_accuracy = 60.0 + (i * 3) % 11;
  m.estimated_fake_rate = 30.0 + i % 5;
  m.duration_minutes = minutes;
  return m;
}

}  // namespace

TEST(Analysis, RowsCoverEveryMeasureAndTest) {
  std::vector<MetricsReport> ms;
  for (Condition c : kAllConditions)
    for (int i = 0; i < 8; ++i) ms.push_back(participant(c, i, 0.5 + 0.02 * (i % 4)));
  const AnalysisPlan plan;
  const auto r = analyze_study(ms, plan);
  EXPECT_EQ(r.rows.size(), plan.measures.size() * plan.tests.size());
  EXPECT_EQ(r.correlations.size(), plan.correlations.size());
  EXPECT_EQ(r.sessions_retained, ms.size());
  for (const auto& row : r.rows) {
    if (row.measure == "agreement" || row.measure == "engagement") {
      EXPECT_EQ(row.group_sizes.size(), kAllConditions.size() - 1);
    }
  }
}

TEST(Analysis, PlantedDifferenceIsDetected) {
  std::vector<MetricsReport> ms;
  for (Condition c : kAllConditions)
    for (int i = 0; i < 10; ++i) ms.push_back(participant(c, i, (c == Condition::Baseline ? 0.9 : 0.4) + 0.04 * (i % 3)));
  const auto r = analyze_study(ms, AnalysisPlan{});
  bool anova = false;
  for (const auto& row : r.rows) {
    if (row.measure == "credibility" && row.test == "anova") {
      anova = true;
      EXPECT_LT(row.result.p_value, 0.001);
    }
    if (row.measure == "credibility" && row.test == "tukey") {
      for (const auto& p : row.result.pairwise) {
        EXPECT_EQ(p.reject, p.a == "baseline" || p.b == "baseline") << p.a << " " << p.b;
      }
    }
  }
  EXPECT_TRUE(anova);
}

TEST(Analysis, IdenticalParticipantsShowNothing) {
  std::vector<MetricsReport> ms;
  for (Condition c : kAllConditions)
    for (int i = 0; i < 6; ++i) ms.push_back(participant(c, i, 0.5 + 0.1 * (i % 3)));
  const auto r = analyze_study(ms, AnalysisPlan{});
  for (const auto& row : r.rows) {
    if (row.skipped || row.test == "shapiro") continue;
    EXPECT_GE(row.result.p_value, 0.05) << row.measure << " " << row.test;
    for (const auto& p : row.result.pairwise) EXPECT_FALSE(p.reject);
  }
}

TEST(Analysis, ShortSessionsExcludedAndSkipReasons) {
  std::vector<MetricsReport> ms;
  for (Condition c : kAllConditions) {
    ms.push_back(participant(c, 0, 0.5, 25.0));
    ms.push_back(participant(c, 1, 0.6, 5.0));
  }
  const auto r = analyze_study(ms, AnalysisPlan{});
  EXPECT_EQ(r.excluded.size(), kAllConditions.size());
  EXPECT_EQ(r.sessions_retained, kAllConditions.size());
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.skipped);
    EXPECT_NE(row.reason.find("fewer than 2"), std::string::npos);
  }
  const json j = r.to_json();
  EXPECT_TRUE(j["rows"][0].contains("reason"));
  EXPECT_FALSE(r.summary().empty());
}

TEST(Analysis, UnknownPlan) {
  EXPECT_EQ(error_code([] { AnalysisPlan::by_name("nope"); }), "BAD_PLAN");
}
