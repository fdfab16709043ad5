#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "xaifn/gbdt.hpp"

using namespace xaifn;

namespace {

struct Data {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
};

Data step_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r = {u(rng), u(rng), u(rng)};
    d.y.push_back((r[0] > 0.5 ? 1.0 : 0.0) + 0.5 * (r[1] > 0.3 ? 1.0 : 0.0));
    d.rows.push_back(r);
  }
  return d;
}

double mse(const GradientBoostedTrees& m, const Data& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) s += std::pow(m.predict(d.rows[i]) - d.y[i], 2);
  return s / static_cast<double>(d.rows.size());
}

}  // namespace

TEST(Gbdt, FitsStepFunction) {
  const Data d = step_data(400, 1);
  GradientBoostedTrees m(GbdtConfig{});
  m.fit(d.rows, d.y);
  EXPECT_EQ(m.tree_count(), 60u);
  EXPECT_LT(mse(m, d), 0.01);
  EXPECT_LT(mse(m, step_data(200, 2)), 0.02);
  EXPECT_EQ(m.features_used().count(0), 1u);
  EXPECT_EQ(m.features_used().count(1), 1u);
}

TEST(Gbdt, EmptyPrefixIsBaseScore) {
  const Data d = step_data(100, 3);
  GbdtConfig c;
  c.n_trees = 12;
  GradientBoostedTrees m(c);
  m.fit(d.rows, d.y);
  const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / static_cast<double>(d.y.size());
  EXPECT_NEAR(m.base_score(), mean, 1e-12);
  for (const auto& r : d.rows) {
    EXPECT_DOUBLE_EQ(m.predict_prefix(r, 0), m.base_score());
    EXPECT_DOUBLE_EQ(m.predict_prefix(r, 12), m.predict(r));
  }
}

TEST(Gbdt, PrefixErrorDoesNotIncrease) {
  const Data d = step_data(300, 4);
  GradientBoostedTrees m(GbdtConfig{});
  m.fit(d.rows, d.y);
  double prev = 1e300;
  for (std::size_t t = 0; t <= m.tree_count(); t += 10) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.rows.size(); ++i) s += std::pow(m.predict_prefix(d.rows[i], t) - d.y[i], 2);
    EXPECT_LE(s, prev + 1e-9);
    prev = s;
  }
}

TEST(Gbdt, DeterministicAndJsonRoundTrip) {
  const Data d = step_data(150, 5);
  GradientBoostedTrees a(GbdtConfig{}), b(GbdtConfig{});
  a.fit(d.rows, d.y);
  b.fit(d.rows, d.y);
  EXPECT_EQ(a.to_json(), b.to_json());
  const auto c = GradientBoostedTrees::from_json(a.to_json());
  for (const auto& r : d.rows) EXPECT_DOUBLE_EQ(c.predict(r), a.predict(r));
}

TEST(Gbdt, BadInputsRejected) {
  GradientBoostedTrees m(GbdtConfig{});
  try {
    m.fit({}, std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "BAD_TRAINING_DATA");
  }
  GbdtConfig bad;
  bad.n_trees = -1;
  GradientBoostedTrees z(bad);
  try {
    z.fit({{1.0}}, std::vector<double>{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "BAD_CONFIG");
  }
  const Data d = step_data(20, 6);
  m.fit(d.rows, d.y);
  try {
    m.predict(std::vector<double>{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "SHAPE");
  }
}
