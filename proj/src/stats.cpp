#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "xaifn/stats.hpp"

namespace xaifn::stats {

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_groups(const std::vector<Group>& groups) {
  if (groups.size() < 2) throw Error("TOO_FEW_GROUPS", "need at least 2 groups");
  for (const auto& g : groups) {
    if (g.values.size() < 2) throw Error("GROUP_TOO_SMALL", "group " + g.name + " has fewer than 2 values");
    for (double x : g.values) {
      if (!std::isfinite(x)) throw Error("NON_FINITE", "group " + g.name + " has a non-finite value");
    }
  }
}

struct Anova {
  double ss_between = 0.0;
  double ss_within = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double ms_within() const { return ss_within / df_within; }
};

Anova sums_of_squares(const std::vector<Group>& groups) {
  Anova a;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    total += std::accumulate(g.values.begin(), g.values.end(), 0.0);
    n += g.values.size();
  }
  const double grand = total / static_cast<double>(n);
  for (const auto& g : groups) {
    const double m = mean(g.values);
    a.ss_between += static_cast<double>(g.values.size()) * (m - grand) * (m - grand);
    for (double x : g.values) a.ss_within += (x - m) * (x - m);
  }
  a.df_between = static_cast<double>(groups.size() - 1);
  a.df_within = static_cast<double>(n - groups.size());
  return a;
}

double poly(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

}  // namespace

json StatsResult::to_json() const {
  json rows = json::array();
  for (const auto& r : pairwise) {
    rows.push_back({{"a", r.a},
                    {"b", r.b},
                    {"mean_difference", r.mean_difference},
                    {"q", r.q},
                    {"p_value", r.p_value},
                    {"reject", r.reject}});
  }
  json j = {{"test", test}, {"statistic", statistic}, {"df", df}, {"p_value", p_value}};
  if (!pairwise.empty()) j["pairwise"] = rows;
  return j;
}

StatsResult anova_oneway(const std::vector<Group>& groups) {
  check_groups(groups);
  const Anova a = sums_of_squares(groups);
  StatsResult r;
  r.test = "anova";
  r.df = {a.df_between, a.df_within};
  const double msb = a.ss_between / a.df_between;
  if (a.ss_within == 0.0) {
    // No within-group spread: identical means give F = 0, otherwise F is unbounded.
    r.statistic = msb == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = msb == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = msb / a.ms_within();
  r.p_value = f_sf(r.statistic, a.df_between, a.df_within);
  return r;
}

StatsResult tukey_hsd(const std::vector<Group>& groups, double alpha) {
  check_groups(groups);
  const Anova a = sums_of_squares(groups);
  const double k = static_cast<double>(groups.size());
  StatsResult r;
  r.test = "tukey";
  r.df = {k, a.df_within};
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseRow row;
      row.a = groups[i].name;
      row.b = groups[j].name;
      row.mean_difference = mean(groups[j].values) - mean(groups[i].values);
      const double se = std::sqrt(a.ms_within() / 2.0 *
                                  (1.0 / static_cast<double>(groups[i].values.size()) +
                                   1.0 / static_cast<double>(groups[j].values.size())));
      if (se == 0.0) {
        row.q = row.mean_difference == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      } else {
        row.q = std::abs(row.mean_difference) / se;
      }
      row.p_value = std::clamp(1.0 - ptukey(row.q, k, a.df_within), 0.0, 1.0);
      row.reject = row.p_value < alpha;
      r.pairwise.push_back(row);
    }
  }
  // Summary statistic: the smallest pairwise p-value.
  r.p_value = 1.0;
  for (const auto& row : r.pairwise) r.p_value = std::min(r.p_value, row.p_value);
  r.statistic = 0.0;
  for (const auto& row : r.pairwise) r.statistic = std::max(r.statistic, row.q);
  return r;
}

StatsResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("LENGTH_MISMATCH", "pearson inputs differ in length");
  if (x.size() < 3) throw Error("TOO_FEW_VALUES", "pearson needs at least 3 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("CONSTANT_INPUT", "constant input");
  StatsResult res;
  res.test = "pearson";
  const double n = static_cast<double>(x.size());
  res.df = {n - 2.0};
  res.statistic = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double r = res.statistic;
  if (std::abs(r) == 1.0) {
    res.p_value = 0.0;
  } else {
    res.p_value = t_two_sided(r * std::sqrt((n - 2.0) / (1.0 - r * r)), n - 2.0);
  }
  return res;
}

StatsResult shapiro_wilk(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 3 || n > 5000) throw Error("BAD_SAMPLE_SIZE", "shapiro_wilk needs 3 <= n <= 5000");
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw Error("CONSTANT_INPUT", "constant input");

  // Royston's approximation to the expected normal order statistic weights.
  static const double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static const double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static const double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static const double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static const double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static const double c6[] = {-0.4803, -0.082676, 0.0030302};
  static const double g[] = {-2.273, 0.459};

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  std::vector<double> a(half + 1, 0.0);  // 1-based
  boost::math::normal_distribution<> norm;
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half + 1, 0.0);
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= half; ++i) {
      m[i] = boost::math::quantile(norm, (static_cast<double>(i) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[1] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 3;
      const double a2 = -m[2] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      first = 2;
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = first; i <= half; ++i) a[i] = -m[i] / fac;
  }

  const double mu = mean(x);
  double ssq = 0.0;
  for (double v : x) ssq += (v - mu) * (v - mu);
  double num = 0.0;
  for (std::size_t i = 1; i <= half; ++i) num += a[i] * (x[n - i] - x[i - 1]);
  double w = std::min(1.0, num * num / ssq);

  StatsResult r;
  r.test = "shapiro";
  r.statistic = w;
  r.df = {an};
  if (n == 3) {
    const double pi6 = 6.0 / M_PI;
    const double stqr = M_PI / 3.0;
    r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return r;
  }
  double w1 = std::log(1.0 - w);
  double m, s;
  if (w >= 1.0) {
    r.p_value = 1.0;
    return r;
  }
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (w1 >= gamma) {
      r.p_value = 0.0;
      return r;
    }
    w1 = -std::log(gamma - w1);
    m = poly(c3, 4, an);
    s = std::exp(poly(c4, 4, an));
  } else {
    const double xx = std::log(an);
    m = poly(c5, 4, xx);
    s = std::exp(poly(c6, 3, xx));
  }
  r.p_value = std::clamp(normal_sf((w1 - m) / s), 0.0, 1.0);
  return r;
}

std::vector<Group> absolute_deviations(const std::vector<Group>& groups, LeveneCenter center) {
  std::vector<Group> out;
  for (const auto& g : groups) {
    const double c = center == LeveneCenter::Mean ? mean(g.values) : median(g.values);
    Group d{g.name, {}};
    for (double x : g.values) d.values.push_back(std::abs(x - c));
    out.push_back(std::move(d));
  }
  return out;
}

StatsResult levene(const std::vector<Group>& groups, LeveneCenter center) {
  check_groups(groups);
  StatsResult r = anova_oneway(absolute_deviations(groups, center));
  r.test = center == LeveneCenter::Mean ? "levene" : "brown_forsythe";
  return r;
}

}  // namespace xaifn::stats
