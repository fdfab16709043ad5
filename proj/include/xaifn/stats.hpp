#pragma once

#include <string>
#include <vector>

#include "xaifn/common.hpp"

namespace xaifn::stats {

// Distribution tails.
double normal_sf(double z);
/// P(F > f) for F(d1, d2).
double f_sf(double f, double d1, double d2);
double f_quantile(double p, double d1, double d2);
/// Two-sided P(|T| > |t|) for Student t with df degrees of freedom.
double t_two_sided(double t, double df);
/// CDF of the studentized range for k means and df error degrees of freedom.
/// df = infinity gives the range of k standard normals.
double ptukey(double q, double k, double df);
/// q such that ptukey(q, k, df) = p.
double qtukey(double p, double k, double df);

struct PairwiseRow {
  std::string a;
  std::string b;
  double mean_difference = 0.0;  // mean(b) - mean(a)
  double q = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

struct StatsResult {
  std::string test;
  double statistic = 0.0;
  std::vector<double> df;
  double p_value = 1.0;
  std::vector<PairwiseRow> pairwise;

  json to_json() const;
};

struct Group {
  std::string name;
  std::vector<double> values;
};

StatsResult anova_oneway(const std::vector<Group>& groups);
StatsResult tukey_hsd(const std::vector<Group>& groups, double alpha = 0.05);
StatsResult pearson(const std::vector<double>& x, const std::vector<double>& y);
StatsResult shapiro_wilk(std::vector<double> values);

enum class LeveneCenter { Mean, Median };
StatsResult levene(const std::vector<Group>& groups, LeveneCenter center = LeveneCenter::Mean);

/// Absolute deviations from each group's center; levene() is anova_oneway() over these.
std::vector<Group> absolute_deviations(const std::vector<Group>& groups, LeveneCenter center);

}  // namespace xaifn::stats
