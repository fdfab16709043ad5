#pragma once

#include <string>
#include <vector>

#include "xaifn/metrics.hpp"
#include "xaifn/stats.hpp"

namespace xaifn {

struct AnalysisPlan {
  std::vector<std::string> measures = {"credibility", "incredibility", "agreement",
                                       "prediction_task_accuracy", "engagement", "perceived_accuracy"};
  std::vector<std::string> tests = {"shapiro", "levene", "anova", "tukey"};
  std::vector<std::pair<std::string, std::string>> correlations = {
      {"expected_ai_accuracy", "perceived_accuracy"},
      {"estimated_fake_rate", "engagement"},
      {"engagement", "prediction_task_accuracy"},
      {"engagement", "agreement"},
      {"prediction_task_accuracy", "perceived_accuracy"},
      {"prediction_task_accuracy", "agreement"},
      {"prediction_task_accuracy", "credibility"},
      {"prediction_task_accuracy", "incredibility"},
      {"perceived_accuracy", "agreement"},
  };
  double min_duration_minutes = 10.0;
  double alpha = 0.05;
  stats::LeveneCenter levene_center = stats::LeveneCenter::Mean;

  static AnalysisPlan by_name(std::string_view name);
  json to_json() const;
};

struct AnalysisRow {
  std::string measure;
  std::string test;
  bool skipped = false;
  std::string reason;
  stats::StatsResult result;
  std::vector<std::pair<std::string, std::size_t>> group_sizes;
};

struct CorrelationRow {
  std::string x;
  std::string y;
  std::size_t n = 0;
  bool skipped = false;
  std::string reason;
  stats::StatsResult result;
};

struct AnalysisReport {
  AnalysisPlan plan;
  std::size_t sessions_in = 0;
  std::size_t sessions_retained = 0;
  std::vector<std::string> excluded;  // session ids under the duration threshold
  std::vector<AnalysisRow> rows;
  std::vector<CorrelationRow> correlations;

  json to_json() const;
  std::string summary() const;
};

/// Conditions with no defined value for a measure are left out of its tests
/// (agreement and engagement do not exist in the baseline). A remaining
/// condition with fewer than 2 values skips the test with a reason.
AnalysisReport analyze_study(const std::vector<MetricsReport>& metrics, const AnalysisPlan& plan);

}  // namespace xaifn
