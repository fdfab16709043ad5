#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xaifn/study.hpp"

namespace xaifn {

/// Per-participant measures. Rates keep their numerator and denominator; a
/// zero denominator leaves the value undefined rather than 0.
struct MetricsReport {
  std::string session_id;
  Condition condition = Condition::Baseline;
  Rate credibility;
  Rate incredibility;
  Rate agreement;
  Rate prediction_task_accuracy;
  Rate engagement;
  std::optional<double> perceived_accuracy;
  std::optional<double> expected_ai_accuracy;
  std::optional<double> estimated_fake_rate;
  double duration_minutes = 0.0;
  std::int64_t click_count = 0;
  std::size_t shared = 0;
  std::size_t reported = 0;
  std::size_t skipped = 0;

  json to_json() const;
  static MetricsReport from_json(const json& j);
  /// Value of a named measure, empty when undefined or unknown.
  std::optional<double> measure(std::string_view name) const;
};

/// Names accepted by MetricsReport::measure.
const std::vector<std::string>& metric_names();

Rate credibility_score(const Session& session);
Rate incredibility_score(const Session& session);
/// Throws NO_ASSISTANT for baseline sessions.
Rate agreement_rate(const Session& session);
Rate prediction_task_accuracy(const Session& session);
/// Throws NO_ASSISTANT for baseline sessions.
Rate engagement_rate(const Session& session);

/// Requires a completed session (SESSION_INCOMPLETE otherwise).
MetricsReport build_report(const Session& session);

json rate_to_json(const Rate& r);
Rate rate_from_json(const json& j);

}  // namespace xaifn
