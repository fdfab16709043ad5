#include "xaifn/metrics.hpp"

#include <algorithm>
#include <map>

namespace xaifn {

namespace {

std::map<std::string, const QueueItem*> items_by_id(const Session& s) {
  std::map<std::string, const QueueItem*> out;
  for (const auto& item : s.queue().items) out.emplace(item.story_id, &item);
  return out;
}

const QueueItem& lookup(const std::map<std::string, const QueueItem*>& items, const std::string& id) {
  auto it = items.find(id);
  if (it == items.end()) throw Error("BAD_EVENT", "story " + id + " is not in the session queue");
  return *it->second;
}

void require_assistant(const Session& s) {
  if (s.state().condition == Condition::Baseline) {
    throw Error("NO_ASSISTANT", "no assistant in baseline");
  }
}

std::optional<double> survey_value(const json& answers, const char* key) {
  if (answers.contains(key) && answers.at(key).is_number()) return answers.at(key).get<double>();
  return std::nullopt;
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json rate_to_json(const Rate& r) {
  return {{"value", optional_to_json(r.value)}, {"numerator", r.numerator}, {"denominator", r.denominator}};
}

Rate rate_from_json(const json& j) {
  return Rate::of(j.at("numerator").get<std::int64_t>(), j.at("denominator").get<std::int64_t>());
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "credibility",         "incredibility",        "agreement",           "prediction_task_accuracy",
      "engagement",          "perceived_accuracy",   "expected_ai_accuracy", "estimated_fake_rate",
      "duration_minutes",    "click_count"};
  return names;
}

std::optional<double> MetricsReport::measure(std::string_view name) const {
  if (name == "credibility") return credibility.value;
  if (name == "incredibility") return incredibility.value;
  if (name == "agreement") return agreement.value;
  if (name == "prediction_task_accuracy") return prediction_task_accuracy.value;
  if (name == "engagement") return engagement.value;
  if (name == "perceived_accuracy") return perceived_accuracy;
  if (name == "expected_ai_accuracy") return expected_ai_accuracy;
  if (name == "estimated_fake_rate") return estimated_fake_rate;
  if (name == "duration_minutes") return duration_minutes;
  if (name == "click_count") return static_cast<double>(click_count);
  return std::nullopt;
}

Rate credibility_score(const Session& s) {
  const auto items = items_by_id(s);
  std::int64_t truthful = 0;
  for (const auto& sh : s.state().shared) {
    if (lookup(items, sh.story_id).label == Label::True) ++truthful;
  }
  return Rate::of(truthful, static_cast<std::int64_t>(s.state().shared.size()));
}

Rate incredibility_score(const Session& s) {
  const auto items = items_by_id(s);
  std::int64_t fake = 0;
  for (const auto& id : s.state().reported) {
    if (lookup(items, id).label == Label::Fake) ++fake;
  }
  return Rate::of(fake, static_cast<std::int64_t>(s.state().reported.size()));
}

Rate agreement_rate(const Session& s) {
  require_assistant(s);
  const auto items = items_by_id(s);
  const auto& st = s.state();
  std::int64_t agreed = 0;
  for (const auto& sh : st.shared) {
    if (st.inspected.count(sh.story_id) && lookup(items, sh.story_id).displayed_prediction == Label::True) ++agreed;
  }
  for (const auto& id : st.reported) {
    if (st.inspected.count(id) && lookup(items, id).displayed_prediction == Label::Fake) ++agreed;
  }
  return Rate::of(agreed, static_cast<std::int64_t>(st.shared.size() + st.reported.size()));
}

Rate prediction_task_accuracy(const Session& s) {
  const auto& popups = s.state().popups;
  const auto correct = std::count_if(popups.begin(), popups.end(), [](const PopupRecord& p) { return p.correct(); });
  return Rate::of(correct, static_cast<std::int64_t>(popups.size()));
}

Rate engagement_rate(const Session& s) {
  require_assistant(s);
  const auto& st = s.state();
  std::int64_t opened = 0;
  for (const auto& sh : st.shared) opened += st.inspected.count(sh.story_id) ? 1 : 0;
  for (const auto& id : st.reported) opened += st.inspected.count(id) ? 1 : 0;
  return Rate::of(opened, static_cast<std::int64_t>(st.shared.size() + st.reported.size()));
}

MetricsReport build_report(const Session& s) {
  const auto& st = s.state();
  if (!s.complete()) throw Error("SESSION_INCOMPLETE", st.session_id + ": session is not complete");
  MetricsReport r;
  r.session_id = st.session_id;
  r.condition = st.condition;
  r.credibility = credibility_score(s);
  r.incredibility = incredibility_score(s);
  r.prediction_task_accuracy = prediction_task_accuracy(s);
  if (st.condition != Condition::Baseline) {
    r.agreement = agreement_rate(s);
    r.engagement = engagement_rate(s);
  }
  r.perceived_accuracy = survey_value(st.post_survey, "perceived_accuracy");
  r.expected_ai_accuracy = survey_value(st.pre_survey, "expected_ai_accuracy");
  r.estimated_fake_rate = survey_value(st.pre_survey, "estimated_fake_rate");
  if (!st.events.empty()) {
    r.duration_minutes =
        static_cast<double>(st.events.back().timestamp_ms - st.events.front().timestamp_ms) / 60000.0;
  }
  for (const auto& e : st.events) {
    switch (e.kind) {
      case EventKind::OpenArticle:
      case EventKind::OpenAssistantPanel:
      case EventKind::HoverTooltip:
      case EventKind::Share:
      case EventKind::Report:
      case EventKind::Skip:
        ++r.click_count;
        break;
      default:
        break;
    }
  }
  r.shared = st.shared.size();
  r.reported = st.reported.size();
  r.skipped = st.skipped.size();
  return r;
}

json MetricsReport::to_json() const {
  return {{"session_id", session_id},
          {"condition", to_string(condition)},
          {"credibility", rate_to_json(credibility)},
          {"incredibility", rate_to_json(incredibility)},
          {"agreement", rate_to_json(agreement)},
          {"prediction_task_accuracy", rate_to_json(prediction_task_accuracy)},
          {"engagement", rate_to_json(engagement)},
          {"perceived_accuracy", optional_to_json(perceived_accuracy)},
          {"expected_ai_accuracy", optional_to_json(expected_ai_accuracy)},
          {"estimated_fake_rate", optional_to_json(estimated_fake_rate)},
          {"duration_minutes", duration_minutes},
          {"click_count", click_count},
          {"shared", shared},
          {"reported", reported},
          {"skipped", skipped}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  try {
    r.session_id = j.at("session_id").get<std::string>();
    r.condition = parse_condition(j.at("condition").get<std::string>());
    r.credibility = rate_from_json(j.at("credibility"));
    r.incredibility = rate_from_json(j.at("incredibility"));
    r.agreement = rate_from_json(j.at("agreement"));
    r.prediction_task_accuracy = rate_from_json(j.at("prediction_task_accuracy"));
    r.engagement = rate_from_json(j.at("engagement"));
    r.perceived_accuracy = optional_from_json(j, "perceived_accuracy");
    r.expected_ai_accuracy = optional_from_json(j, "expected_ai_accuracy");
    r.estimated_fake_rate = optional_from_json(j, "estimated_fake_rate");
    r.duration_minutes = j.at("duration_minutes").get<double>();
    r.click_count = j.at("click_count").get<std::int64_t>();
    r.shared = j.value("shared", std::size_t{0});
    r.reported = j.value("reported", std::size_t{0});
    r.skipped = j.value("skipped", std::size_t{0});
  } catch (const json::exception& e) {
    throw Error("MALFORMED_RECORD", std::string("metrics record: ") + e.what());
  }
  return r;
}

}  // namespace xaifn
