#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace testing_support {

/// Brute-force measures recomputed from a raw JSONL event log and the queue
/// records, without going through the session state machine.
struct Recount {
  struct Ratio {
    long num = 0;
    long den = 0;
  };
  Ratio credibility, incredibility, agreement, prediction, engagement;
  double duration_minutes = 0.0;
  long clicks = 0;
};

inline Recount recount(const std::string& event_log_jsonl, const std::vector<nlohmann::json>& queue_records) {
  using nlohmann::json;
  std::map<std::string, std::string> truth, shown;
  for (const auto& r : queue_records) {
    truth[r.at("story_id").get<std::string>()] = r.at("label").get<std::string>();
    shown[r.at("story_id").get<std::string>()] = r.at("displayed_prediction").get<std::string>();
  }
  std::vector<json> events;
  std::istringstream in(event_log_jsonl);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) events.push_back(json::parse(line));
  }
  std::set<std::string> inspected;
  std::vector<std::string> shared, reported;
  Recount r;
  for (const auto& e : events) {
    const std::string kind = e.at("kind");
    const json& p = e.at("payload");
    if (kind == "open_assistant_panel") inspected.insert(p.at("story_id").get<std::string>());
    if (kind == "share") shared.push_back(p.at("story_id"));
    if (kind == "report") reported.push_back(p.at("story_id"));
    if (kind == "popup_answer") {
      ++r.prediction.den;
      r.prediction.num += p.at("guess") == shown.at(p.at("story_id").get<std::string>());
    }
    if (kind == "open_article" || kind == "open_assistant_panel" || kind == "hover_tooltip" || kind == "share" ||
        kind == "report" || kind == "skip") {
      ++r.clicks;
    }
  }
  for (const auto& id : shared) {
    ++r.credibility.den;
    r.credibility.num += truth.at(id) == "true";
  }
  for (const auto& id : reported) {
    ++r.incredibility.den;
    r.incredibility.num += truth.at(id) == "fake";
  }
  for (const auto& id : shared) {
    ++r.agreement.den;
    ++r.engagement.den;
    r.engagement.num += inspected.count(id);
    r.agreement.num += inspected.count(id) && shown.at(id) == "true";
  }
  for (const auto& id : reported) {
    ++r.agreement.den;
    ++r.engagement.den;
    r.engagement.num += inspected.count(id);
    r.agreement.num += inspected.count(id) && shown.at(id) == "fake";
  }
  if (!events.empty()) {
    r.duration_minutes =
        static_cast<double>(events.back().at("timestamp").get<long long>() - events.front().at("timestamp").get<long long>()) /
        60000.0;
  }
  return r;
}

}  // namespace testing_support
