#include <algorithm>
#include <random>

#include "xaifn/study.hpp"

namespace xaifn {

namespace {

const std::vector<std::pair<EventKind, const char*>>& kind_names() {
  static const std::vector<std::pair<EventKind, const char*>> names = {
      {EventKind::InstructionsDone, "instructions_done"},
      {EventKind::ViewStory, "view_story"},
      {EventKind::OpenArticle, "open_article"},
      {EventKind::OpenAssistantPanel, "open_assistant_panel"},
      {EventKind::HoverTooltip, "hover_tooltip"},
      {EventKind::Share, "share"},
      {EventKind::Report, "report"},
      {EventKind::Skip, "skip"},
      {EventKind::PopupAnswer, "popup_answer"},
      {EventKind::SurveyAnswer, "survey_answer"},
  };
  return names;
}

std::string story_of(const SessionEvent& e) {
  if (!e.payload.contains("story_id") || !e.payload.at("story_id").is_string()) {
    throw Error("BAD_EVENT", to_string(e.kind) + " event needs a story_id");
  }
  return e.payload.at("story_id").get<std::string>();
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Instructions:
      return "instructions";
    case Phase::PreSurvey:
      return "pre_survey";
    case Phase::Reviewing:
      return "reviewing";
    case Phase::PostSurvey:
      return "post_survey";
    case Phase::Done:
      return "done";
  }
  return "?";
}

std::string to_string(EventKind k) {
  for (const auto& [kind, name] : kind_names()) {
    if (kind == k) return name;
  }
  return "?";
}

EventKind parse_event_kind(std::string_view name) {
  for (const auto& [kind, n] : kind_names()) {
    if (name == n) return kind;
  }
  throw Error("BAD_EVENT", "unknown event kind \"" + std::string(name) + "\"");
}

json SessionEvent::to_json() const {
  return {{"timestamp", timestamp_ms}, {"kind", to_string(kind)}, {"payload", payload}};
}

SessionEvent SessionEvent::from_json(const json& j) {
  if (!j.is_object() || !j.contains("timestamp") || !j.contains("kind")) {
    throw Error("BAD_EVENT", "event record needs timestamp and kind: " + j.dump());
  }
  SessionEvent e;
  e.timestamp_ms = j.at("timestamp").get<std::int64_t>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.payload = j.value("payload", json::object());
  return e;
}

json SessionState::to_json() const {
  json shared_j = json::array();
  for (const auto& s : shared) shared_j.push_back({{"story_id", s.story_id}, {"article_ids", s.article_ids}});
  json popups_j = json::array();
  for (const auto& p : popups) {
    popups_j.push_back({{"story_id", p.story_id},
                        {"share_level", p.share_level},
                        {"guess", to_string(p.guess)},
                        {"displayed", to_string(p.displayed)}});
  }
  json events_j = json::array();
  for (const auto& e : events) events_j.push_back(e.to_json());
  return {{"session_id", session_id},
          {"condition", to_string(condition)},
          {"phase", to_string(phase)},
          {"cursor", cursor},
          {"shared", shared_j},
          {"reported", reported},
          {"skipped", skipped},
          {"popups", popups_j},
          {"inspected", inspected},
          {"pre_survey", pre_survey},
          {"post_survey", post_survey},
          {"events", events_j}};
}

json clamp_survey(const json& answers) {
  if (!answers.is_object()) throw Error("BAD_SURVEY", "survey answers must be an object");
  json out = answers;
  for (const char* key : {"expected_ai_accuracy", "estimated_fake_rate", "perceived_accuracy"}) {
    if (!out.contains(key)) continue;
    if (!out[key].is_number()) throw Error("BAD_SURVEY", std::string(key) + " must be a number");
    out[key] = std::clamp(out[key].get<double>(), 0.0, 100.0);
  }
  return out;
}

Session::Session(std::string session_id, Condition condition,
                 std::shared_ptr<const CuratedQueue> queue)
    : queue_(std::move(queue)) {
  if (!queue_) throw Error("BAD_QUEUE", "session needs a queue");
  state_.session_id = std::move(session_id);
  state_.condition = condition;
}

Session Session::replay(std::string session_id, Condition condition,
                        std::shared_ptr<const CuratedQueue> queue,
                        const std::vector<SessionEvent>& events) {
  Session s(std::move(session_id), condition, std::move(queue));
  for (const auto& e : events) s.apply(e);
  return s;
}

void Session::extend_queue(std::shared_ptr<const CuratedQueue> longer) {
  if (!longer || longer->items.size() < queue_->items.size() ||
      !std::equal(queue_->items.begin(), queue_->items.end(), longer->items.begin())) {
    throw Error("BAD_QUEUE", "replacement queue must extend the current one");
  }
  queue_ = std::move(longer);
}

const QueueItem* Session::current_item() const {
  if (state_.phase != Phase::Reviewing || state_.cursor >= queue_->items.size()) return nullptr;
  return &queue_->items[state_.cursor];
}

bool Session::decided(const std::string& id) const {
  auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), id) != v.end(); };
  return in(state_.reported) || in(state_.skipped) ||
         std::any_of(state_.shared.begin(), state_.shared.end(),
                     [&](const SharedStory& s) { return s.story_id == id; });
}

std::optional<Popup> Session::next_popup() const {
  const QueueItem* item = current_item();
  if (!item) return std::nullopt;
  const std::size_t level = state_.shared.size();
  if (level < kFirstPopupShare || level >= kRequiredShares) return std::nullopt;
  for (const auto& p : state_.popups) {
    if (p.share_level == level) return std::nullopt;
  }
  Popup p;
  p.story_id = item->story_id;
  p.share_level = level;
  return p;
}

void Session::require_phase(Phase p, const SessionEvent& e) const {
  if (state_.phase == Phase::Done) {
    throw Error("SESSION_COMPLETE", "session is complete; " + to_string(e.kind) + " rejected");
  }
  if (state_.phase != p) {
    throw Error("WRONG_PHASE", to_string(e.kind) + " not allowed in phase " + to_string(state_.phase));
  }
}

const QueueItem& Session::require_current(const SessionEvent& e) const {
  const std::string id = story_of(e);
  const QueueItem* item = current_item();
  if (!item) throw Error("QUEUE_EXHAUSTED", "no story left in the queue");
  if (item->story_id != id) {
    if (decided(id)) throw Error("ALREADY_DECIDED", "story " + id + " was already decided");
    throw Error("NOT_CURRENT_STORY", "story " + id + " is not the current story");
  }
  return *item;
}

void Session::decide(const SessionEvent& e) {
  require_phase(Phase::Reviewing, e);
  const QueueItem& item = require_current(e);
  if (next_popup()) throw Error("POPUP_PENDING", "answer the popup question first");
  if (e.kind == EventKind::Share) {
    std::vector<std::string> ids;
    if (e.payload.contains("article_ids")) ids = e.payload.at("article_ids").get<std::vector<std::string>>();
    if (ids.empty()) throw Error("ARTICLE_REQUIRED", "article selection required to share");
    for (const auto& a : ids) {
      if (std::find(item.article_ids.begin(), item.article_ids.end(), a) == item.article_ids.end()) {
        throw Error("UNKNOWN_ARTICLE", "article " + a + " does not belong to story " + item.story_id);
      }
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw Error("BAD_EVENT", "duplicate article in selection");
    }
    state_.shared.push_back({item.story_id, std::move(ids)});
  } else if (e.kind == EventKind::Report) {
    state_.reported.push_back(item.story_id);
  } else {
    state_.skipped.push_back(item.story_id);
  }
  ++state_.cursor;
  if (state_.shared.size() == kRequiredShares) state_.phase = Phase::PostSurvey;
}

void Session::apply(const SessionEvent& e) {
  if (!state_.events.empty() && e.timestamp_ms < state_.events.back().timestamp_ms) {
    throw Error("NON_MONOTONIC_TIME", "event timestamp precedes the previous event");
  }
  if (!e.payload.is_object()) throw Error("BAD_EVENT", "event payload must be an object");
  switch (e.kind) {
    case EventKind::InstructionsDone:
      require_phase(Phase::Instructions, e);
      state_.phase = Phase::PreSurvey;
      break;
    case EventKind::SurveyAnswer: {
      const std::string stage = e.payload.value("stage", "");
      const json answers = clamp_survey(e.payload.value("answers", json::object()));
      if (stage == "pre") {
        require_phase(Phase::PreSurvey, e);
        state_.pre_survey = answers;
        state_.phase = Phase::Reviewing;
      } else if (stage == "post") {
        require_phase(Phase::PostSurvey, e);
        state_.post_survey = answers;
        state_.phase = Phase::Done;
      } else {
        throw Error("BAD_SURVEY", "survey stage must be \"pre\" or \"post\"");
      }
      break;
    }
    case EventKind::ViewStory:
    case EventKind::OpenArticle:
    case EventKind::HoverTooltip:
      require_phase(Phase::Reviewing, e);
      require_current(e);
      if (e.kind == EventKind::HoverTooltip && state_.condition == Condition::Baseline) {
        throw Error("NO_ASSISTANT", "no assistant in baseline");
      }
      break;
    case EventKind::OpenAssistantPanel: {
      require_phase(Phase::Reviewing, e);
      const QueueItem& item = require_current(e);
      if (state_.condition == Condition::Baseline) throw Error("NO_ASSISTANT", "no assistant in baseline");
      if (next_popup()) throw Error("POPUP_PENDING", "answer the popup question first");
      state_.inspected.insert(item.story_id);
      break;
    }
    case EventKind::Share:
    case EventKind::Report:
    case EventKind::Skip:
      decide(e);
      break;
    case EventKind::PopupAnswer: {
      require_phase(Phase::Reviewing, e);
      const QueueItem& item = require_current(e);
      const auto popup = next_popup();
      if (!popup) throw Error("NO_POPUP", "no popup question is pending");
      PopupRecord r;
      r.story_id = item.story_id;
      r.share_level = popup->share_level;
      r.guess = parse_label(e.payload.value("guess", ""));
      r.displayed = item.displayed_prediction;
      state_.popups.push_back(r);
      break;
    }
  }
  state_.events.push_back(e);
}

// ---------------------------------------------------------------- simulant

SimulantPolicy SimulantPolicy::parse(std::string_view name) {
  SimulantPolicy p;
  const std::string s(name);
  if (s == "compliant") {
    p.kind = PolicyKind::Compliant;
  } else if (s == "contrarian") {
    p.kind = PolicyKind::Contrarian;
  } else if (s.rfind("independent", 0) == 0) {
    p.kind = PolicyKind::Independent;
    if (s.size() > 11) {
      if (s[11] != ':') throw Error("BAD_POLICY", "expected independent:<p>");
      p.p_agree = std::stod(s.substr(12));
      if (!(p.p_agree >= 0.0 && p.p_agree <= 1.0)) throw Error("BAD_POLICY", "p_agree must lie in [0, 1]");
    }
  } else {
    throw Error("BAD_POLICY", "unknown policy \"" + s + "\"");
  }
  return p;
}

std::string SimulantPolicy::name() const {
  switch (kind) {
    case PolicyKind::Compliant:
      return "compliant";
    case PolicyKind::Contrarian:
      return "contrarian";
    case PolicyKind::Independent:
      return "independent:" + json(p_agree).dump();
  }
  return "?";
}

Session simulate_participant(std::shared_ptr<const CuratedQueue> queue, Condition condition,
                             const SimulantPolicy& policy, std::uint64_t seed,
                             const std::string& session_id) {
  Session session(session_id, condition, queue);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::int64_t now = 1'700'000'000'000 + static_cast<std::int64_t>(seed % 1'000'000) * 1000;
  auto tick = [&](int lo_s, int hi_s) {
    now += 1000 * std::uniform_int_distribution<std::int64_t>(lo_s, hi_s)(rng);
    return now;
  };
  auto emit = [&](EventKind kind, json payload, int lo_s = 2, int hi_s = 20) {
    session.apply({tick(lo_s, hi_s), kind, std::move(payload)});
  };
  const bool assistant = condition_spec(condition).shows_prediction;
  const bool explains = !condition_spec(condition).explanation_set.empty();

  emit(EventKind::InstructionsDone, json::object(), 20, 60);
  emit(EventKind::SurveyAnswer,
       {{"stage", "pre"},
        {"answers",
         {{"expected_ai_accuracy", std::uniform_int_distribution<int>(40, 100)(rng)},
          {"estimated_fake_rate", std::uniform_int_distribution<int>(10, 90)(rng)}}}},
       30, 90);

  std::optional<Label> previous_displayed;
  while (!session.complete() && session.state().phase == Phase::Reviewing) {
    const QueueItem* item = session.current_item();
    if (!item) {
      throw Error("QUEUE_EXHAUSTED", session_id + ": queue ended after " +
                                         std::to_string(session.state().shared.size()) + " shares");
    }
    const json sid = {{"story_id", item->story_id}};
    emit(EventKind::ViewStory, sid, 5, 40);
    if (auto popup = session.next_popup()) {
      Label guess = item->displayed_prediction;
      if (policy.guess == SimulantPolicy::Guess::PreviousDisplayed) {
        guess = previous_displayed.value_or(Label::True);
      } else if (policy.guess == SimulantPolicy::Guess::Random) {
        guess = u(rng) < 0.5 ? Label::True : Label::Fake;
      }
      emit(EventKind::PopupAnswer, {{"story_id", item->story_id}, {"guess", to_string(guess)}}, 3, 15);
    }
    for (const auto& a : item->article_ids) {
      if (u(rng) < 0.5) emit(EventKind::OpenArticle, {{"story_id", item->story_id}, {"article_id", a}}, 5, 60);
    }
    bool opened = false;
    if (assistant) {
      opened = policy.kind != PolicyKind::Independent || u(rng) < policy.panel_open_prob;
      if (opened) {
        emit(EventKind::OpenAssistantPanel, sid, 2, 10);
        if (explains && u(rng) < 0.5) emit(EventKind::HoverTooltip, sid, 1, 5);
      }
    }
    previous_displayed = item->displayed_prediction;

    bool share_it = false;
    switch (policy.kind) {
      case PolicyKind::Compliant:
        share_it = item->displayed_prediction == Label::True;
        break;
      case PolicyKind::Contrarian:
        share_it = item->displayed_prediction == Label::Fake;
        break;
      case PolicyKind::Independent: {
        const bool agree = u(rng) < policy.p_agree;
        share_it = (item->displayed_prediction == Label::True) == agree;
        break;
      }
    }
    if (policy.skip_prob > 0.0 && u(rng) < policy.skip_prob) {
      emit(EventKind::Skip, sid);
    } else if (share_it && !item->article_ids.empty()) {
      emit(EventKind::Share, {{"story_id", item->story_id}, {"article_ids", {item->article_ids.front()}}});
    } else if (share_it) {
      emit(EventKind::Skip, sid);
    } else {
      emit(EventKind::Report, sid);
    }
  }
  emit(EventKind::SurveyAnswer,
       {{"stage", "post"},
        {"answers",
         {{"perceived_accuracy", std::uniform_int_distribution<int>(30, 100)(rng)},
          {"likert", {{"trust", std::uniform_int_distribution<int>(1, 5)(rng)}}},
          {"feedback", ""}}}},
       30, 120);
  return session;
}

}  // namespace xaifn
