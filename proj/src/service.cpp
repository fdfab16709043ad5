#include "xaifn/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <fstream>

namespace xaifn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- materials

json public_story(const NewsStory& story) {
  json articles = json::array();
  for (const auto& a : story.articles) {
    articles.push_back({{"article_id", a.article_id},
                        {"title", a.title},
                        {"body", a.body},
                        {"source", a.source},
                        {"search_rank", a.search_rank}});
  }
  return {{"story_id", story.story_id}, {"headline", story.headline}, {"topic", story.topic}, {"articles", articles}};
}

namespace {

json pool_item_to_json(const PoolItem& p) {
  return {{"story_id", p.story_id}, {"label", to_string(p.label)}, {"score", p.score}, {"article_ids", p.article_ids}};
}

PoolItem pool_item_from_json(const json& j) {
  PoolItem p;
  p.story_id = j.at("story_id").get<std::string>();
  p.label = parse_label(j.at("label").get<std::string>());
  p.score = j.at("score").get<double>();
  p.article_ids = j.value("article_ids", std::vector<std::string>{});
  return p;
}

}  // namespace

StudyMaterials StudyMaterials::load(const fs::path& dir) {
  StudyMaterials m;
  const json meta = read_json(dir / "study.json");
  m.study_id = meta.at("study_id").get<std::string>();
  m.queue = CuratedQueue::from_records(read_jsonl(dir / "queue.jsonl"), meta.value("seed", std::uint64_t{0}));
  for (const auto& s : read_jsonl(dir / "stories.jsonl")) m.stories[s.at("story_id").get<std::string>()] = s;
  for (const auto& b : read_jsonl(dir / "bundles.jsonl")) {
    auto bundle = bundle_from_json(b);
    m.bundles[bundle.story_id] = std::move(bundle);
  }
  if (fs::exists(dir / "pool.jsonl")) {
    for (const auto& p : read_jsonl(dir / "pool.jsonl")) m.pool.push_back(pool_item_from_json(p));
  }
  for (const auto& item : m.queue.items) {
    if (!m.stories.count(item.story_id)) {
      throw Error("BAD_STUDY", "queue story " + item.story_id + " has no story record");
    }
  }
  return m;
}

void StudyMaterials::save(const fs::path& dir) const {
  fs::create_directories(dir);
  write_json(dir / "study.json", {{"study_id", study_id}, {"seed", queue.seed}, {"length", queue.items.size()}});
  write_jsonl(dir / "queue.jsonl", queue.to_records());
  std::vector<json> s;
  for (const auto& [id, story] : stories) s.push_back(story);
  write_jsonl(dir / "stories.jsonl", s);
  std::vector<json> b;
  for (const auto& [id, bundle] : bundles) b.push_back(bundle_to_json(bundle));
  write_jsonl(dir / "bundles.jsonl", b);
  std::vector<json> p;
  for (const auto& item : pool) p.push_back(pool_item_to_json(item));
  write_jsonl(dir / "pool.jsonl", p);
}

// ---------------------------------------------------------------- stores

json SessionMeta::to_json() const {
  return {{"session_id", session_id}, {"study_id", study_id}, {"condition", to_string(condition)}};
}

SessionMeta SessionMeta::from_json(const json& j) {
  return {j.at("session_id").get<std::string>(), j.at("study_id").get<std::string>(),
          parse_condition(j.at("condition").get<std::string>())};
}

void MemoryStore::create(const SessionMeta& meta) {
  std::lock_guard lock(mu_);
  meta_[meta.session_id] = meta;
  events_[meta.session_id];
}

void MemoryStore::append(const std::string& id, const SessionEvent& e) {
  std::lock_guard lock(mu_);
  events_.at(id).push_back(e);
}

std::vector<SessionEvent> MemoryStore::events(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = events_.find(id);
  if (it == events_.end()) throw Error("UNKNOWN_SESSION", "unknown session " + id);
  return it->second;
}

std::vector<SessionMeta> MemoryStore::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<SessionMeta> out;
  for (const auto& [id, m] : meta_) out.push_back(m);
  return out;
}

FileStore::FileStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void FileStore::create(const SessionMeta& meta) {
  std::lock_guard lock(mu_);
  write_json(dir_ / (meta.session_id + ".meta.json"), meta.to_json());
  write_text(dir_ / (meta.session_id + ".events.jsonl"), "");
}

void FileStore::append(const std::string& id, const SessionEvent& e) {
  std::lock_guard lock(mu_);
  std::ofstream out(dir_ / (id + ".events.jsonl"), std::ios::app);
  if (!out) throw Error("IO", "cannot append to the log of session " + id);
  out << e.to_json().dump() << '\n';
  out.flush();
  if (!out) throw Error("IO", "write failed for session " + id);
}

std::vector<SessionEvent> read_event_log(const fs::path& path) {
  std::vector<SessionEvent> out;
  for (const auto& record : read_jsonl(path)) out.push_back(SessionEvent::from_json(record));
  return out;
}

std::vector<SessionEvent> FileStore::events(const std::string& id) const {
  std::lock_guard lock(mu_);
  const fs::path p = dir_ / (id + ".events.jsonl");
  if (!fs::exists(p)) throw Error("UNKNOWN_SESSION", "unknown session " + id);
  return read_event_log(p);
}

std::vector<SessionMeta> FileStore::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<SessionMeta> out;
  const std::string suffix = ".meta.json";
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) out.push_back(SessionMeta::from_json(read_json(entry.path())));
  }
  std::sort(out.begin(), out.end(), [](const SessionMeta& a, const SessionMeta& b) { return a.session_id < b.session_id; });
  return out;
}

// ---------------------------------------------------------------- service

StudyService::StudyService(StudyMaterials materials, std::shared_ptr<EventStore> store, ServiceOptions options)
    : materials_(std::move(materials)), store_(std::move(store)), options_(std::move(options)) {
  queue_ = std::make_shared<const CuratedQueue>(materials_.queue);
  // Rebuild every stored session from its log.
  for (const auto& meta : store_->sessions()) {
    if (meta.study_id != materials_.study_id) continue;
    auto s = std::make_shared<Slot>();
    s->meta = meta;
    s->session = std::make_unique<Session>(meta.session_id, meta.condition, queue_);
    for (const auto& e : store_->events(meta.session_id)) {
      extend_if_exhausted(*s->session);
      s->session->apply(e);
    }
    sessions_[meta.session_id] = s;
    const auto dash = meta.session_id.rfind('-');
    if (dash != std::string::npos) {
      next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(meta.session_id.substr(dash + 1)) + 1);
    }
    ++assigned_;
  }
}

void StudyService::check_study(const std::string& study_id) const {
  if (study_id != materials_.study_id) throw Error("UNKNOWN_STUDY", "unknown study " + study_id);
}

std::shared_ptr<StudyService::Slot> StudyService::slot(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error("UNKNOWN_SESSION", "unknown session " + id);
  return it->second;
}

std::shared_ptr<const CuratedQueue> StudyService::current_queue() const {
  std::shared_lock lock(mu_);
  return queue_;
}

void StudyService::extend_if_exhausted(Session& session) {
  if (session.state().phase != Phase::Reviewing || session.current_item()) return;
  std::unique_lock lock(mu_);
  if (queue_->items.size() <= session.state().cursor) {
    if (materials_.pool.empty()) throw Error("QUEUE_EXHAUSTED", "queue exhausted and no pool to extend it");
    auto longer = curate_queue(materials_.pool, {queue_->items.size() + kQueuePeriod, queue_->seed, true});
    queue_ = std::make_shared<const CuratedQueue>(std::move(longer));
  }
  session.extend_queue(queue_);
}

json StudyService::create_session(const std::string& study_id, const json& body) {
  check_study(study_id);
  auto s = std::make_shared<Slot>();
  {
    std::unique_lock lock(mu_);
    if (body.contains("condition")) {
      s->meta.condition = parse_condition(body.at("condition").get<std::string>());
    } else if (options_.assignment == AssignmentPolicy::Fixed) {
      s->meta.condition = options_.fixed_condition;
    } else {
      s->meta.condition = kAllConditions[assigned_ % kAllConditions.size()];
    }
    ++assigned_;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(next_id_++));
    s->meta.session_id = materials_.study_id + "-" + buf;
    s->meta.study_id = materials_.study_id;
    s->session = std::make_unique<Session>(s->meta.session_id, s->meta.condition, queue_);
    store_->create(s->meta);
    sessions_[s->meta.session_id] = s;
  }
  return {{"session_id", s->meta.session_id},
          {"study_id", s->meta.study_id},
          {"condition", to_string(s->meta.condition)},
          {"phase", to_string(s->session->state().phase)}};
}

std::int64_t StudyService::timestamp_for(const Session& session, const json& body) const {
  std::int64_t ts = 0;
  if (body.contains("timestamp")) {
    ts = body.at("timestamp").get<std::int64_t>();
  } else {
    ts = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
             .count();
    if (!session.state().events.empty()) ts = std::max(ts, session.state().events.back().timestamp_ms);
  }
  return ts;
}

json StudyService::apply(const std::string& session_id, SessionEvent event) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  if (event.timestamp_ms < 0) event.timestamp_ms = timestamp_for(*s->session, json::object());
  extend_if_exhausted(*s->session);
  // Validate on a copy so a failed append leaves the served state untouched.
  Session next = *s->session;
  next.apply(event);
  store_->append(session_id, event);
  *s->session = std::move(next);
  extend_if_exhausted(*s->session);
  const auto& st = s->session->state();
  return {{"session_id", session_id},
          {"phase", to_string(st.phase)},
          {"shares", st.shared.size()},
          {"reported", st.reported.size()},
          {"skipped", st.skipped.size()},
          {"popups", st.popups.size()}};
}

namespace {

SessionEvent event_from_body(const json& body, EventKind kind, std::int64_t ts) {
  SessionEvent e;
  e.kind = kind;
  e.timestamp_ms = body.contains("timestamp") ? body.at("timestamp").get<std::int64_t>() : ts;
  e.payload = body.value("payload", json::object());
  return e;
}

void require_object(const json& body) {
  if (!body.is_object()) throw Error("BAD_REQUEST", "request body must be a JSON object");
}

}  // namespace

json StudyService::post_event(const std::string& session_id, const json& body) {
  require_object(body);
  const EventKind kind = parse_event_kind(body.value("kind", ""));
  switch (kind) {
    case EventKind::InstructionsDone:
    case EventKind::ViewStory:
    case EventKind::OpenArticle:
    case EventKind::OpenAssistantPanel:
    case EventKind::HoverTooltip:
      break;
    default:
      throw Error("WRONG_ENDPOINT", to_string(kind) + " events go through their own endpoint");
  }
  return apply(session_id, event_from_body(body, kind, -1));
}

json StudyService::post_decision(const std::string& session_id, const json& body) {
  require_object(body);
  const std::string action = body.value("action", "");
  EventKind kind;
  if (action == "share") {
    kind = EventKind::Share;
  } else if (action == "report") {
    kind = EventKind::Report;
  } else if (action == "skip") {
    kind = EventKind::Skip;
  } else {
    throw Error("BAD_REQUEST", "action must be share, report or skip");
  }
  SessionEvent e{body.value("timestamp", std::int64_t{-1}), kind, {{"story_id", body.value("story_id", "")}}};
  if (kind == EventKind::Share) e.payload["article_ids"] = body.value("article_ids", json::array());
  return apply(session_id, e);
}

json StudyService::post_popup_answer(const std::string& session_id, const json& body) {
  require_object(body);
  SessionEvent e{body.value("timestamp", std::int64_t{-1}),
                 EventKind::PopupAnswer,
                 {{"story_id", body.value("story_id", "")}, {"guess", body.value("guess", "")}}};
  return apply(session_id, e);
}

json StudyService::post_survey(const std::string& session_id, const json& body) {
  require_object(body);
  SessionEvent e{body.value("timestamp", std::int64_t{-1}),
                 EventKind::SurveyAnswer,
                 {{"stage", body.value("stage", "")}, {"answers", body.value("answers", json::object())}}};
  return apply(session_id, e);
}

json StudyService::assistant_payload(const QueueItem& item, Condition condition) const {
  const ConditionSpec spec = condition_spec(condition);
  json a = {{"prediction", to_string(item.displayed_prediction)}, {"confidence", item.displayed_confidence}};
  if (spec.explanation_set.empty()) return a;
  auto it = materials_.bundles.find(item.bundle_ref);
  if (it == materials_.bundles.end()) throw Error("BAD_STUDY", "no bundle for " + item.bundle_ref);
  const json b = bundle_to_json(it->second);
  json ex = json::object();
  if (spec.explanation_set.count(kKeywordHeatmaps)) {
    ex[kKeywordHeatmaps] = {{"headline", b.at("headline_heatmap")}, {"articles", b.at("article_heatmaps")}};
  }
  if (spec.explanation_set.count(kArticleAttribution)) ex[kArticleAttribution] = b.at("article_attribution");
  if (spec.explanation_set.count(kAttributeImportance)) ex[kAttributeImportance] = b.at("attribute_importance");
  if (spec.explanation_set.count(kTopSentences)) ex[kTopSentences] = b.at("top_sentences");
  a["explanations"] = ex;
  return a;
}

json StudyService::story_view(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  Session& session = *s->session;
  if (session.complete()) throw Error("SESSION_COMPLETE", "session is complete");
  if (session.state().phase != Phase::Reviewing) {
    throw Error("WRONG_PHASE", "no story to review in phase " + to_string(session.state().phase));
  }
  extend_if_exhausted(session);
  const QueueItem& item = *session.current_item();
  const auto popup = session.next_popup();
  json view = {{"session_id", session_id},
               {"condition", to_string(session.state().condition)},
               {"phase", to_string(session.state().phase)},
               {"position", session.state().cursor},
               {"shares", session.state().shared.size()},
               {"required_shares", kRequiredShares},
               {"story", materials_.stories.at(item.story_id)},
               {"popup_required", popup.has_value()}};
  if (popup) {
    view["popup"] = {{"story_id", popup->story_id}, {"question", popup->question}, {"share_level", popup->share_level}};
  }
  if (condition_spec(session.state().condition).shows_prediction) {
    if (popup) {
      view["assistant_locked"] = true;
    } else {
      view["assistant"] = assistant_payload(item, session.state().condition);
    }
  }
  return view;
}

json StudyService::session_state(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return s->session->state().to_json();
}

json StudyService::consistency(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  Session replayed(s->meta.session_id, s->meta.condition, current_queue());
  for (const auto& e : store_->events(session_id)) replayed.apply(e);
  const bool same = replayed.state() == s->session->state();
  return {{"session_id", session_id}, {"consistent", same}, {"events", replayed.state().events.size()}};
}

std::vector<MetricsReport> StudyService::completed_metrics() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, s] : sessions_) slots.push_back(s);
  }
  std::vector<MetricsReport> out;
  for (const auto& s : slots) {
    std::lock_guard lock(s->mu);
    if (s->session->complete()) out.push_back(build_report(*s->session));
  }
  return out;
}

json StudyService::study_metrics(const std::string& study_id) {
  check_study(study_id);
  json out = json::array();
  for (const auto& m : completed_metrics()) out.push_back(m.to_json());
  return {{"study_id", study_id}, {"metrics", out}};
}

json StudyService::study_analysis(const std::string& study_id) {
  check_study(study_id);
  return analyze_study(completed_metrics(), options_.plan).to_json();
}

// ---------------------------------------------------------------- HTTP

int http_status(const std::string& code) {
  if (code == "UNKNOWN_STUDY" || code == "UNKNOWN_SESSION") return 404;
  if (code == "BAD_REQUEST" || code == "BAD_EVENT" || code == "BAD_SURVEY" || code == "BAD_CONDITION" ||
      code == "BAD_LABEL" || code == "MALFORMED_RECORD") {
    return 400;
  }
  if (code == "IO" || code == "BAD_STUDY") return 500;
  return 409;
}

struct HttpFrontend::Impl {
  StudyService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(StudyService& s) : service(s) {}

  template <class F>
  void handle(httplib::Response& res, F&& f) {
    try {
      res.set_content(f().dump(), "application/json");
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", {{"code", "BAD_REQUEST"}, {"message", e.what()}}}}.dump(), "application/json");
    }
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw Error("BAD_REQUEST", std::string("malformed JSON body: ") + e.what());
    }
  }

  void routes() {
    server.Post(R"(/studies/([^/]+)/sessions)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.create_session(req.matches[1], body_of(req)); });
    });
    server.Get(R"(/sessions/([^/]+)/story)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.story_view(req.matches[1]); });
    });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.session_state(req.matches[1]); });
    });
    server.Get(R"(/sessions/([^/]+)/consistency)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.consistency(req.matches[1]); });
    });
    server.Post(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.post_event(req.matches[1], body_of(req)); });
    });
    server.Post(R"(/sessions/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.post_decision(req.matches[1], body_of(req)); });
    });
    server.Post(R"(/sessions/([^/]+)/popup-answer)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.post_popup_answer(req.matches[1], body_of(req)); });
    });
    server.Post(R"(/sessions/([^/]+)/survey)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.post_survey(req.matches[1], body_of(req)); });
    });
    server.Get(R"(/studies/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.study_metrics(req.matches[1]); });
    });
    server.Get(R"(/studies/([^/]+)/analysis)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { return service.study_analysis(req.matches[1]); });
    });
  }
};

HttpFrontend::HttpFrontend(StudyService& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("IO", "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpFrontend::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("IO", "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpFrontend::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace xaifn
