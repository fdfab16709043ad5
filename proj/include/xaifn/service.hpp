#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "xaifn/analysis.hpp"
#include "xaifn/explain.hpp"
#include "xaifn/metrics.hpp"
#include "xaifn/study.hpp"

namespace xaifn {

/// Everything a deployed study serves: the curated queue, public story
/// content, and precomputed explanation bundles. The pool, when present,
/// lets the queue grow when skips exhaust it.
struct StudyMaterials {
  std::string study_id = "study";
  CuratedQueue queue;
  std::map<std::string, json> stories;  // story_id -> public story record
  std::map<std::string, ExplanationBundle> bundles;
  std::vector<PoolItem> pool;

  /// Directory with study.json, queue.jsonl, stories.jsonl, bundles.jsonl and optionally pool.jsonl.
  static StudyMaterials load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

/// Public view of a story: headline, topic and articles, never the label.
json public_story(const NewsStory& story);

struct SessionMeta {
  std::string session_id;
  std::string study_id;
  Condition condition = Condition::Baseline;

  json to_json() const;
  static SessionMeta from_json(const json& j);
};

/// Append-only persistence of session event logs.
class EventStore {
 public:
  virtual ~EventStore() = default;
  virtual void create(const SessionMeta& meta) = 0;
  virtual void append(const std::string& session_id, const SessionEvent& event) = 0;
  virtual std::vector<SessionEvent> events(const std::string& session_id) const = 0;
  virtual std::vector<SessionMeta> sessions() const = 0;
};

class MemoryStore : public EventStore {
 public:
  void create(const SessionMeta& meta) override;
  void append(const std::string& session_id, const SessionEvent& event) override;
  std::vector<SessionEvent> events(const std::string& session_id) const override;
  std::vector<SessionMeta> sessions() const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, SessionMeta> meta_;
  std::map<std::string, std::vector<SessionEvent>> events_;
};

/// One `<id>.meta.json` and one line-delimited `<id>.events.jsonl` per session.
class FileStore : public EventStore {
 public:
  explicit FileStore(std::filesystem::path dir);
  void create(const SessionMeta& meta) override;
  void append(const std::string& session_id, const SessionEvent& event) override;
  std::vector<SessionEvent> events(const std::string& session_id) const override;
  std::vector<SessionMeta> sessions() const override;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

std::vector<SessionEvent> read_event_log(const std::filesystem::path& path);

enum class AssignmentPolicy { Fixed, RoundRobin };

struct ServiceOptions {
  AssignmentPolicy assignment = AssignmentPolicy::RoundRobin;
  Condition fixed_condition = Condition::XaiAll;
  AnalysisPlan plan;
};

/// Transport-independent study service. Methods take and return JSON bodies
/// and throw Error with a reason code on rejection.
class StudyService {
 public:
  StudyService(StudyMaterials materials, std::shared_ptr<EventStore> store, ServiceOptions options = {});

  json create_session(const std::string& study_id, const json& body = json::object());
  json story_view(const std::string& session_id);
  json post_event(const std::string& session_id, const json& body);
  json post_decision(const std::string& session_id, const json& body);
  json post_popup_answer(const std::string& session_id, const json& body);
  json post_survey(const std::string& session_id, const json& body);
  json session_state(const std::string& session_id);
  /// Compares the served state with a fresh replay of the persisted log.
  json consistency(const std::string& session_id);
  json study_metrics(const std::string& study_id);
  json study_analysis(const std::string& study_id);

  const std::string& study_id() const { return materials_.study_id; }

 private:
  struct Slot {
    std::mutex mu;
    SessionMeta meta;
    std::unique_ptr<Session> session;
  };

  std::shared_ptr<Slot> slot(const std::string& session_id) const;
  void check_study(const std::string& study_id) const;
  json apply(const std::string& session_id, SessionEvent event);
  std::shared_ptr<const CuratedQueue> current_queue() const;
  /// Grow the shared queue by one window when a session has run off its end.
  void extend_if_exhausted(Session& session);
  std::int64_t timestamp_for(const Session& session, const json& body) const;
  json assistant_payload(const QueueItem& item, Condition condition) const;
  std::vector<MetricsReport> completed_metrics() const;

  StudyMaterials materials_;
  std::shared_ptr<EventStore> store_;
  ServiceOptions options_;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const CuratedQueue> queue_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_id_ = 1;
  std::uint64_t assigned_ = 0;
};

/// HTTP binding of StudyService on a background thread.
class HttpFrontend {
 public:
  explicit HttpFrontend(StudyService& service);
  ~HttpFrontend();
  /// Binds (port 0 picks a free port) and starts serving; returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error reason code.
int http_status(const std::string& code);

}  // namespace xaifn
