#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xaifn/common.hpp"

namespace xaifn {

// ---------------------------------------------------------------- conditions

enum class Condition { Baseline, AI, XaiAttention, XaiAttribution, XaiAll };

inline constexpr std::array<Condition, 5> kAllConditions = {
    Condition::Baseline, Condition::AI, Condition::XaiAttention, Condition::XaiAttribution,
    Condition::XaiAll};

/// Explanation components a condition may show.
inline constexpr const char* kKeywordHeatmaps = "keyword_heatmaps";
inline constexpr const char* kArticleAttribution = "article_attribution";
inline constexpr const char* kAttributeImportance = "attribute_importance";
inline constexpr const char* kTopSentences = "top_sentences";

struct ConditionSpec {
  bool shows_prediction = false;
  std::set<std::string> explanation_set;
};

ConditionSpec condition_spec(Condition c);
/// "baseline", "ai", "xai-attention", "xai-attribution", "xai-all".
std::string to_string(Condition c);
/// Accepts the kebab form above or the upper-case form (XAI_ALL).
Condition parse_condition(std::string_view name);

// ---------------------------------------------------------------- curated queue

inline constexpr std::size_t kQueuePeriod = 4;
inline constexpr std::size_t kRequiredShares = 12;
inline constexpr std::size_t kFirstPopupShare = 8;

/// A test-pool story offered to curation: ground truth plus the ensemble output.
struct PoolItem {
  std::string story_id;
  Label label = Label::True;
  double score = 0.5;  // ensemble probability of FAKE
  std::vector<std::string> article_ids;
};

struct QueueItem {
  std::string story_id;
  Label label = Label::True;  // ground truth, never sent to participants
  Label displayed_prediction = Label::True;
  double displayed_confidence = 0.5;
  bool is_forced_error = false;
  bool overridden = false;  // displayed label differs from the live model output
  std::string bundle_ref;
  std::vector<std::string> article_ids;

  bool displayed_correct() const { return displayed_prediction == label; }
  json to_json() const;
  static QueueItem from_json(const json& j);
  bool operator==(const QueueItem&) const = default;
};

struct CuratedQueue {
  std::vector<QueueItem> items;
  std::uint64_t seed = 0;

  std::vector<json> to_records() const;
  static CuratedQueue from_records(const std::vector<json>& records, std::uint64_t seed = 0);
  bool operator==(const CuratedQueue&) const = default;
};

struct CurationOptions {
  std::size_t length = 24;
  std::uint64_t seed = 0;
  /// When false, a slot that no live model output fits is an error instead of an override.
  bool allow_override = true;
};

/// Builds a queue whose 4th, 8th, ... items display a wrong prediction and all
/// others a correct one. A longer queue with the same seed extends a shorter one.
CuratedQueue curate_queue(const std::vector<PoolItem>& pool, const CurationOptions& options);

// ---------------------------------------------------------------- sessions

enum class Phase { Instructions, PreSurvey, Reviewing, PostSurvey, Done };
std::string to_string(Phase p);

enum class EventKind {
  InstructionsDone,
  ViewStory,
  OpenArticle,
  OpenAssistantPanel,
  HoverTooltip,
  Share,
  Report,
  Skip,
  PopupAnswer,
  SurveyAnswer,
};
std::string to_string(EventKind k);
EventKind parse_event_kind(std::string_view name);

struct SessionEvent {
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::ViewStory;
  /// story_id, article_id, article_ids, guess, stage, answers depending on kind.
  json payload = json::object();

  json to_json() const;
  static SessionEvent from_json(const json& j);
  bool operator==(const SessionEvent&) const = default;
};

struct SharedStory {
  std::string story_id;
  std::vector<std::string> article_ids;
  bool operator==(const SharedStory&) const = default;
};

struct PopupRecord {
  std::string story_id;
  std::size_t share_level = 0;
  Label guess = Label::True;
  Label displayed = Label::True;
  bool correct() const { return guess == displayed; }
  bool operator==(const PopupRecord&) const = default;
};

struct Popup {
  std::string story_id;
  std::size_t share_level = 0;
  std::string question = "What would the AI fake news detector predict for this news story?";
};

struct SessionState {
  std::string session_id;
  Condition condition = Condition::Baseline;
  Phase phase = Phase::Instructions;
  std::size_t cursor = 0;
  std::vector<SharedStory> shared;
  std::vector<std::string> reported;
  std::vector<std::string> skipped;
  std::vector<PopupRecord> popups;
  std::set<std::string> inspected;  // stories whose assistant panel was opened
  json pre_survey = json::object();
  json post_survey = json::object();
  std::vector<SessionEvent> events;

  json to_json() const;
  bool operator==(const SessionState&) const = default;
};

/// Event-sourced session. Every state change goes through apply(); an event
/// that violates an invariant throws Error with a reason code and is not recorded.
class Session {
 public:
  Session(std::string session_id, Condition condition, std::shared_ptr<const CuratedQueue> queue);

  static Session replay(std::string session_id, Condition condition,
                        std::shared_ptr<const CuratedQueue> queue,
                        const std::vector<SessionEvent>& events);

  void apply(const SessionEvent& event);

  const SessionState& state() const { return state_; }
  const CuratedQueue& queue() const { return *queue_; }
  /// Swap in a longer queue; the current queue must be a prefix of it.
  void extend_queue(std::shared_ptr<const CuratedQueue> longer);

  const QueueItem* current_item() const;
  std::optional<Popup> next_popup() const;
  bool complete() const { return state_.phase == Phase::Done; }
  bool decided(const std::string& story_id) const;

 private:
  void require_phase(Phase p, const SessionEvent& e) const;
  const QueueItem& require_current(const SessionEvent& e) const;
  void decide(const SessionEvent& e);

  std::shared_ptr<const CuratedQueue> queue_;
  SessionState state_;
};

/// Slider answers are clamped to [0, 100]; other fields pass through.
json clamp_survey(const json& answers);

// ---------------------------------------------------------------- simulated participants

enum class PolicyKind { Compliant, Contrarian, Independent };

struct SimulantPolicy {
  PolicyKind kind = PolicyKind::Compliant;
  double p_agree = 0.5;           // Independent only
  double panel_open_prob = 0.9;   // Independent only; the others always open it
  double skip_prob = 0.0;         // chance of skipping a story outright
  enum class Guess { PreviousDisplayed, Displayed, Random } guess = Guess::PreviousDisplayed;

  static SimulantPolicy parse(std::string_view name);  // "compliant", "contrarian", "independent[:p]"
  std::string name() const;
};

/// Runs a scripted participant through a full session. Throws
/// QUEUE_EXHAUSTED when the queue ends before 12 shares.
Session simulate_participant(std::shared_ptr<const CuratedQueue> queue, Condition condition,
                             const SimulantPolicy& policy, std::uint64_t seed,
                             const std::string& session_id);

}  // namespace xaifn
