#include <gtest/gtest.h>

#include <functional>

#include "study_fixtures.hpp"
#include "xaifn/metrics.hpp"
#include "xaifn/study.hpp"

using namespace xaifn;
using testing_support::make_pool;
using testing_support::make_queue;
using testing_support::queue_violation;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

struct Driver {
  explicit Driver(Condition c, std::shared_ptr<const CuratedQueue> q = make_queue(40, 3))
      : session("s1", c, std::move(q)) {}

  void event(EventKind kind, json payload = json::object()) { session.apply({t += 1000, kind, std::move(payload)}); }

  void start() {
    event(EventKind::InstructionsDone);
    event(EventKind::SurveyAnswer, {{"stage", "pre"}, {"answers", {{"expected_ai_accuracy", 70}}}});
  }

  const QueueItem& current() const { return *session.current_item(); }
  json sid() const { return {{"story_id", current().story_id}}; }

  void answer_popup_if_any() {
    if (session.next_popup()) event(EventKind::PopupAnswer, {{"story_id", current().story_id}, {"guess", "fake"}});
  }

  void share() {
    answer_popup_if_any();
    event(EventKind::Share, {{"story_id", current().story_id}, {"article_ids", {current().article_ids.front()}}});
  }
  void skip() {
    answer_popup_if_any();
    event(EventKind::Skip, sid());
  }

  Session session;
  std::int64_t t = 0;
};

}  // namespace

// ---------------------------------------------------------------- conditions

TEST(Conditions, ExplanationSets) {
  EXPECT_FALSE(condition_spec(Condition::Baseline).shows_prediction);
  EXPECT_TRUE(condition_spec(Condition::Baseline).explanation_set.empty());
  EXPECT_TRUE(condition_spec(Condition::AI).shows_prediction);
  EXPECT_TRUE(condition_spec(Condition::AI).explanation_set.empty());
  EXPECT_EQ(condition_spec(Condition::XaiAttention).explanation_set, std::set<std::string>{kKeywordHeatmaps});
  EXPECT_EQ(condition_spec(Condition::XaiAttribution).explanation_set,
            (std::set<std::string>{kArticleAttribution, kAttributeImportance, kTopSentences}));
  EXPECT_EQ(condition_spec(Condition::XaiAll).explanation_set,
            (std::set<std::string>{kKeywordHeatmaps, kArticleAttribution, kAttributeImportance, kTopSentences}));
}

TEST(Conditions, NamesRoundTrip) {
  for (Condition c : kAllConditions) EXPECT_EQ(parse_condition(to_string(c)), c);
  EXPECT_EQ(parse_condition("XAI_ALL"), Condition::XaiAll);
  EXPECT_EQ(parse_condition("BASELINE"), Condition::Baseline);
  EXPECT_EQ(error_code([] { parse_condition("xai-nothing"); }), "BAD_CONDITION");
}

// ---------------------------------------------------------------- queue

TEST(Queue, LengthSixteenPattern) {
  const auto q = make_queue(16, 11);
  ASSERT_EQ(q->items.size(), 16u);
  std::size_t correct = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& it = q->items[i];
    EXPECT_EQ(it.displayed_correct(), (i + 1) % 4 != 0) << "position " << i + 1;
    correct += it.displayed_correct();
    if (!it.displayed_correct()) (it.displayed_prediction == Label::Fake ? fp : fn) += 1;
  }
  EXPECT_EQ(correct, 12u);
  EXPECT_EQ(fp, 2u);
  EXPECT_EQ(fn, 2u);
}

TEST(Queue, InvariantsHoldAcrossLengthsAndSeeds) {
  const auto pool = make_pool(40, 2);
  for (std::size_t length : {4u, 8u, 16u, 24u, 40u, 44u}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto q = curate_queue(pool, {length, seed});
      EXPECT_EQ(queue_violation(q), "") << "length " << length << " seed " << seed;
    }
  }
}

TEST(Queue, DeterministicAndPrefixConsistent) {
  const auto pool = make_pool(40, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = curate_queue(pool, {24, seed});
    EXPECT_EQ(a, curate_queue(pool, {24, seed}));
    const auto longer = curate_queue(pool, {40, seed});
    for (std::size_t i = 0; i < a.items.size(); ++i) EXPECT_EQ(a.items[i], longer.items[i]);
  }
}

TEST(Queue, StoriesAreNotRepeated) {
  const auto q = make_queue(40, 8);
  std::set<std::string> ids;
  for (const auto& it : q->items) EXPECT_TRUE(ids.insert(it.story_id).second) << it.story_id;
}

TEST(Queue, DisplayedConfidenceComesFromModelScore) {
  const auto pool = make_pool(20, 5);
  std::map<std::string, double> score;
  for (const auto& p : pool) score[p.story_id] = p.score;
  for (const auto& it : curate_queue(pool, {24, 1}).items) {
    EXPECT_FALSE(it.overridden);
    EXPECT_DOUBLE_EQ(it.displayed_confidence, std::max(score[it.story_id], 1.0 - score[it.story_id]));
    // Without an override the displayed label is the live model output.
    EXPECT_EQ(it.displayed_prediction, label_from_score(score[it.story_id]));
  }
}

TEST(Queue, OverrideFlaggedWhenModelNeverErrs) {
  auto pool = make_pool(20, 6);
  std::erase_if(pool, [](const PoolItem& p) { return label_from_score(p.score) != p.label; });
  const auto q = curate_queue(pool, {16, 2});
  EXPECT_EQ(queue_violation(q), "");
  for (const auto& it : q.items) EXPECT_EQ(it.overridden, it.is_forced_error);
  CurationOptions strict{16, 2, false};
  try {
    curate_queue(pool, strict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "POOL_EXHAUSTED");
    EXPECT_NE(std::string(e.what()).find("model wrong"), std::string::npos);
  }
}

TEST(Queue, BadLengthAndSmallPool) {
  const auto pool = make_pool(2, 1);
  EXPECT_EQ(error_code([&] { curate_queue(pool, {10, 1}); }), "BAD_LENGTH");
  EXPECT_EQ(error_code([&] { curate_queue(pool, {0, 1}); }), "BAD_LENGTH");
  EXPECT_EQ(error_code([&] { curate_queue(pool, {40, 1}); }), "POOL_EXHAUSTED");
}

TEST(Queue, RecordsRoundTrip) {
  const auto q = make_queue(24, 9);
  EXPECT_EQ(CuratedQueue::from_records(q->to_records(), q->seed), *q);
}

// ---------------------------------------------------------------- sessions

TEST(Session, PhasesInOrder) {
  Driver d(Condition::XaiAll);
  EXPECT_EQ(d.session.state().phase, Phase::Instructions);
  EXPECT_EQ(error_code([&] { d.event(EventKind::ViewStory, {{"story_id", "p0"}}); }), "WRONG_PHASE");
  d.event(EventKind::InstructionsDone);
  EXPECT_EQ(d.session.state().phase, Phase::PreSurvey);
  EXPECT_EQ(error_code([&] { d.event(EventKind::SurveyAnswer, {{"stage", "post"}, {"answers", json::object()}}); }),
            "WRONG_PHASE");
  EXPECT_EQ(error_code([&] { d.event(EventKind::SurveyAnswer, {{"stage", "mid"}, {"answers", json::object()}}); }),
            "BAD_SURVEY");
  d.event(EventKind::SurveyAnswer, {{"stage", "pre"}, {"answers", {{"expected_ai_accuracy", 140}}}});
  EXPECT_EQ(d.session.state().phase, Phase::Reviewing);
  EXPECT_EQ(d.session.state().pre_survey["expected_ai_accuracy"], 100);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(d.session.state().phase, Phase::Reviewing);
    while (d.current().displayed_prediction == Label::Fake) {
      d.answer_popup_if_any();
      d.event(EventKind::Report, d.sid());
    }
    d.share();
  }
  EXPECT_EQ(d.session.state().phase, Phase::PostSurvey);
  d.event(EventKind::SurveyAnswer, {{"stage", "post"}, {"answers", {{"perceived_accuracy", -5}}}});
  EXPECT_TRUE(d.session.complete());
  EXPECT_EQ(d.session.state().post_survey["perceived_accuracy"], 0);
  EXPECT_EQ(error_code([&] { d.event(EventKind::InstructionsDone); }), "SESSION_COMPLETE");
}

TEST(Session, ElevenSharesThenOneMoreCompletesReviewing) {
  Driver d(Condition::AI);
  d.start();
  for (int i = 0; i < 11; ++i) d.share();
  EXPECT_EQ(d.session.state().phase, Phase::Reviewing);
  d.share();
  EXPECT_EQ(d.session.state().phase, Phase::PostSurvey);
  EXPECT_EQ(error_code([&] { d.event(EventKind::Share, {{"story_id", "p0"}, {"article_ids", {"x"}}}); }),
            "WRONG_PHASE");
}

TEST(Session, SkipsDoNotCountTowardShares) {
  Driver d(Condition::AI);
  d.start();
  for (int i = 0; i < 5; ++i) d.skip();
  for (int i = 0; i < 12; ++i) d.share();
  EXPECT_EQ(d.session.state().skipped.size(), 5u);
  EXPECT_EQ(d.session.state().shared.size(), 12u);
  EXPECT_EQ(d.session.state().phase, Phase::PostSurvey);
}

TEST(Session, ShareNeedsOwnArticles) {
  Driver d(Condition::AI);
  d.start();
  const std::string id = d.current().story_id;
  EXPECT_EQ(error_code([&] { d.event(EventKind::Share, {{"story_id", id}, {"article_ids", json::array()}}); }),
            "ARTICLE_REQUIRED");
  EXPECT_EQ(error_code([&] { d.event(EventKind::Share, {{"story_id", id}}); }), "ARTICLE_REQUIRED");
  EXPECT_EQ(error_code([&] { d.event(EventKind::Share, {{"story_id", id}, {"article_ids", {"elsewhere-a0"}}}); }),
            "UNKNOWN_ARTICLE");
  const std::string a0 = d.current().article_ids[0];
  EXPECT_EQ(error_code([&] { d.event(EventKind::Share, {{"story_id", id}, {"article_ids", {a0, a0}}}); }),
            "BAD_EVENT");
  EXPECT_TRUE(d.session.state().shared.empty());
  d.event(EventKind::Share, {{"story_id", id}, {"article_ids", {a0}}});
  EXPECT_EQ(d.session.state().shared.front().article_ids, std::vector<std::string>{a0});
}

TEST(Session, DecisionsTargetTheCurrentStoryOnce) {
  Driver d(Condition::AI);
  d.start();
  const std::string first = d.current().story_id;
  const std::string second = d.session.queue().items[1].story_id;
  EXPECT_EQ(error_code([&] { d.event(EventKind::Report, {{"story_id", second}}); }), "NOT_CURRENT_STORY");
  d.event(EventKind::Report, {{"story_id", first}});
  EXPECT_EQ(error_code([&] { d.event(EventKind::Skip, {{"story_id", first}}); }), "ALREADY_DECIDED");
  EXPECT_EQ(error_code([&] { d.event(EventKind::Skip, json::object()); }), "BAD_EVENT");
  EXPECT_TRUE(d.session.decided(first));
  EXPECT_FALSE(d.session.decided(second));
}

TEST(Session, StoryInAtMostOneOutcomeList) {
  const auto s = simulate_participant(make_queue(40, 2), Condition::XaiAll,
                                      SimulantPolicy::parse("independent:0.6"), 3, "x");
  std::map<std::string, int> seen;
  for (const auto& sh : s.state().shared) ++seen[sh.story_id];
  for (const auto& id : s.state().reported) ++seen[id];
  for (const auto& id : s.state().skipped) ++seen[id];
  for (const auto& [id, n] : seen) EXPECT_EQ(n, 1) << id;
}

TEST(Session, TimestampsMustNotGoBackwards) {
  Driver d(Condition::AI);
  d.start();
  EXPECT_EQ(error_code([&] { d.session.apply({d.t - 1, EventKind::ViewStory, d.sid()}); }), "NON_MONOTONIC_TIME");
  d.session.apply({d.t, EventKind::ViewStory, d.sid()});
}

TEST(Session, RejectedEventsAreNotRecorded) {
  Driver d(Condition::Baseline);
  d.start();
  const auto before = d.session.state();
  EXPECT_EQ(error_code([&] { d.event(EventKind::OpenAssistantPanel, d.sid()); }), "NO_ASSISTANT");
  EXPECT_EQ(error_code([&] { d.event(EventKind::HoverTooltip, d.sid()); }), "NO_ASSISTANT");
  EXPECT_EQ(error_code([&] { d.event(EventKind::PopupAnswer, {{"story_id", d.current().story_id}, {"guess", "true"}}); }),
            "NO_POPUP");
  EXPECT_EQ(d.session.state(), before);
}

TEST(Session, PopupsOnSharesEightToEleven) {
  Driver d(Condition::XaiAll);
  d.start();
  for (int i = 0; i < 3; ++i) d.share();
  EXPECT_FALSE(d.session.next_popup());
  for (int i = 0; i < 5; ++i) d.share();
  ASSERT_EQ(d.session.state().shared.size(), 8u);
  const auto popup = d.session.next_popup();
  ASSERT_TRUE(popup);
  EXPECT_EQ(popup->story_id, d.current().story_id);
  EXPECT_EQ(popup->share_level, 8u);
  // The assistant and the decision wait for the answer.
  EXPECT_EQ(error_code([&] { d.event(EventKind::OpenAssistantPanel, d.sid()); }), "POPUP_PENDING");
  EXPECT_EQ(error_code([&] { d.event(EventKind::Report, d.sid()); }), "POPUP_PENDING");
  d.event(EventKind::ViewStory, d.sid());
  d.event(EventKind::PopupAnswer, {{"story_id", d.current().story_id}, {"guess", "true"}});
  EXPECT_FALSE(d.session.next_popup());
  EXPECT_EQ(error_code([&] { d.event(EventKind::PopupAnswer, {{"story_id", d.current().story_id}, {"guess", "true"}}); }),
            "NO_POPUP");
  d.event(EventKind::OpenAssistantPanel, d.sid());
  // Reporting keeps the share count at 8, so the next story is not asked again.
  d.event(EventKind::Report, d.sid());
  EXPECT_FALSE(d.session.next_popup());
  for (int i = 0; i < 4; ++i) d.share();
  EXPECT_EQ(d.session.state().popups.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d.session.state().popups[i].share_level, 8 + i);
}

TEST(Session, PopupRecordsDisplayedPrediction) {
  Driver d(Condition::AI);
  d.start();
  for (int i = 0; i < 8; ++i) d.share();
  const Label shown = d.current().displayed_prediction;
  d.event(EventKind::PopupAnswer, {{"story_id", d.current().story_id}, {"guess", to_string(shown)}});
  ASSERT_EQ(d.session.state().popups.size(), 1u);
  EXPECT_EQ(d.session.state().popups[0].displayed, shown);
  EXPECT_TRUE(d.session.state().popups[0].correct());
}

TEST(Session, ReplayReproducesState) {
  for (Condition c : kAllConditions) {
    for (const char* policy : {"compliant", "contrarian", "independent:0.7"}) {
      const auto q = make_queue(40, 5);
      const auto s = simulate_participant(q, c, SimulantPolicy::parse(policy), 17, "r");
      const auto back = Session::replay("r", c, q, s.state().events);
      EXPECT_EQ(back.state(), s.state());
      EXPECT_EQ(back.state().to_json().dump(), s.state().to_json().dump());
      std::vector<SessionEvent> through_json;
      for (const auto& e : s.state().events) through_json.push_back(SessionEvent::from_json(json::parse(e.to_json().dump())));
      EXPECT_EQ(Session::replay("r", c, q, through_json).state(), s.state());
    }
  }
}

TEST(Session, ExtendQueueRequiresPrefix) {
  const auto pool = make_pool(40, 1);
  auto short_q = std::make_shared<const CuratedQueue>(curate_queue(pool, {8, 4}));
  Session s("e", Condition::AI, short_q);
  s.extend_queue(std::make_shared<const CuratedQueue>(curate_queue(pool, {12, 4})));
  EXPECT_EQ(s.queue().items.size(), 12u);
  EXPECT_EQ(error_code([&] { s.extend_queue(std::make_shared<const CuratedQueue>(curate_queue(pool, {16, 5}))); }),
            "BAD_QUEUE");
}

TEST(Session, EventKindNames) {
  for (auto k : {EventKind::InstructionsDone, EventKind::ViewStory, EventKind::OpenArticle, EventKind::OpenAssistantPanel,
                 EventKind::HoverTooltip, EventKind::Share, EventKind::Report, EventKind::Skip, EventKind::PopupAnswer,
                 EventKind::SurveyAnswer}) {
    EXPECT_EQ(parse_event_kind(to_string(k)), k);
  }
  EXPECT_EQ(error_code([] { parse_event_kind("dance"); }), "BAD_EVENT");
}

TEST(Survey, ClampSliders) {
  const json out = clamp_survey({{"perceived_accuracy", 120}, {"estimated_fake_rate", -3}, {"note", "hi"}});
  EXPECT_EQ(out["perceived_accuracy"], 100);
  EXPECT_EQ(out["estimated_fake_rate"], 0);
  EXPECT_EQ(out["note"], "hi");
  EXPECT_EQ(error_code([] { clamp_survey({{"perceived_accuracy", "lots"}}); }), "BAD_SURVEY");
}

// ---------------------------------------------------------------- simulants

TEST(Simulant, PolicyParsing) {
  EXPECT_EQ(SimulantPolicy::parse("compliant").kind, PolicyKind::Compliant);
  EXPECT_EQ(SimulantPolicy::parse("contrarian").kind, PolicyKind::Contrarian);
  const auto p = SimulantPolicy::parse("independent:0.25");
  EXPECT_EQ(p.kind, PolicyKind::Independent);
  EXPECT_DOUBLE_EQ(p.p_agree, 0.25);
  EXPECT_EQ(SimulantPolicy::parse(p.name()).p_agree, 0.25);
  EXPECT_EQ(error_code([] { SimulantPolicy::parse("independent:2"); }), "BAD_POLICY");
  EXPECT_EQ(error_code([] { SimulantPolicy::parse("lazy"); }), "BAD_POLICY");
}

TEST(Simulant, CompliantFollowsDisplayedLabel) {
  const auto q = make_queue(40, 12);
  const auto s = simulate_participant(q, Condition::XaiAll, SimulantPolicy::parse("compliant"), 4, "c");
  ASSERT_TRUE(s.complete());
  std::map<std::string, Label> shown;
  for (const auto& it : q->items) shown[it.story_id] = it.displayed_prediction;
  for (const auto& sh : s.state().shared) EXPECT_EQ(shown[sh.story_id], Label::True);
  for (const auto& id : s.state().reported) EXPECT_EQ(shown[id], Label::Fake);
  EXPECT_EQ(agreement_rate(s).value, 1.0);
}

TEST(Simulant, ContrarianInverts) {
  const auto q = make_queue(40, 12);
  const auto s = simulate_participant(q, Condition::AI, SimulantPolicy::parse("contrarian"), 4, "c");
  std::map<std::string, Label> shown;
  for (const auto& it : q->items) shown[it.story_id] = it.displayed_prediction;
  for (const auto& sh : s.state().shared) EXPECT_EQ(shown[sh.story_id], Label::Fake);
  EXPECT_EQ(agreement_rate(s).value, 0.0);
}

TEST(Simulant, CompliantCredibilityMatchesQueueEnumeration) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto q = make_queue(40, seed);
    const auto s = simulate_participant(q, Condition::AI, SimulantPolicy::parse("compliant"), seed, "c");
    // Walk the queue: the first 12 displayed-TRUE items are the ones shared.
    std::size_t shared = 0, truly_true = 0;
    for (const auto& it : q->items) {
      if (shared == 12) break;
      if (it.displayed_prediction != Label::True) continue;
      ++shared;
      truly_true += it.label == Label::True;
    }
    ASSERT_EQ(shared, 12u);
    const Rate cred = credibility_score(s);
    EXPECT_EQ(cred.numerator, static_cast<std::int64_t>(truly_true));
    EXPECT_EQ(cred.denominator, 12);
  }
}

TEST(Simulant, IndependentAgreementNearP) {
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    SimulantPolicy p = SimulantPolicy::parse("independent:0.7");
    p.panel_open_prob = 1.0;
    const auto s = simulate_participant(make_queue(80, seed), Condition::AI, p, seed, "i");
    const Rate r = agreement_rate(s);
    agree += static_cast<std::size_t>(r.numerator);
    total += static_cast<std::size_t>(r.denominator);
  }
  EXPECT_NEAR(static_cast<double>(agree) / static_cast<double>(total), 0.7, 0.05);
}

TEST(Simulant, ExactlyFourPopupsInEveryCompletedSession) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (Condition c : kAllConditions) {
      SimulantPolicy p = SimulantPolicy::parse(seed % 2 ? "independent:0.5" : "compliant");
      p.skip_prob = 0.15;
      const auto s = simulate_participant(make_queue(80, seed), c, p, seed, "p");
      ASSERT_TRUE(s.complete());
      EXPECT_EQ(s.state().popups.size(), 4u);
    }
  }
}

TEST(Simulant, BaselineNeverTouchesAssistant) {
  const auto s = simulate_participant(make_queue(40, 1), Condition::Baseline, SimulantPolicy::parse("compliant"), 1, "b");
  for (const auto& e : s.state().events) {
    EXPECT_NE(e.kind, EventKind::OpenAssistantPanel);
    EXPECT_NE(e.kind, EventKind::HoverTooltip);
  }
  EXPECT_TRUE(s.state().inspected.empty());
}

TEST(Simulant, ShortQueueIsExhausted) {
  EXPECT_EQ(error_code([] {
              simulate_participant(make_queue(8, 1), Condition::AI, SimulantPolicy::parse("compliant"), 1, "q");
            }),
            "QUEUE_EXHAUSTED");
}

TEST(Simulant, Deterministic) {
  const auto q = make_queue(40, 6);
  const auto a = simulate_participant(q, Condition::XaiAttention, SimulantPolicy::parse("independent:0.4"), 9, "d");
  const auto b = simulate_participant(q, Condition::XaiAttention, SimulantPolicy::parse("independent:0.4"), 9, "d");
  EXPECT_EQ(a.state(), b.state());
}
