#include <algorithm>
#include <random>

#include "xaifn/study.hpp"

namespace xaifn {

ConditionSpec condition_spec(Condition c) {
  switch (c) {
    case Condition::Baseline:
      return {false, {}};
    case Condition::AI:
      return {true, {}};
    case Condition::XaiAttention:
      return {true, {kKeywordHeatmaps}};
    case Condition::XaiAttribution:
      return {true, {kArticleAttribution, kAttributeImportance, kTopSentences}};
    case Condition::XaiAll:
      return {true, {kKeywordHeatmaps, kArticleAttribution, kAttributeImportance, kTopSentences}};
  }
  return {};
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::Baseline:
      return "baseline";
    case Condition::AI:
      return "ai";
    case Condition::XaiAttention:
      return "xai-attention";
    case Condition::XaiAttribution:
      return "xai-attribution";
    case Condition::XaiAll:
      return "xai-all";
  }
  return "?";
}

Condition parse_condition(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) {
    ch = ch == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  for (Condition c : kAllConditions) {
    if (to_string(c) == s) return c;
  }
  throw Error("BAD_CONDITION", "unknown condition \"" + std::string(name) + "\"");
}

json QueueItem::to_json() const {
  return {{"story_id", story_id},
          {"label", to_string(label)},
          {"displayed_prediction", to_string(displayed_prediction)},
          {"displayed_confidence", displayed_confidence},
          {"is_forced_error", is_forced_error},
          {"overridden", overridden},
          {"bundle_ref", bundle_ref},
          {"article_ids", article_ids}};
}

QueueItem QueueItem::from_json(const json& j) {
  QueueItem q;
  q.story_id = j.at("story_id").get<std::string>();
  q.label = parse_label(j.at("label").get<std::string>());
  q.displayed_prediction = parse_label(j.at("displayed_prediction").get<std::string>());
  q.displayed_confidence = j.at("displayed_confidence").get<double>();
  q.is_forced_error = j.at("is_forced_error").get<bool>();
  q.overridden = j.value("overridden", false);
  q.bundle_ref = j.value("bundle_ref", q.story_id);
  q.article_ids = j.value("article_ids", std::vector<std::string>{});
  return q;
}

std::vector<json> CuratedQueue::to_records() const {
  std::vector<json> out;
  for (const auto& item : items) out.push_back(item.to_json());
  return out;
}

CuratedQueue CuratedQueue::from_records(const std::vector<json>& records, std::uint64_t seed) {
  CuratedQueue q;
  q.seed = seed;
  for (const auto& r : records) q.items.push_back(QueueItem::from_json(r));
  return q;
}

CuratedQueue curate_queue(const std::vector<PoolItem>& pool, const CurationOptions& o) {
  if (o.length == 0 || o.length % kQueuePeriod != 0) {
    throw Error("BAD_LENGTH", "queue length must be a positive multiple of 4");
  }
  std::mt19937_64 rng(o.seed);
  // cells[label][model_correct]
  std::vector<const PoolItem*> cells[2][2];
  for (const auto& p : pool) {
    const bool correct = label_from_score(p.score) == p.label;
    cells[static_cast<int>(p.label)][correct ? 1 : 0].push_back(&p);
  }
  for (auto& by_label : cells) {
    for (auto& cell : by_label) std::shuffle(cell.begin(), cell.end(), rng);
  }
  // Window phase 0 reads T F T F (slot-4 error on a fake story, a false negative);
  // phase 1 reads F T F T (false positive). Windows alternate from a seeded start.
  const int first_phase = static_cast<int>(rng() & 1U);
  std::size_t next[2][2] = {{0, 0}, {0, 0}};
  auto cell_name = [](Label l, bool correct) {
    return std::string("label=") + std::string(to_string(l)) +
           (correct ? ", model correct" : ", model wrong");
  };
  auto take = [&](Label l, bool correct) -> const PoolItem* {
    auto& cell = cells[static_cast<int>(l)][correct ? 1 : 0];
    auto& i = next[static_cast<int>(l)][correct ? 1 : 0];
    return i < cell.size() ? cell[i++] : nullptr;
  };

  CuratedQueue q;
  q.seed = o.seed;
  for (std::size_t pos = 0; pos < o.length; ++pos) {
    const std::size_t window = pos / kQueuePeriod;
    const std::size_t slot = pos % kQueuePeriod;
    const int phase = (first_phase + static_cast<int>(window)) % 2;
    const Label truth = ((static_cast<int>(slot) + phase) % 2 == 0) ? Label::True : Label::Fake;
    const bool want_correct = slot != kQueuePeriod - 1;

    bool overridden = false;
    const PoolItem* item = take(truth, want_correct);
    if (!item) {
      if (!o.allow_override) {
        throw Error("POOL_EXHAUSTED", "no unused story in cell " + cell_name(truth, want_correct));
      }
      item = take(truth, !want_correct);
      overridden = true;
    }
    if (!item) {
      throw Error("POOL_EXHAUSTED", "no unused story with label=" + std::string(to_string(truth)) +
                                        " (cells " + cell_name(truth, true) + " and " +
                                        cell_name(truth, false) + " are empty)");
    }
    QueueItem qi;
    qi.story_id = item->story_id;
    qi.label = truth;
    qi.displayed_prediction = want_correct ? truth : flip(truth);
    qi.displayed_confidence = confidence_from_score(item->score);
    qi.is_forced_error = !want_correct;
    qi.overridden = overridden;
    qi.bundle_ref = item->story_id;
    qi.article_ids = item->article_ids;
    q.items.push_back(std::move(qi));
  }
  return q;
}

}  // namespace xaifn
