#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "xaifn/explain.hpp"
#include "xaifn/synthetic.hpp"

namespace testing_support {

/// Hit counts of explanations against the generator's record of planted signals.
struct Faithfulness {
  std::size_t headline_hits = 0, headline_total = 0;
  std::size_t article_hits = 0, article_total = 0;
  std::size_t sentence_hits = 0, sentence_total = 0;

  double headline_rate() const { return headline_total ? double(headline_hits) / double(headline_total) : 0.0; }
  double article_rate() const { return article_total ? double(article_hits) / double(article_total) : 0.0; }
  double sentence_rate() const { return sentence_total ? double(sentence_hits) / double(sentence_total) : 0.0; }
};

inline Faithfulness measure_faithfulness(const xaifn::Ensemble& models, const std::vector<xaifn::EncodedStory>& stories,
                                         const std::map<std::string, xaifn::PlantedSignal>& truth) {
  using namespace xaifn;
  Faithfulness f;
  for (const auto& s : stories) {
    const auto& t = truth.at(s.story_id);
    if (t.headline_trigger_position >= 0) {
      const auto h = extract_headline_heatmap(*models.headline, s);
      // Ties at the max count only if the trigger is the first of them.
      std::size_t best = 0;
      for (std::size_t i = 1; i < h.entries.size(); ++i) {
        if (h.entries[i].score > h.entries[best].score) best = i;
      }
      ++f.headline_total;
      f.headline_hits += static_cast<int>(best) == t.headline_trigger_position;
    }
    if (t.signal_article_id.empty()) continue;
    const auto attribution = extract_article_attribution(*models.hierarchical, s);
    std::vector<double> scores;
    for (const auto& [id, v] : attribution.scores) scores.push_back(v);
    ++f.article_total;
    if (!scores.empty()) {
      const int top = top_k_indices(scores, 1).front();
      f.article_hits += attribution.scores[static_cast<std::size_t>(top)].first == t.signal_article_id;
    }
    for (const auto& tops : extract_top_sentences(*models.hierarchical, s)) {
      if (tops.article_id != t.signal_article_id) continue;
      ++f.sentence_total;
      for (const auto& r : tops.sentences) f.sentence_hits += r.sentence_index == t.signal_sentence_index;
    }
  }
  return f;
}

}  // namespace testing_support
