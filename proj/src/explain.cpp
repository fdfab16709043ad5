#include "xaifn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xaifn {

std::vector<double> postprocess_heatmap(const std::vector<double>& raw, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw Error("BAD_CONFIG", "heatmap epsilon must lie in [0, 1)");
  std::vector<double> out(raw.size(), 0.0);
  const double mx = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
  if (!(mx > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = raw[i] < epsilon * mx ? 0.0 : raw[i] / mx;
  }
  return out;
}

std::vector<double> normalize_weights(const std::vector<double>& raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<double> out(raw.size(), raw.empty() ? 0.0 : 1.0 / static_cast<double>(raw.size()));
  if (total > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / total;
  }
  return out;
}

AttributeImportance normalize_importance(double claim, double text, double source) {
  AttributeImportance out;
  const double total = claim + text + source;
  if (total > 0.0) {
    out.claim = claim / total;
    out.text = text / total;
    out.source = source / total;
  }
  return out;
}

std::vector<int> top_k_indices(const std::vector<double>& values, std::size_t k) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] > values[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

namespace {

KeywordHeatmap make_heatmap(const std::vector<std::string>& tokens, const std::vector<double>& raw,
                            double epsilon) {
  KeywordHeatmap h;
  h.threshold_applied = epsilon;
  const auto scores = postprocess_heatmap(raw, epsilon);
  for (std::size_t i = 0; i < tokens.size(); ++i) h.entries.push_back({tokens[i], scores[i]});
  return h;
}

json heatmap_to_json(const KeywordHeatmap& h) {
  json entries = json::array();
  for (const auto& e : h.entries) entries.push_back({e.token, e.score});
  json j = {{"scope", h.scope}, {"entries", entries}, {"threshold_applied", h.threshold_applied}};
  if (h.scope == "article") j["article_id"] = h.article_id;
  return j;
}

KeywordHeatmap heatmap_from_json(const json& j) {
  KeywordHeatmap h;
  h.scope = j.at("scope").get<std::string>();
  h.article_id = j.value("article_id", "");
  h.threshold_applied = j.at("threshold_applied").get<double>();
  for (const auto& e : j.at("entries")) h.entries.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
  return h;
}

}  // namespace

KeywordHeatmap extract_headline_heatmap(const HeadlineModel& m1, const EncodedStory& story,
                                        double epsilon) {
  if (story.headline.empty()) throw Error("EMPTY_HEADLINE", story.story_id + ": headline has no tokens");
  return make_heatmap(story.headline_text, m1.token_attention(story), epsilon);
}

std::vector<KeywordHeatmap> extract_article_heatmaps(const ArticleAttentionModel& m4,
                                                     const EncodedStory& story, double epsilon) {
  const auto att = m4.token_attention(story);
  std::vector<KeywordHeatmap> out;
  for (std::size_t a = 0; a < story.articles.size(); ++a) {
    KeywordHeatmap h = make_heatmap(story.articles[a].flat_text, att[a], epsilon);
    h.scope = "article";
    h.article_id = story.articles[a].article_id;
    out.push_back(std::move(h));
  }
  return out;
}

ArticleAttribution extract_article_attribution(const HierarchicalModel& m2,
                                               const EncodedStory& story) {
  ArticleAttribution out;
  if (story.articles.empty()) return out;
  const auto weights = normalize_weights(m2.attention(story).article);
  out.empty = false;
  for (std::size_t a = 0; a < story.articles.size(); ++a) {
    out.scores.emplace_back(story.articles[a].article_id, weights[a]);
  }
  return out;
}

std::vector<AttributeImportance> extract_attribute_importance(const MimicModel& m3,
                                                              const EncodedStory& story) {
  std::vector<AttributeImportance> out;
  for (const auto& article : story.articles) {
    const auto row = m3.features().row(story, &article);
    const double base = m3.student().predict(row);
    auto delta = [&](FeatureGroup g) { return std::abs(base - m3.neutralized_score(row, g)); };
    AttributeImportance imp = normalize_importance(delta(FeatureGroup::Claim), delta(FeatureGroup::Text),
                                                   delta(FeatureGroup::Source));
    imp.article_id = article.article_id;
    out.push_back(imp);
  }
  return out;
}

std::vector<ArticleTopSentences> extract_top_sentences(const HierarchicalModel& m2,
                                                       const EncodedStory& story) {
  const auto att = m2.attention(story);
  std::vector<ArticleTopSentences> out;
  for (std::size_t a = 0; a < story.articles.size(); ++a) {
    ArticleTopSentences t;
    t.article_id = story.articles[a].article_id;
    for (int i : top_k_indices(att.sentence[a], 3)) {
      t.sentences.push_back({i, story.articles[a].sentence_text[static_cast<std::size_t>(i)],
                             att.sentence[a][static_cast<std::size_t>(i)]});
    }
    out.push_back(std::move(t));
  }
  return out;
}

ExplanationBundle build_bundle(const Ensemble& models, const EncodedStory& story, double epsilon) {
  ExplanationBundle b;
  b.story_id = story.story_id;
  b.headline_heatmap = extract_headline_heatmap(*models.headline, story, epsilon);
  b.article_heatmaps = extract_article_heatmaps(*models.article, story, epsilon);
  b.article_attribution = extract_article_attribution(*models.hierarchical, story);
  b.attribute_importance = extract_attribute_importance(*models.mimic, story);
  b.top_sentences = extract_top_sentences(*models.hierarchical, story);
  return b;
}

json bundle_to_json(const ExplanationBundle& b) {
  json heatmaps = json::array();
  for (const auto& h : b.article_heatmaps) heatmaps.push_back(heatmap_to_json(h));
  json scores = json::array();
  for (const auto& [id, s] : b.article_attribution.scores) scores.push_back({{"article_id", id}, {"score", s}});
  json importance = json::array();
  for (const auto& i : b.attribute_importance) {
    importance.push_back({{"article_id", i.article_id}, {"claim", i.claim}, {"text", i.text}, {"source", i.source}});
  }
  json tops = json::array();
  for (const auto& t : b.top_sentences) {
    json list = json::array();
    for (const auto& s : t.sentences) {
      list.push_back({{"sentence_index", s.sentence_index}, {"text", s.text}, {"score", s.score}});
    }
    tops.push_back({{"article_id", t.article_id}, {"sentences", list}});
  }
  return {{"story_id", b.story_id},
          {"headline_heatmap", heatmap_to_json(b.headline_heatmap)},
          {"article_heatmaps", heatmaps},
          {"article_attribution", {{"empty", b.article_attribution.empty}, {"scores", scores}}},
          {"attribute_importance", importance},
          {"top_sentences", tops}};
}

ExplanationBundle bundle_from_json(const json& j) {
  ExplanationBundle b;
  b.story_id = j.at("story_id").get<std::string>();
  b.headline_heatmap = heatmap_from_json(j.at("headline_heatmap"));
  for (const auto& h : j.at("article_heatmaps")) b.article_heatmaps.push_back(heatmap_from_json(h));
  b.article_attribution.empty = j.at("article_attribution").at("empty").get<bool>();
  for (const auto& s : j.at("article_attribution").at("scores")) {
    b.article_attribution.scores.emplace_back(s.at("article_id").get<std::string>(), s.at("score").get<double>());
  }
  for (const auto& i : j.at("attribute_importance")) {
    b.attribute_importance.push_back({i.at("article_id").get<std::string>(), i.at("claim").get<double>(),
                                      i.at("text").get<double>(), i.at("source").get<double>()});
  }
  for (const auto& t : j.at("top_sentences")) {
    ArticleTopSentences ts;
    ts.article_id = t.at("article_id").get<std::string>();
    for (const auto& s : t.at("sentences")) {
      ts.sentences.push_back({s.at("sentence_index").get<int>(), s.at("text").get<std::string>(),
                              s.at("score").get<double>()});
    }
    b.top_sentences.push_back(std::move(ts));
  }
  return b;
}

}  // namespace xaifn
