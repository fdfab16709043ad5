#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xaifn/detectors.hpp"

namespace xaifn {

inline constexpr double kDefaultHeatmapEpsilon = 0.05;

struct HeatmapEntry {
  std::string token;
  double score = 0.0;
  bool operator==(const HeatmapEntry&) const = default;
};

struct KeywordHeatmap {
  std::string scope = "headline";  // "headline" or "article"
  std::string article_id;          // set when scope is "article"
  std::vector<HeatmapEntry> entries;
  double threshold_applied = kDefaultHeatmapEpsilon;
  bool operator==(const KeywordHeatmap&) const = default;
};

struct ArticleAttribution {
  bool empty = true;  // explicit marker for stories without articles
  std::vector<std::pair<std::string, double>> scores;  // article order
  bool operator==(const ArticleAttribution&) const = default;
};

struct AttributeImportance {
  std::string article_id;
  double claim = 1.0 / 3.0;
  double text = 1.0 / 3.0;
  double source = 1.0 / 3.0;
  bool operator==(const AttributeImportance&) const = default;
};

struct RankedSentence {
  int sentence_index = 0;
  std::string text;
  double score = 0.0;
  bool operator==(const RankedSentence&) const = default;
};

struct ArticleTopSentences {
  std::string article_id;
  std::vector<RankedSentence> sentences;
  bool operator==(const ArticleTopSentences&) const = default;
};

struct ExplanationBundle {
  std::string story_id;
  KeywordHeatmap headline_heatmap;
  std::vector<KeywordHeatmap> article_heatmaps;
  ArticleAttribution article_attribution;
  std::vector<AttributeImportance> attribute_importance;
  std::vector<ArticleTopSentences> top_sentences;
  bool operator==(const ExplanationBundle&) const = default;
};

// Post-processing on raw weights; exposed for direct testing.

/// Rescale to max 1 and zero entries below epsilon * max.
std::vector<double> postprocess_heatmap(const std::vector<double>& raw, double epsilon);
/// Normalize nonnegative weights to sum 1.
std::vector<double> normalize_weights(const std::vector<double>& raw);
/// Occlusion deltas to shares; uniform when all three are zero.
AttributeImportance normalize_importance(double claim, double text, double source);
/// Indices of the k largest values, ties broken by lower index.
std::vector<int> top_k_indices(const std::vector<double>& values, std::size_t k);

KeywordHeatmap extract_headline_heatmap(const HeadlineModel& m1, const EncodedStory& story,
                                        double epsilon = kDefaultHeatmapEpsilon);
std::vector<KeywordHeatmap> extract_article_heatmaps(const ArticleAttentionModel& m4,
                                                     const EncodedStory& story,
                                                     double epsilon = kDefaultHeatmapEpsilon);
ArticleAttribution extract_article_attribution(const HierarchicalModel& m2,
                                               const EncodedStory& story);
std::vector<AttributeImportance> extract_attribute_importance(const MimicModel& m3,
                                                              const EncodedStory& story);
std::vector<ArticleTopSentences> extract_top_sentences(const HierarchicalModel& m2,
                                                       const EncodedStory& story);

ExplanationBundle build_bundle(const Ensemble& models, const EncodedStory& story,
                               double epsilon = kDefaultHeatmapEpsilon);

json bundle_to_json(const ExplanationBundle& bundle);
ExplanationBundle bundle_from_json(const json& j);

}  // namespace xaifn
