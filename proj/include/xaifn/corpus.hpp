#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xaifn/common.hpp"

namespace xaifn {

inline constexpr std::size_t kMaxArticlesPerStory = 16;

struct RelatedArticle {
  std::string article_id;
  std::string parent_story_id;
  std::string title;
  std::string body;
  std::string source;  // registrable domain, lowercased
  int search_rank = 1;
  Label noisy_label = Label::True;

  bool operator==(const RelatedArticle&) const = default;
};

struct NewsStory {
  std::string story_id;
  std::string headline;
  Label label = Label::True;
  std::string topic;
  std::vector<RelatedArticle> articles;

  bool has_evidence() const { return !articles.empty(); }
  bool operator==(const NewsStory&) const = default;
};

/// Immutable collection of stories keyed by id, in file order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<NewsStory> stories);

  const std::vector<NewsStory>& stories() const { return stories_; }
  std::size_t size() const { return stories_.size(); }
  std::size_t article_count() const;
  const NewsStory& story(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  /// Ids of stories ingested without any related article.
  std::vector<std::string> flagged_without_articles() const;

  /// Subset in the order of `ids`.
  std::vector<const NewsStory*> select(const std::set<std::string>& ids) const;

  bool operator==(const Corpus& other) const { return stories_ == other.stories_; }

 private:
  std::vector<NewsStory> stories_;
  std::map<std::string, std::size_t> index_;
};

/// Reduce a URL or host name to its lowercased registrable domain.
std::string registrable_domain(std::string_view url_or_host);

Corpus ingest_corpus(const std::filesystem::path& claims_file,
                     const std::filesystem::path& articles_file);

/// Same validation as ingest_corpus over already-parsed records.
Corpus assemble_corpus(const std::vector<json>& claims, const std::vector<json>& articles,
                       const std::string& claims_name = "claims",
                       const std::string& articles_name = "articles");

/// Writes claims.jsonl and articles.jsonl under `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus_dir(const std::filesystem::path& dir);

struct CorpusSplit {
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;
  std::uint64_t seed = 0;

  const std::set<std::string>& named(std::string_view name) const;
  bool operator==(const CorpusSplit&) const = default;
};

/// Stratified deterministic split by story. Set sizes follow the
/// largest-remainder rounding of ratios * N.
CorpusSplit split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

json split_to_json(const CorpusSplit& split);
CorpusSplit split_from_json(const json& j);

}  // namespace xaifn
