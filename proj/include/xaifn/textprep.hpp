#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xaifn/corpus.hpp"

namespace xaifn {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnknownId = 1;

/// Lowercased word tokens. Apostrophes and hyphens survive only between
/// word characters; other punctuation separates tokens.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  /// Tokens at or above `min_frequency`, ordered by frequency desc then lexicographically.
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts,
                                std::size_t min_frequency);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t min_frequency() const { return min_frequency_; }
  bool contains(std::string_view token) const;

  std::vector<TokenId> encode(std::string_view text, std::size_t max_tokens) const;

  /// Stable content hash used to check that models share a vocabulary.
  std::string hash() const;

  json to_json() const;
  static Vocabulary from_json(const json& j);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
  std::size_t min_frequency_ = 1;
};

/// Vocabulary over headlines, article titles and bodies of the given stories.
Vocabulary build_vocabulary(const std::vector<const NewsStory*>& train_stories,
                            std::size_t min_frequency);

struct EmbeddingTable {
  enum class Source { PretrainedFile, RandomInit };

  std::size_t dimension = 100;
  Eigen::MatrixXd vectors;  // |V| x dimension; row 0 is zero
  Source source = Source::RandomInit;

  static EmbeddingTable random_init(const Vocabulary& vocab, std::size_t dimension,
                                    std::uint64_t seed, double sigma = 0.1);

  /// Rows for tokens found in `file`; remaining rows drawn from N(0, sigma).
  static EmbeddingTable load_pretrained(const std::filesystem::path& file,
                                        const Vocabulary& vocab, std::uint64_t seed,
                                        double sigma = 0.1);
};

struct SegmentBounds {
  std::size_t max_sentences = 30;
  std::size_t max_tokens_per_sentence = 50;
};

inline constexpr std::size_t kMaxHeadlineTokens = 32;

struct SegmentedArticle {
  std::vector<std::vector<TokenId>> sentences;
  std::size_t max_sentences = 30;
  std::size_t max_tokens_per_sentence = 50;

  std::size_t token_count() const;
  /// Sentences concatenated, truncated to `max_tokens`.
  std::vector<TokenId> flattened(std::size_t max_tokens) const;
};

/// Raw sentence strings: split after '.', '!' or '?' followed by whitespace.
/// Sentences with no tokens are dropped.
std::vector<std::string> split_sentences(std::string_view body);

SegmentedArticle segment_sentences(std::string_view body, const Vocabulary& vocab,
                                   SegmentBounds bounds = {});

}  // namespace xaifn
