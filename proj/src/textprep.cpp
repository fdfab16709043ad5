#include "xaifn/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

namespace xaifn {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
      continue;
    }
    const bool joiner = c == '\'' || c == '-';
    if (joiner && !current.empty() && i + 1 < n &&
        is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back(static_cast<char>(c));
      continue;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  index_.emplace("<pad>", kPadId);
  index_.emplace("<unk>", kUnknownId);
}

Vocabulary Vocabulary::from_counts(const std::map<std::string, std::size_t>& counts,
                                   std::size_t min_frequency) {
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_frequency && tok != "<pad>" && tok != "<unk>") kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_frequency_ = min_frequency;
  for (const auto& [tok, n] : kept) {
    v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::vector<TokenId> Vocabulary::encode(std::string_view text, std::size_t max_tokens) const {
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(text)) {
    if (ids.size() >= max_tokens) break;
    ids.push_back(id(tok));
  }
  return ids;
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return fnv1a_hex(joined);
}

json Vocabulary::to_json() const {
  return {{"min_frequency", min_frequency_}, {"tokens", tokens_}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  Vocabulary v;
  v.min_frequency_ = j.at("min_frequency").get<std::size_t>();
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw Error("BAD_VOCAB", "vocabulary must start with <pad>, <unk>");
  }
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    v.index_.emplace(tokens[i], static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

Vocabulary build_vocabulary(const std::vector<const NewsStory*>& train_stories,
                            std::size_t min_frequency) {
  if (train_stories.empty()) throw Error("EMPTY_TRAINING_SPLIT", "training split is empty");
  std::map<std::string, std::size_t> counts;
  auto count = [&](std::string_view text) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  };
  for (const NewsStory* s : train_stories) {
    count(s->headline);
    for (const auto& a : s->articles) {
      count(a.title);
      count(a.body);
    }
  }
  return Vocabulary::from_counts(counts, min_frequency);
}

EmbeddingTable EmbeddingTable::random_init(const Vocabulary& vocab, std::size_t dimension,
                                           std::uint64_t seed, double sigma) {
  EmbeddingTable t;
  t.dimension = dimension;
  t.source = Source::RandomInit;
  t.vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()),
                                    static_cast<Eigen::Index>(dimension));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index r = 1; r < t.vectors.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.vectors.cols(); ++c) t.vectors(r, c) = normal(rng);
  }
  return t;
}

EmbeddingTable EmbeddingTable::load_pretrained(const std::filesystem::path& file,
                                               const Vocabulary& vocab, std::uint64_t seed,
                                               double sigma) {
  std::ifstream in(file);
  if (!in) throw Error("IO", "cannot open " + file.string());
  std::vector<std::pair<TokenId, std::vector<double>>> found;
  std::size_t dimension = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    double v = 0.0;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) {
      throw Error("MALFORMED_RECORD",
                  file.string() + ": malformed record at line " + std::to_string(line_no));
    }
    if (dimension == 0) dimension = values.size();
    if (values.empty() || values.size() != dimension) {
      throw Error("MALFORMED_RECORD", file.string() + ": inconsistent dimension at line " +
                                          std::to_string(line_no));
    }
    if (!vocab.contains(token)) continue;
    const TokenId id = vocab.id(token);
    if (id == kPadId || id == kUnknownId) continue;
    found.emplace_back(id, std::move(values));
  }
  if (dimension == 0) throw Error("MALFORMED_RECORD", file.string() + ": no vectors");
  EmbeddingTable t = random_init(vocab, dimension, seed, sigma);
  t.source = Source::PretrainedFile;
  for (const auto& [id, values] : found) {
    for (std::size_t c = 0; c < dimension; ++c) {
      t.vectors(id, static_cast<Eigen::Index>(c)) = values[c];
    }
  }
  return t;
}

std::size_t SegmentedArticle::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<TokenId> SegmentedArticle::flattened(std::size_t max_tokens) const {
  std::vector<TokenId> out;
  for (const auto& s : sentences) {
    for (TokenId t : s) {
      if (out.size() >= max_tokens) return out;
      out.push_back(t);
    }
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view body) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!tokenize(current).empty()) {
      const auto b = current.find_first_not_of(" \t\r\n");
      const auto e = current.find_last_not_of(" \t\r\n");
      out.push_back(current.substr(b, e - b + 1));
    }
    current.clear();
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    current.push_back(c);
    const bool terminal = c == '.' || c == '!' || c == '?';
    if (terminal && (i + 1 == body.size() ||
                     std::isspace(static_cast<unsigned char>(body[i + 1])))) {
      flush();
    }
  }
  flush();
  return out;
}

SegmentedArticle segment_sentences(std::string_view body, const Vocabulary& vocab,
                                   SegmentBounds bounds) {
  SegmentedArticle seg;
  seg.max_sentences = bounds.max_sentences;
  seg.max_tokens_per_sentence = bounds.max_tokens_per_sentence;
  for (const auto& sentence : split_sentences(body)) {
    if (seg.sentences.size() >= bounds.max_sentences) break;
    auto ids = vocab.encode(sentence, bounds.max_tokens_per_sentence);
    if (!ids.empty()) seg.sentences.push_back(std::move(ids));
  }
  return seg;
}

}  // namespace xaifn
