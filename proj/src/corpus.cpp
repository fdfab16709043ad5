#include "xaifn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace xaifn {

namespace {

struct NumberedRecord {
  std::size_t line = 0;
  json value;
};

std::vector<NumberedRecord> read_numbered(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("IO", "cannot open " + path.string());
  std::vector<NumberedRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back({line_no, json::parse(line)});
    } catch (const json::parse_error&) {
      throw Error("MALFORMED_RECORD",
                  path.string() + ": malformed record at line " + std::to_string(line_no));
    }
  }
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string required_string(const json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw Error("MALFORMED_RECORD", where + ": missing or non-string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

std::string where(const std::string& file, std::size_t line) {
  return file + ": malformed record at line " + std::to_string(line);
}

Corpus assemble(const std::vector<NumberedRecord>& claims,
                const std::vector<NumberedRecord>& articles, const std::string& claims_name,
                const std::string& articles_name) {
  std::vector<NewsStory> stories;
  std::map<std::string, std::size_t> index;
  for (const auto& rec : claims) {
    const std::string at = where(claims_name, rec.line);
    if (!rec.value.is_object()) throw Error("MALFORMED_RECORD", at + ": not an object");
    NewsStory s;
    s.story_id = required_string(rec.value, "story_id", at);
    s.headline = collapse_whitespace(required_string(rec.value, "headline", at));
    const std::string label = required_string(rec.value, "label", at);
    if (label != "true" && label != "fake") {
      throw Error("MALFORMED_RECORD", at + ": label must be \"true\" or \"fake\"");
    }
    s.label = parse_label(label);
    s.topic = rec.value.value("topic", std::string{});
    if (s.story_id.empty()) throw Error("MALFORMED_RECORD", at + ": empty story_id");
    if (s.headline.empty()) throw Error("MALFORMED_RECORD", at + ": empty headline");
    if (index.count(s.story_id)) {
      throw Error("DUPLICATE_STORY", claims_name + ": duplicate story_id \"" + s.story_id +
                                         "\" at line " + std::to_string(rec.line));
    }
    index[s.story_id] = stories.size();
    stories.push_back(std::move(s));
  }

  std::set<std::string> orphans;
  std::set<std::string> article_ids;
  for (const auto& rec : articles) {
    const std::string at = where(articles_name, rec.line);
    if (!rec.value.is_object()) throw Error("MALFORMED_RECORD", at + ": not an object");
    RelatedArticle a;
    a.article_id = required_string(rec.value, "article_id", at);
    a.parent_story_id = required_string(rec.value, "story_id", at);
    a.title = required_string(rec.value, "title", at);
    a.body = required_string(rec.value, "body", at);
    a.source = registrable_domain(required_string(rec.value, "source", at));
    auto rank = rec.value.find("search_rank");
    if (rank == rec.value.end() || !rank->is_number_integer()) {
      throw Error("MALFORMED_RECORD", at + ": missing or non-integer field \"search_rank\"");
    }
    a.search_rank = rank->get<int>();
    if (a.search_rank < 1 || a.search_rank > static_cast<int>(kMaxArticlesPerStory)) {
      throw Error("MALFORMED_RECORD", at + ": search_rank outside [1, 16]");
    }
    if (!article_ids.insert(a.article_id).second) {
      throw Error("MALFORMED_RECORD", at + ": duplicate article_id \"" + a.article_id + "\"");
    }
    auto it = index.find(a.parent_story_id);
    if (it == index.end()) {
      orphans.insert(a.parent_story_id);
      continue;
    }
    NewsStory& parent = stories[it->second];
    a.noisy_label = parent.label;
    parent.articles.push_back(std::move(a));
  }
  if (!orphans.empty()) {
    std::string names;
    for (const auto& o : orphans) names += (names.empty() ? "" : ", ") + ("\"" + o + "\"");
    throw Error("ORPHAN_ARTICLE", "articles reference unknown story ids: " + names);
  }
  for (auto& s : stories) {
    std::stable_sort(s.articles.begin(), s.articles.end(),
                     [](const RelatedArticle& x, const RelatedArticle& y) {
                       return x.search_rank < y.search_rank;
                     });
    if (s.articles.size() > kMaxArticlesPerStory) {
      throw Error("TOO_MANY_ARTICLES", "story \"" + s.story_id + "\" has " +
                                           std::to_string(s.articles.size()) +
                                           " articles (max 16)");
    }
  }
  return Corpus(std::move(stories));
}

}  // namespace

Corpus::Corpus(std::vector<NewsStory> stories) : stories_(std::move(stories)) {
  for (std::size_t i = 0; i < stories_.size(); ++i) {
    if (!index_.emplace(stories_[i].story_id, i).second) {
      throw Error("DUPLICATE_STORY", "duplicate story_id \"" + stories_[i].story_id + "\"");
    }
  }
}

std::size_t Corpus::article_count() const {
  std::size_t n = 0;
  for (const auto& s : stories_) n += s.articles.size();
  return n;
}

const NewsStory& Corpus::story(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("UNKNOWN_STORY", "unknown story id \"" + id + "\"");
  return stories_[it->second];
}

std::vector<std::string> Corpus::flagged_without_articles() const {
  std::vector<std::string> out;
  for (const auto& s : stories_) {
    if (s.articles.empty()) out.push_back(s.story_id);
  }
  return out;
}

std::vector<const NewsStory*> Corpus::select(const std::set<std::string>& ids) const {
  std::vector<const NewsStory*> out;
  for (const auto& s : stories_) {
    if (ids.count(s.story_id)) out.push_back(&s);
  }
  return out;
}

std::string registrable_domain(std::string_view url_or_host) {
  std::string host(url_or_host);
  if (auto p = host.find("://"); p != std::string::npos) host = host.substr(p + 3);
  if (auto p = host.find_first_of("/?#"); p != std::string::npos) host = host.substr(0, p);
  if (auto p = host.rfind('@'); p != std::string::npos) host = host.substr(p + 1);
  if (auto p = host.find(':'); p != std::string::npos) host = host.substr(0, p);
  std::transform(host.begin(), host.end(), host.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  while (!host.empty() && host.back() == '.') host.pop_back();

  std::vector<std::string> labels;
  std::stringstream ss(host);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!part.empty()) labels.push_back(part);
  }
  if (labels.size() <= 2) {
    std::string out;
    for (const auto& l : labels) out += (out.empty() ? "" : ".") + l;
    return out;
  }
  // Two-level public suffixes such as co.uk or com.au keep three labels.
  static const std::set<std::string> second_level = {"co", "com", "org", "net", "gov",
                                                     "ac", "edu", "gob", "or", "ne"};
  const auto& sld = labels[labels.size() - 2];
  const auto& tld = labels.back();
  std::size_t keep = 2;
  if (tld.size() == 2 && second_level.count(sld)) keep = 3;
  std::string out;
  for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
    out += (out.empty() ? "" : ".") + labels[i];
  }
  return out;
}

Corpus ingest_corpus(const std::filesystem::path& claims_file,
                     const std::filesystem::path& articles_file) {
  return assemble(read_numbered(claims_file), read_numbered(articles_file),
                  claims_file.filename().string(), articles_file.filename().string());
}

Corpus assemble_corpus(const std::vector<json>& claims, const std::vector<json>& articles,
                       const std::string& claims_name, const std::string& articles_name) {
  std::vector<NumberedRecord> c, a;
  for (std::size_t i = 0; i < claims.size(); ++i) c.push_back({i + 1, claims[i]});
  for (std::size_t i = 0; i < articles.size(); ++i) a.push_back({i + 1, articles[i]});
  return assemble(c, a, claims_name, articles_name);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::vector<json> claims, articles;
  for (const auto& s : corpus.stories()) {
    claims.push_back({{"story_id", s.story_id},
                      {"headline", s.headline},
                      {"label", to_string(s.label)},
                      {"topic", s.topic}});
    for (const auto& a : s.articles) {
      articles.push_back({{"article_id", a.article_id},
                          {"story_id", a.parent_story_id},
                          {"title", a.title},
                          {"body", a.body},
                          {"source", a.source},
                          {"search_rank", a.search_rank}});
    }
  }
  write_jsonl(dir / "claims.jsonl", claims);
  write_jsonl(dir / "articles.jsonl", articles);
}

Corpus read_corpus_dir(const std::filesystem::path& dir) {
  return ingest_corpus(dir / "claims.jsonl", dir / "articles.jsonl");
}

const std::set<std::string>& CorpusSplit::named(std::string_view name) const {
  if (name == "train") return train;
  if (name == "validation" || name == "val") return validation;
  if (name == "test") return test;
  throw Error("BAD_SPLIT", "unknown split \"" + std::string(name) + "\"");
}

CorpusSplit split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw Error("BAD_RATIOS", "split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw Error("BAD_RATIOS", "split ratios must be nonnegative");
  }
  const std::size_t n = corpus.size();
  if (n < 10) throw Error("CORPUS_TOO_SMALL", "splitting needs at least 10 stories");

  // Largest-remainder allocation of set sizes; ties keep set order.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b] + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) sizes[order[i % 3]] += 1;

  // Shuffle each label group, then interleave groups by fractional rank so any
  // contiguous run carries the corpus label proportions.
  std::mt19937_64 rng(seed);
  std::vector<std::string> by_label[2];
  for (const auto& s : corpus.stories()) by_label[static_cast<int>(s.label)].push_back(s.story_id);
  struct Keyed {
    double key;
    int label;
    std::string id;
  };
  std::vector<Keyed> merged;
  for (int l = 0; l < 2; ++l) {
    std::shuffle(by_label[l].begin(), by_label[l].end(), rng);
    const double m = static_cast<double>(by_label[l].size());
    for (std::size_t i = 0; i < by_label[l].size(); ++i) {
      merged.push_back({(static_cast<double>(i) + 0.5) / m, l, by_label[l][i]});
    }
  }
  std::sort(merged.begin(), merged.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.label < b.label;
  });

  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    if (i < sizes[0]) {
      split.train.insert(merged[i].id);
    } else if (i < sizes[0] + sizes[1]) {
      split.validation.insert(merged[i].id);
    } else {
      split.test.insert(merged[i].id);
    }
  }
  return split;
}

json split_to_json(const CorpusSplit& split) {
  return {{"seed", split.seed},
          {"train", split.train},
          {"validation", split.validation},
          {"test", split.test}};
}

CorpusSplit split_from_json(const json& j) {
  CorpusSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::set<std::string>>();
  s.validation = j.at("validation").get<std::set<std::string>>();
  s.test = j.at("test").get<std::set<std::string>>();
  return s;
}

}  // namespace xaifn
