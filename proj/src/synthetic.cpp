#include "xaifn/synthetic.hpp"

#include <random>

namespace xaifn {

namespace {

const std::vector<std::string> kTopics = {"politics", "business", "health", "crime"};

std::string filler_word(std::size_t i) {
  // Pronounceable pseudo-words so tokens survive tokenization unchanged.
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  std::string w;
  std::size_t x = i + 7;
  for (int syl = 0; syl < 3; ++syl) {
    w += onsets[x % 14];
    x /= 14;
    w += vowels[x % 5];
    x /= 5;
  }
  return w;
}

}  // namespace

const std::vector<std::string>& headline_triggers(Label label) {
  static const std::vector<std::string> fake = {"hoax", "shocking", "miracle", "exposed"};
  static const std::vector<std::string> truth = {"confirmed", "official", "announces", "approved"};
  return label == Label::Fake ? fake : truth;
}

const std::vector<std::string>& article_triggers(Label label) {
  static const std::vector<std::string> fake = {"fabricated", "unfounded", "doctored"};
  static const std::vector<std::string> truth = {"corroborated", "documented", "authenticated"};
  return label == Label::Fake ? fake : truth;
}

json SyntheticOptions::to_json() const {
  return {{"n_claims", n_claims},
          {"articles_per_story", articles_per_story},
          {"sentences_per_article", sentences_per_article},
          {"words_per_sentence", words_per_sentence},
          {"headline_words", headline_words},
          {"neutral_headline_rate", neutral_headline_rate},
          {"filler_vocabulary", filler_vocabulary},
          {"domains", domains},
          {"signal", signal == Signal::Triggers ? "triggers" : "source-only"},
          {"seed", seed}};
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& o) {
  if (o.n_claims < 2 || o.filler_vocabulary < 10 || o.domains < 2 || o.words_per_sentence < 2 ||
      o.headline_words < 2 || o.sentences_per_article < 1 || o.articles_per_story > kMaxArticlesPerStory) {
    throw Error("BAD_CONFIG", "invalid synthetic corpus options");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> word(0, o.filler_vocabulary - 1);
  std::uniform_int_distribution<std::size_t> topic(0, kTopics.size() - 1);
  std::bernoulli_distribution neutral(o.neutral_headline_rate);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  auto filler_sentence = [&](std::size_t n) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back(filler_word(word(rng)));
    return words;
  };
  auto join = [](const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  auto capitalize = [](std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  };

  SyntheticCorpus out;
  const std::size_t half_domains = o.domains / 2;
  for (std::size_t n = 0; n < o.n_claims; ++n) {
    const std::string story_id = "s" + std::to_string(n);
    const Label label = (n % 2 == 0) ? Label::True : Label::Fake;
    PlantedSignal truth;
    truth.label = label;

    auto headline = filler_sentence(o.headline_words);
    const bool triggers = o.signal == SyntheticOptions::Signal::Triggers;
    if (triggers && !neutral(rng)) {
      const auto& pool = headline_triggers(label);
      truth.headline_trigger = pool[pick(pool.size())];
      truth.headline_trigger_position = static_cast<int>(pick(headline.size()));
      headline[static_cast<std::size_t>(truth.headline_trigger_position)] = truth.headline_trigger;
    }
    out.claims.push_back({{"story_id", story_id},
                          {"headline", capitalize(join(headline))},
                          {"label", to_string(label)},
                          {"topic", kTopics[topic(rng)]}});

    const std::size_t signal_article =
        (triggers && o.articles_per_story > 0) ? pick(o.articles_per_story) : o.articles_per_story;
    for (std::size_t a = 0; a < o.articles_per_story; ++a) {
      const std::string article_id = story_id + "-a" + std::to_string(a);
      std::vector<std::string> sentences;
      for (std::size_t k = 0; k < o.sentences_per_article; ++k) {
        sentences.push_back(join(filler_sentence(o.words_per_sentence)));
      }
      if (a == signal_article) {
        const std::size_t at = pick(o.sentences_per_article);
        auto words = filler_sentence(o.words_per_sentence);
        const auto& pool = article_triggers(label);
        truth.article_trigger = pool[pick(pool.size())];
        words[pick(words.size())] = truth.article_trigger;
        sentences[at] = join(words);
        truth.signal_article_id = article_id;
        truth.signal_sentence_index = static_cast<int>(at);
      }
      std::string body;
      for (const auto& s : sentences) body += (body.empty() ? "" : " ") + capitalize(s) + ".";

      std::size_t domain = pick(o.domains);
      if (!triggers) {
        domain = (label == Label::Fake ? 0 : half_domains) + pick(half_domains);
      }
      out.articles.push_back({{"article_id", article_id},
                              {"story_id", story_id},
                              {"title", capitalize(join(filler_sentence(5)))},
                              {"body", body},
                              {"source", "https://www.site" + std::to_string(domain) + ".com/news/" +
                                             std::to_string(n)},
                              {"search_rank", static_cast<int>(a) + 1}});
    }
    out.truth.emplace(story_id, std::move(truth));
  }
  out.corpus = assemble_corpus(out.claims, out.articles);
  return out;
}

}  // namespace xaifn
