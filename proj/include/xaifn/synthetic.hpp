#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xaifn/corpus.hpp"

namespace xaifn {

/// Generator for planted-signal corpora. The generator records where it put
/// each signal, so tests can score models and explanations against it.
struct SyntheticOptions {
  enum class Signal { Triggers, SourceOnly };

  std::size_t n_claims = 2000;
  std::size_t articles_per_story = 3;
  std::size_t sentences_per_article = 7;
  std::size_t words_per_sentence = 6;
  std::size_t headline_words = 8;
  /// Share of stories whose headline carries no trigger (label lives in the articles only).
  double neutral_headline_rate = 0.05;
  std::size_t filler_vocabulary = 400;
  std::size_t domains = 40;
  Signal signal = Signal::Triggers;
  std::uint64_t seed = 2024;

  json to_json() const;
};

struct PlantedSignal {
  Label label = Label::True;
  int headline_trigger_position = -1;  // token index in the headline, -1 if neutral
  std::string headline_trigger;
  std::string signal_article_id;  // empty when no article carries the signal
  int signal_sentence_index = -1;
  std::string article_trigger;
};

struct SyntheticCorpus {
  std::vector<json> claims;
  std::vector<json> articles;
  Corpus corpus;
  std::map<std::string, PlantedSignal> truth;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options);

/// Trigger vocabularies used by the generator.
const std::vector<std::string>& headline_triggers(Label label);
const std::vector<std::string>& article_triggers(Label label);

}  // namespace xaifn
