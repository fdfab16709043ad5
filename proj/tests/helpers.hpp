#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "xaifn/detectors.hpp"
#include "xaifn/synthetic.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("xaifn-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline xaifn::ModelConfig tiny_config() {
  xaifn::ModelConfig c;
  c.hidden_size = 8;
  c.embedding_dim = 8;
  c.epochs = 2;
  c.max_article_tokens = 40;
  return c;
}

/// A small ensemble trained once per process on a planted-signal corpus.
struct SmallWorld {
  xaifn::SyntheticCorpus synthetic;
  xaifn::Vocabulary vocab;
  std::vector<xaifn::EncodedStory> train;
  std::vector<xaifn::EncodedStory> test;
  xaifn::Ensemble ensemble;
};

inline const SmallWorld& small_world() {
  static const SmallWorld world = [] {
    SmallWorld w;
    xaifn::SyntheticOptions o;
    o.n_claims = 240;
    o.sentences_per_article = 4;
    o.seed = 99;
    w.synthetic = xaifn::generate_synthetic_corpus(o);
    const auto split = xaifn::split_corpus(w.synthetic.corpus, {0.8, 0.1, 0.1}, 3);
    const auto cfg = tiny_config();
    w.vocab = xaifn::build_vocabulary(w.synthetic.corpus.select(split.train), 1);
    const auto emb = xaifn::EmbeddingTable::random_init(w.vocab, 8, 1);
    w.train = xaifn::encode_stories(w.synthetic.corpus.select(split.train), w.vocab, cfg);
    w.test = xaifn::encode_stories(w.synthetic.corpus.select(split.test), w.vocab, cfg);
    xaifn::GbdtConfig g;
    g.n_trees = 10;
    w.ensemble.headline = xaifn::train_headline_model(w.train, w.vocab, emb, cfg);
    w.ensemble.hierarchical = xaifn::train_hierarchical_model(w.train, w.vocab, emb, cfg);
    w.ensemble.mimic = xaifn::train_mimic_model(w.train, w.vocab, emb, cfg, cfg, g);
    w.ensemble.article = xaifn::train_article_attention_model(w.train, w.vocab, emb, cfg);
    return w;
  }();
  return world;
}

}  // namespace testing_support
