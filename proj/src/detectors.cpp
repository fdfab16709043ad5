#include "xaifn/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xaifn {

namespace {

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<double> to_vector(const ad::Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (hidden_size <= 0) throw Error("BAD_CONFIG", "hidden_size must be positive");
  if (epochs < 0) throw Error("BAD_CONFIG", "epochs must be nonnegative");
  if (batch_size <= 0) throw Error("BAD_CONFIG", "batch_size must be positive");
  if (learning_rate <= 0) throw Error("BAD_CONFIG", "learning_rate must be positive");
  if (dropout < 0 || dropout >= 1) throw Error("BAD_CONFIG", "dropout must be in [0, 1)");
  if (embedding_dim <= 0) throw Error("BAD_CONFIG", "embedding_dim must be positive");
  if (max_article_tokens <= 0) throw Error("BAD_CONFIG", "max_article_tokens must be positive");
}

json ModelConfig::to_json() const {
  return {{"hidden_size", hidden_size},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"seed", seed},
          {"dropout", dropout},
          {"embedding_dim", embedding_dim},
          {"max_article_tokens", max_article_tokens},
          {"max_sentences", bounds.max_sentences},
          {"max_tokens_per_sentence", bounds.max_tokens_per_sentence}};
}

ModelConfig ModelConfig::from_json(const json& j, ModelConfig c) {
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.dropout = j.value("dropout", c.dropout);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.max_article_tokens = j.value("max_article_tokens", c.max_article_tokens);
  c.bounds.max_sentences = j.value("max_sentences", c.bounds.max_sentences);
  c.bounds.max_tokens_per_sentence =
      j.value("max_tokens_per_sentence", c.bounds.max_tokens_per_sentence);
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_json(const json& j) { return from_json(j, ModelConfig{}); }

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Headline:
      return "m1";
    case DetectorKind::Hierarchical:
      return "m2";
    case DetectorKind::Mimic:
      return "m3";
    case DetectorKind::ArticleAttention:
      return "m4";
  }
  return "m1";
}

DetectorKind parse_detector_kind(std::string_view name) {
  if (name == "m1") return DetectorKind::Headline;
  if (name == "m2") return DetectorKind::Hierarchical;
  if (name == "m3") return DetectorKind::Mimic;
  if (name == "m4") return DetectorKind::ArticleAttention;
  throw Error("BAD_MODEL", "unknown model \"" + std::string(name) + "\"");
}

// ---------------------------------------------------------------- encoding

EncodedStory encode_story(const NewsStory& story, const Vocabulary& vocab, const ModelConfig& cfg) {
  EncodedStory e;
  e.story_id = story.story_id;
  e.label = story.label;
  for (auto& tok : tokenize(story.headline)) {
    if (e.headline.size() >= kMaxHeadlineTokens) break;
    e.headline.push_back(vocab.id(tok));
    e.headline_text.push_back(std::move(tok));
  }
  if (e.headline.empty()) e.headline.push_back(kUnknownId);

  const auto max_flat = static_cast<std::size_t>(cfg.max_article_tokens);
  for (const auto& a : story.articles) {
    EncodedArticle ea;
    ea.article_id = a.article_id;
    ea.source = a.source;
    std::vector<std::string> sentences = split_sentences(a.body);
    if (sentences.empty()) sentences = split_sentences(a.title);
    for (const auto& sentence : sentences) {
      if (ea.segmented.sentences.size() >= cfg.bounds.max_sentences) break;
      std::vector<TokenId> ids;
      for (auto& tok : tokenize(sentence)) {
        if (ids.size() >= cfg.bounds.max_tokens_per_sentence) break;
        ids.push_back(vocab.id(tok));
        if (ea.flat.size() < max_flat) {
          ea.flat.push_back(ids.back());
          ea.flat_text.push_back(tok);
        }
      }
      if (ids.empty()) continue;
      ea.segmented.sentences.push_back(std::move(ids));
      ea.sentence_text.push_back(sentence);
    }
    ea.segmented.max_sentences = cfg.bounds.max_sentences;
    ea.segmented.max_tokens_per_sentence = cfg.bounds.max_tokens_per_sentence;
    e.articles.push_back(std::move(ea));
  }
  return e;
}

std::vector<EncodedStory> encode_stories(const std::vector<const NewsStory*>& stories,
                                         const Vocabulary& vocab, const ModelConfig& cfg) {
  std::vector<EncodedStory> out;
  out.reserve(stories.size());
  for (const NewsStory* s : stories) out.push_back(encode_story(*s, vocab, cfg));
  return out;
}

void require_both_labels(const std::vector<EncodedStory>& train) {
  bool has_true = false;
  bool has_fake = false;
  for (const auto& s : train) {
    (s.label == Label::Fake ? has_fake : has_true) = true;
  }
  if (train.empty()) throw Error("EMPTY_TRAINING_SPLIT", "training split is empty");
  if (!has_true || !has_fake) {
    throw Error("SINGLE_CLASS", "training data must contain both TRUE and FAKE stories");
  }
}

// ---------------------------------------------------------------- neural base

void NeuralDetector::add_embedding(const EmbeddingTable& table) {
  if (static_cast<std::size_t>(table.vectors.rows()) != vocab_.size()) {
    throw Error("VOCAB_MISMATCH", "embedding rows do not match the vocabulary size");
  }
  cfg_.embedding_dim = static_cast<int>(table.vectors.cols());
  params_.add("embedding", table.vectors);
}

void NeuralDetector::add_bilstm(const std::string& prefix, int input, std::mt19937_64& rng) {
  const int h = cfg_.hidden_size;
  for (const char* dir : {".fw", ".bw"}) {
    params_.add_uniform(prefix + dir + ".W", input + h, 4 * h, rng);
    ad::Matrix bias = ad::Matrix::Zero(1, 4 * h);
    bias.block(0, h, 1, h).setOnes();  // forget gate
    params_.add(prefix + dir + ".b", std::move(bias));
  }
}

ad::Var NeuralDetector::bilstm(ad::Tape& tape, ad::Var x, const std::string& prefix) const {
  auto fw = ad::lstm(x, tape.param(params_.get(prefix + ".fw.W")),
                     tape.param(params_.get(prefix + ".fw.b")), false);
  auto bw = ad::lstm(x, tape.param(params_.get(prefix + ".bw.W")),
                     tape.param(params_.get(prefix + ".bw.b")), true);
  return ad::hcat(fw, bw);
}

ad::Var NeuralDetector::embed_tokens(ad::Tape& tape, const std::vector<TokenId>& ids) const {
  return ad::embed(tape, params_.get("embedding"), ids);
}

ad::Var NeuralDetector::loss(ad::Tape& tape, const std::vector<const EncodedStory*>& batch,
                             std::mt19937_64* rng) const {
  std::vector<ad::Var> terms;
  for (const EncodedStory* s : batch) terms.push_back(story_loss(tape, *s, rng));
  return ad::scale(ad::sum_all(ad::vcat(terms)), 1.0 / static_cast<double>(batch.size()));
}

ad::Var NeuralDetector::story_loss(ad::Tape& tape, const EncodedStory& story,
                                   std::mt19937_64* rng) const {
  return ad::bce_with_logit(logit(tape, story, rng), story.label == Label::Fake ? 1.0 : 0.0);
}

double NeuralDetector::score(const EncodedStory& story) const {
  ad::Tape tape;
  return sigmoid(logit(tape, story, nullptr).scalar());
}

const TrainingLog& NeuralDetector::fit(const std::vector<EncodedStory>& train) {
  require_both_labels(train);
  ad::Adam adam({.learning_rate = cfg_.learning_rate});
  std::mt19937_64 rng(cfg_.seed * 7919 + 17);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  params_.zero_grad();
  log_.epoch_loss.clear();
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const EncodedStory*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
        batch.push_back(&train[order[i]]);
      }
      ad::Tape tape;
      ad::Var l = loss(tape, batch, &rng);
      total += l.scalar() * static_cast<double>(batch.size());
      tape.backward(l);
      adam.step(params_);
    }
    log_.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }
  return log_;
}

// ---------------------------------------------------------------- M1

HeadlineModel::HeadlineModel(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg)
    : NeuralDetector(std::move(vocab), cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  add_embedding(embeddings);
  const int h = cfg_.hidden_size;
  const int d = cfg_.embedding_dim;
  add_bilstm("head", d, rng);
  params_.add_uniform("att.W", 2 * h + d, h, rng);
  params_.add("att.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("att.v", h, 1, rng);
  params_.add_uniform("out.w", d, 1, rng);
  params_.add("out.b", ad::Matrix::Zero(1, 1));
}

ad::Var HeadlineModel::attention(ad::Tape& tape, ad::Var states) const {
  auto u = ad::tanh(ad::add_row(ad::matmul(states, tape.param(params_.get("att.W"))),
                                tape.param(params_.get("att.b"))));
  return ad::softmax_col(ad::matmul(u, tape.param(params_.get("att.v"))));
}

// Attention is scored from the BiLSTM context but pools the word vectors
// themselves, so the weights point at the tokens the prediction depends on.
ad::Var HeadlineModel::logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const {
  auto words = embed_tokens(tape, story.headline);
  auto weights = attention(tape, ad::hcat(bilstm(tape, words, "head"), words));
  auto pooled = ad::matmul(ad::transpose(weights), words);
  if (rng) pooled = ad::dropout(pooled, cfg_.dropout, *rng);
  return ad::add(ad::matmul(pooled, tape.param(params_.get("out.w"))),
                 tape.param(params_.get("out.b")));
}

std::vector<double> HeadlineModel::token_attention(const EncodedStory& story) const {
  ad::Tape tape;
  auto words = embed_tokens(tape, story.headline);
  return to_vector(attention(tape, ad::hcat(bilstm(tape, words, "head"), words)).value());
}

// ---------------------------------------------------------------- M2

HierarchicalModel::HierarchicalModel(Vocabulary vocab, const EmbeddingTable& embeddings,
                                     ModelConfig cfg)
    : NeuralDetector(std::move(vocab), cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  add_embedding(embeddings);
  const int h = cfg_.hidden_size;
  const int d = cfg_.embedding_dim;
  add_bilstm("head", d, rng);
  params_.add_uniform("sent.W", d, h, rng);
  params_.add("sent.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("sent.ctx", h, 1, rng);
  params_.add_uniform("art.W", d, h, rng);
  params_.add("art.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("art.ctx", h, 1, rng);
  params_.add_uniform("mix.head", 2 * h, h, rng);
  params_.add_uniform("mix.doc", d, h, rng);
  params_.add("mix.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("out.w", h, 1, rng);
  params_.add("out.b", ad::Matrix::Zero(1, 1));
}

ad::Var HierarchicalModel::forward(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng,
                                   std::vector<ad::Var>* sentence_att,
                                   ad::Var* article_att) const {
  auto head = ad::mean_rows(bilstm(tape, embed_tokens(tape, story.headline), "head"));
  // During training the headline path is dropped for half the stories so the
  // article branch has to carry the label on its own.
  if (rng && !story.articles.empty() && std::bernoulli_distribution(0.5)(*rng)) {
    head = ad::scale(head, 0.0);
  }
  auto pre = ad::matmul(head, tape.param(params_.get("mix.head")));

  std::vector<ad::Var> article_vectors;
  for (const auto& article : story.articles) {
    if (article.segmented.sentences.empty()) {
      if (sentence_att) sentence_att->push_back(ad::Var{});
      continue;
    }
    auto sentences = ad::embed_bags(tape, params_.get("embedding"), article.segmented.sentences);
    auto u = ad::tanh(ad::add_row(ad::matmul(sentences, tape.param(params_.get("sent.W"))),
                                  tape.param(params_.get("sent.b"))));
    auto alpha = ad::softmax_col(ad::matmul(u, tape.param(params_.get("sent.ctx"))));
    if (sentence_att) sentence_att->push_back(alpha);
    article_vectors.push_back(ad::matmul(ad::transpose(alpha), sentences));
  }
  if (!article_vectors.empty()) {
    auto stacked = ad::vcat(article_vectors);
    auto u = ad::tanh(ad::add_row(ad::matmul(stacked, tape.param(params_.get("art.W"))),
                                  tape.param(params_.get("art.b"))));
    auto beta = ad::softmax_col(ad::matmul(u, tape.param(params_.get("art.ctx"))));
    if (article_att) *article_att = beta;
    auto doc = ad::matmul(ad::transpose(beta), stacked);
    pre = ad::add(pre, ad::matmul(doc, tape.param(params_.get("mix.doc"))));
  }
  auto hidden = ad::tanh(ad::add(pre, tape.param(params_.get("mix.b"))));
  if (rng) hidden = ad::dropout(hidden, cfg_.dropout, *rng);
  return ad::add(ad::matmul(hidden, tape.param(params_.get("out.w"))),
                 tape.param(params_.get("out.b")));
}

ad::Var HierarchicalModel::logit(ad::Tape& tape, const EncodedStory& story,
                                 std::mt19937_64* rng) const {
  return forward(tape, story, rng, nullptr, nullptr);
}

HierarchicalModel::Attention HierarchicalModel::attention(const EncodedStory& story) const {
  ad::Tape tape;
  std::vector<ad::Var> sentence_att;
  ad::Var article_att;
  forward(tape, story, nullptr, &sentence_att, &article_att);
  Attention out;
  std::vector<double> usable;
  if (article_att.tape) usable = to_vector(article_att.value());
  std::size_t k = 0;
  for (std::size_t a = 0; a < story.articles.size(); ++a) {
    if (sentence_att[a].tape) {
      out.article.push_back(usable[k++]);
      out.sentence.push_back(to_vector(sentence_att[a].value()));
    } else {
      out.article.push_back(0.0);
      out.sentence.emplace_back();
    }
  }
  return out;
}

// ---------------------------------------------------------------- M4

ArticleAttentionModel::ArticleAttentionModel(Vocabulary vocab, const EmbeddingTable& embeddings,
                                             ModelConfig cfg)
    : NeuralDetector(std::move(vocab), cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  add_embedding(embeddings);
  const int h = cfg_.hidden_size;
  const int d = cfg_.embedding_dim;
  add_bilstm("head", d, rng);
  add_bilstm("art", d, rng);
  params_.add_uniform("att.Wh", 2 * h, h, rng);
  params_.add_uniform("att.Wq", 2 * h, h, rng);
  params_.add("att.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("att.v", h, 1, rng);
  params_.add_uniform("fc.W", 4 * h, h, rng);
  params_.add("fc.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("out.w", h, 1, rng);
  params_.add("out.b", ad::Matrix::Zero(1, 1));
}

ad::Var ArticleAttentionModel::forward(ad::Tape& tape, const EncodedStory& story,
                                       std::mt19937_64* rng,
                                       std::vector<ad::Var>* token_att) const {
  const int h = cfg_.hidden_size;
  auto head = ad::mean_rows(bilstm(tape, embed_tokens(tape, story.headline), "head"));
  auto query = ad::add(ad::matmul(head, tape.param(params_.get("att.Wq"))),
                       tape.param(params_.get("att.b")));
  std::vector<ad::Var> contexts;
  for (const auto& article : story.articles) {
    if (article.flat.empty()) {
      if (token_att) token_att->push_back(ad::Var{});
      continue;
    }
    auto states = bilstm(tape, embed_tokens(tape, article.flat), "art");
    auto u = ad::tanh(ad::add_row(ad::matmul(states, tape.param(params_.get("att.Wh"))), query));
    auto alpha = ad::softmax_col(ad::matmul(u, tape.param(params_.get("att.v"))));
    if (token_att) token_att->push_back(alpha);
    contexts.push_back(ad::matmul(ad::transpose(alpha), states));
  }
  ad::Var context = contexts.empty() ? tape.constant(ad::Matrix::Zero(1, 2 * h))
                                     : ad::mean_rows(ad::vcat(contexts));
  auto joined = ad::hcat(head, context);
  if (rng) joined = ad::dropout(joined, cfg_.dropout, *rng);
  auto hidden = ad::tanh(ad::add(ad::matmul(joined, tape.param(params_.get("fc.W"))),
                                 tape.param(params_.get("fc.b"))));
  return ad::add(ad::matmul(hidden, tape.param(params_.get("out.w"))),
                 tape.param(params_.get("out.b")));
}

ad::Var ArticleAttentionModel::logit(ad::Tape& tape, const EncodedStory& story,
                                     std::mt19937_64* rng) const {
  return forward(tape, story, rng, nullptr);
}

std::vector<std::vector<double>> ArticleAttentionModel::token_attention(
    const EncodedStory& story) const {
  ad::Tape tape;
  std::vector<ad::Var> att;
  forward(tape, story, nullptr, &att);
  std::vector<std::vector<double>> out;
  for (const auto& a : att) out.push_back(a.tape ? to_vector(a.value()) : std::vector<double>{});
  return out;
}

// ---------------------------------------------------------------- training entry points

std::unique_ptr<HeadlineModel> train_headline_model(const std::vector<EncodedStory>& train,
                                                    const Vocabulary& vocab,
                                                    const EmbeddingTable& embeddings,
                                                    const ModelConfig& cfg) {
  require_both_labels(train);
  auto m = std::make_unique<HeadlineModel>(vocab, embeddings, cfg);
  m->fit(train);
  return m;
}

std::unique_ptr<HierarchicalModel> train_hierarchical_model(const std::vector<EncodedStory>& train,
                                                            const Vocabulary& vocab,
                                                            const EmbeddingTable& embeddings,
                                                            const ModelConfig& cfg) {
  require_both_labels(train);
  auto m = std::make_unique<HierarchicalModel>(vocab, embeddings, cfg);
  m->fit(train);
  return m;
}

std::unique_ptr<ArticleAttentionModel> train_article_attention_model(
    const std::vector<EncodedStory>& train, const Vocabulary& vocab,
    const EmbeddingTable& embeddings, const ModelConfig& cfg) {
  require_both_labels(train);
  auto m = std::make_unique<ArticleAttentionModel>(vocab, embeddings, cfg);
  m->fit(train);
  return m;
}

// ---------------------------------------------------------------- ensemble + evaluation

EnsemblePrediction combine_members(const std::array<double, 4>& member_scores) {
  EnsemblePrediction p;
  p.member_scores = member_scores;
  double sum = 0.0;
  for (double s : member_scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error("BAD_SCORE", "member score outside [0, 1]");
    sum += s;
  }
  p.score = sum / 4.0;
  p.label = label_from_score(p.score);
  p.headline_confidence = confidence_from_score(member_scores[0]);
  p.articles_confidence =
      0.5 * (confidence_from_score(member_scores[1]) + confidence_from_score(member_scores[3]));
  return p;
}

void Ensemble::check_vocabulary() const {
  if (!headline || !hierarchical || !mimic || !article) {
    throw Error("INCOMPLETE_ENSEMBLE", "ensemble needs all four models");
  }
  const std::string h = headline->vocabulary().hash();
  for (const Detector* m : members()) {
    if (m->vocabulary().hash() != h) {
      throw Error("VOCAB_MISMATCH", "ensemble members were trained on different vocabularies");
    }
  }
}

EnsemblePrediction ensemble_predict(const Ensemble& ensemble, const EncodedStory& story) {
  std::array<double, 4> scores{};
  const auto members = ensemble.members();
  for (std::size_t i = 0; i < 4; ++i) scores[i] = members[i]->score(story);
  return combine_members(scores);
}

json AccuracyReport::to_json() const {
  auto rate = [](const Rate& r) -> json {
    json j = {{"numerator", r.numerator}, {"denominator", r.denominator}};
    j["value"] = r.value ? json(*r.value) : json(nullptr);
    return j;
  };
  return {{"n", n},
          {"accuracy", accuracy},
          {"precision", rate(precision)},
          {"recall", rate(recall)},
          {"confusion",
           {{"true_positive", true_positive},
            {"true_negative", true_negative},
            {"false_positive", false_positive},
            {"false_negative", false_negative}}}};
}

AccuracyReport evaluate_scores(const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.size() != labels.size()) throw Error("SHAPE", "scores and labels differ in length");
  if (scores.empty()) throw Error("EMPTY_SPLIT", "cannot evaluate on an empty split");
  AccuracyReport r;
  r.n = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_fake = label_from_score(scores[i]) == Label::Fake;
    const bool fake = labels[i] == Label::Fake;
    if (predicted_fake && fake) ++r.true_positive;
    if (!predicted_fake && !fake) ++r.true_negative;
    if (predicted_fake && !fake) ++r.false_positive;
    if (!predicted_fake && fake) ++r.false_negative;
  }
  r.accuracy = static_cast<double>(r.true_positive + r.true_negative) / static_cast<double>(r.n);
  r.precision = Rate::of(static_cast<std::int64_t>(r.true_positive),
                         static_cast<std::int64_t>(r.true_positive + r.false_positive));
  r.recall = Rate::of(static_cast<std::int64_t>(r.true_positive),
                      static_cast<std::int64_t>(r.true_positive + r.false_negative));
  return r;
}

AccuracyReport evaluate(const Detector& model, const std::vector<EncodedStory>& stories) {
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& s : stories) {
    scores.push_back(model.score(s));
    labels.push_back(s.label);
  }
  return evaluate_scores(scores, labels);
}

AccuracyReport evaluate(const Ensemble& ensemble, const std::vector<EncodedStory>& stories) {
  std::vector<double> scores;
  std::vector<Label> labels;
  for (const auto& s : stories) {
    scores.push_back(ensemble_predict(ensemble, s).score);
    labels.push_back(s.label);
  }
  return evaluate_scores(scores, labels);
}

}  // namespace xaifn
