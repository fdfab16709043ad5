#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xaifn/detectors.hpp"

namespace xaifn {

namespace {

constexpr int kSourceEmbeddingDim = 8;

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<const EncodedArticle*> usable_articles(const EncodedStory& story) {
  std::vector<const EncodedArticle*> out;
  for (const auto& a : story.articles) {
    if (!a.flat.empty()) out.push_back(&a);
  }
  return out;
}

std::vector<TokenId> top_by_document_frequency(const std::map<TokenId, std::size_t>& df,
                                               std::size_t k) {
  std::vector<std::pair<TokenId, std::size_t>> items(df.begin(), df.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < std::min(k, items.size()); ++i) out.push_back(items[i].first);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------- feature space

MimicFeatureSpace MimicFeatureSpace::fit(const std::vector<EncodedStory>& train, std::size_t top_k) {
  std::map<TokenId, std::size_t> head_df, art_df;
  std::map<std::string, std::pair<std::size_t, std::size_t>> domain_counts;  // (fake, total)
  std::size_t fake_articles = 0;
  std::size_t total_articles = 0;
  std::size_t fake_stories = 0;
  for (const auto& s : train) {
    if (s.label == Label::Fake) ++fake_stories;
    for (TokenId t : std::set<TokenId>(s.headline.begin(), s.headline.end())) {
      if (t != kUnknownId && t != kPadId) ++head_df[t];
    }
    for (const auto& a : s.articles) {
      for (TokenId t : std::set<TokenId>(a.flat.begin(), a.flat.end())) {
        if (t != kUnknownId && t != kPadId) ++art_df[t];
      }
      auto& c = domain_counts[a.source];
      c.second += 1;
      ++total_articles;
      if (s.label == Label::Fake) {
        c.first += 1;
        ++fake_articles;
      }
    }
  }
  MimicFeatureSpace fs;
  fs.headline_tokens_ = top_by_document_frequency(head_df, top_k);
  fs.article_tokens_ = top_by_document_frequency(art_df, top_k);
  fs.global_prior_ = total_articles > 0
                         ? static_cast<double>(fake_articles) / static_cast<double>(total_articles)
                         : (train.empty() ? 0.5
                                          : static_cast<double>(fake_stories) /
                                                static_cast<double>(train.size()));
  for (const auto& [domain, c] : domain_counts) {
    fs.domain_frequency_[domain] =
        static_cast<double>(c.second) / static_cast<double>(total_articles);
    fs.domain_prior_[domain] =
        (static_cast<double>(c.first) + 1.0) / (static_cast<double>(c.second) + 2.0);
  }
  return fs;
}

std::pair<std::size_t, std::size_t> MimicFeatureSpace::group_range(FeatureGroup g) const {
  const std::size_t h = headline_tokens_.size();
  const std::size_t a = article_tokens_.size();
  switch (g) {
    case FeatureGroup::Claim:
      return {0, h};
    case FeatureGroup::Text:
      return {h, h + a};
    case FeatureGroup::Source:
      return {h + a, h + a + 2};
  }
  return {0, 0};
}

std::vector<double> MimicFeatureSpace::row(const EncodedStory& story,
                                           const EncodedArticle* article) const {
  std::vector<double> out(width(), 0.0);
  const std::set<TokenId> head(story.headline.begin(), story.headline.end());
  for (std::size_t i = 0; i < headline_tokens_.size(); ++i) {
    if (head.count(headline_tokens_[i])) out[i] = 1.0;
  }
  const std::size_t off = headline_tokens_.size();
  if (article) {
    const std::set<TokenId> body(article->flat.begin(), article->flat.end());
    for (std::size_t i = 0; i < article_tokens_.size(); ++i) {
      if (body.count(article_tokens_[i])) out[off + i] = 1.0;
    }
  }
  const std::size_t src = off + article_tokens_.size();
  out[src + 1] = global_prior_;
  if (article) {
    if (auto it = domain_frequency_.find(article->source); it != domain_frequency_.end()) {
      out[src] = it->second;
      out[src + 1] = domain_prior_.at(article->source);
    }
  }
  return out;
}

json MimicFeatureSpace::to_json() const {
  return {{"headline_tokens", headline_tokens_},
          {"article_tokens", article_tokens_},
          {"domain_frequency", domain_frequency_},
          {"domain_prior", domain_prior_},
          {"global_prior", global_prior_}};
}

MimicFeatureSpace MimicFeatureSpace::from_json(const json& j) {
  MimicFeatureSpace fs;
  fs.headline_tokens_ = j.at("headline_tokens").get<std::vector<TokenId>>();
  fs.article_tokens_ = j.at("article_tokens").get<std::vector<TokenId>>();
  fs.domain_frequency_ = j.at("domain_frequency").get<std::map<std::string, double>>();
  fs.domain_prior_ = j.at("domain_prior").get<std::map<std::string, double>>();
  fs.global_prior_ = j.at("global_prior").get<double>();
  return fs;
}

// ---------------------------------------------------------------- teacher

MimicTeacher::MimicTeacher(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg,
                           std::vector<std::string> domains)
    : NeuralDetector(std::move(vocab), cfg), domains_(std::move(domains)) {
  cfg_.validate();
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    domain_index_[domains_[i]] = static_cast<int>(i) + 1;
  }
  std::mt19937_64 rng(cfg_.seed + 3);
  add_embedding(embeddings);
  const int h = cfg_.hidden_size;
  const int d = cfg_.embedding_dim;
  add_bilstm("head", d, rng);
  add_bilstm("art", d, rng);
  params_.add_uniform("source", static_cast<Eigen::Index>(domains_.size()) + 1,
                      kSourceEmbeddingDim, rng);
  params_.add_uniform("fc.W", 4 * h + kSourceEmbeddingDim, h, rng);
  params_.add("fc.b", ad::Matrix::Zero(1, h));
  params_.add_uniform("out.w", h, 1, rng);
  params_.add("out.b", ad::Matrix::Zero(1, 1));
}

int MimicTeacher::domain_id(const std::string& domain) const {
  auto it = domain_index_.find(domain);
  return it == domain_index_.end() ? 0 : it->second;
}

std::vector<ad::Var> MimicTeacher::pair_logits(ad::Tape& tape, const EncodedStory& story,
                                               std::mt19937_64* rng) const {
  const int h = cfg_.hidden_size;
  auto head = ad::mean_rows(bilstm(tape, embed_tokens(tape, story.headline), "head"));
  auto score_pair = [&](ad::Var text, int source) {
    const std::int32_t src[] = {source};
    auto src_vec = ad::embed(tape, params_.get("source"), src);
    auto joined = ad::hcat(ad::hcat(head, text), src_vec);
    if (rng) joined = ad::dropout(joined, cfg_.dropout, *rng);
    auto hidden = ad::tanh(ad::add(ad::matmul(joined, tape.param(params_.get("fc.W"))),
                                   tape.param(params_.get("fc.b"))));
    return ad::add(ad::matmul(hidden, tape.param(params_.get("out.w"))),
                   tape.param(params_.get("out.b")));
  };
  std::vector<ad::Var> out;
  for (const EncodedArticle* a : usable_articles(story)) {
    auto text = ad::mean_rows(bilstm(tape, embed_tokens(tape, a->flat), "art"));
    out.push_back(score_pair(text, domain_id(a->source)));
  }
  if (out.empty()) out.push_back(score_pair(tape.constant(ad::Matrix::Zero(1, 2 * h)), 0));
  return out;
}

ad::Var MimicTeacher::logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const {
  auto logits = pair_logits(tape, story, rng);
  return ad::mean_rows(ad::vcat(logits));
}

ad::Var MimicTeacher::story_loss(ad::Tape& tape, const EncodedStory& story,
                                 std::mt19937_64* rng) const {
  const double target = story.label == Label::Fake ? 1.0 : 0.0;
  std::vector<ad::Var> terms;
  for (auto l : pair_logits(tape, story, rng)) terms.push_back(ad::bce_with_logit(l, target));
  return ad::mean_rows(ad::vcat(terms));
}

std::vector<double> MimicTeacher::pair_scores(const EncodedStory& story) const {
  ad::Tape tape;
  std::vector<double> out;
  for (auto l : pair_logits(tape, story, nullptr)) out.push_back(sigmoid(l.scalar()));
  return out;
}

double MimicTeacher::score(const EncodedStory& story) const {
  const auto s = pair_scores(story);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

// ---------------------------------------------------------------- student

MimicModel::MimicModel(std::unique_ptr<MimicTeacher> teacher, MimicFeatureSpace features,
                       GradientBoostedTrees student, std::vector<double> feature_means)
    : teacher_(std::move(teacher)),
      features_(std::move(features)),
      student_(std::move(student)),
      feature_means_(std::move(feature_means)) {}

std::vector<double> MimicModel::pair_scores(const EncodedStory& story) const {
  std::vector<double> out;
  const auto articles = usable_articles(story);
  if (articles.empty()) {
    out.push_back(std::clamp(student_.predict(features_.row(story, nullptr)), 0.0, 1.0));
  }
  for (const EncodedArticle* a : articles) {
    out.push_back(std::clamp(student_.predict(features_.row(story, a)), 0.0, 1.0));
  }
  return out;
}

double MimicModel::score(const EncodedStory& story) const {
  const auto s = pair_scores(story);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double MimicModel::teacher_score(const EncodedStory& story) const { return teacher_->score(story); }

double MimicModel::neutralized_score(const std::vector<double>& row, FeatureGroup group) const {
  std::vector<double> x = row;
  const auto [lo, hi] = features_.group_range(group);
  for (std::size_t i = lo; i < hi; ++i) x[i] = feature_means_[i];
  return student_.predict(x);
}

double MimicModel::fidelity(const std::vector<EncodedStory>& stories) const {
  if (stories.empty()) throw Error("EMPTY_SPLIT", "fidelity needs at least one story");
  std::size_t agree = 0;
  for (const auto& s : stories) {
    if (label_from_score(score(s)) == label_from_score(teacher_score(s))) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(stories.size());
}

std::string MimicModel::weights_checksum() const {
  return fnv1a_hex(teacher_->weights_checksum() + student_.to_json().dump());
}

std::unique_ptr<MimicModel> train_mimic_model(const std::vector<EncodedStory>& train,
                                              const Vocabulary& vocab,
                                              const EmbeddingTable& embeddings,
                                              const ModelConfig& cfg,
                                              const ModelConfig& teacher_cfg,
                                              GbdtConfig student_cfg) {
  require_both_labels(train);
  cfg.validate();
  std::set<std::string> domain_set;
  for (const auto& s : train) {
    for (const auto& a : s.articles) domain_set.insert(a.source);
  }
  auto teacher = std::make_unique<MimicTeacher>(
      vocab, embeddings, teacher_cfg, std::vector<std::string>(domain_set.begin(), domain_set.end()));
  teacher->fit(train);
  std::vector<std::string> warnings;
  if (!teacher->training_log().loss_decreased()) {
    warnings.push_back("teacher training loss did not decrease; teacher may not have converged");
  }

  MimicFeatureSpace features = MimicFeatureSpace::fit(train, 200);
  StudentTargets data;
  for (const auto& s : train) {
    const auto targets = teacher->pair_scores(s);
    const auto articles = usable_articles(s);
    if (articles.empty()) {
      data.rows.push_back(features.row(s, nullptr));
      data.targets.push_back(targets.front());
    }
    for (std::size_t i = 0; i < articles.size(); ++i) {
      data.rows.push_back(features.row(s, articles[i]));
      data.targets.push_back(targets[i]);
    }
  }
  std::vector<double> means(features.width(), 0.0);
  for (const auto& r : data.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) means[i] += r[i];
  }
  for (double& m : means) m /= static_cast<double>(data.rows.size());

  GradientBoostedTrees student(student_cfg);
  student.fit(data.rows, data.targets);
  auto model = std::make_unique<MimicModel>(std::move(teacher), std::move(features),
                                            std::move(student), std::move(means));
  model->warnings = std::move(warnings);
  return model;
}

}  // namespace xaifn
