#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "xaifn/autodiff.hpp"
#include "xaifn/corpus.hpp"
#include "xaifn/gbdt.hpp"
#include "xaifn/textprep.hpp"

namespace xaifn {

struct ModelConfig {
  int hidden_size = 64;
  int epochs = 6;
  double learning_rate = 3e-3;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double dropout = 0.2;
  int embedding_dim = 100;
  int max_article_tokens = 120;
  SegmentBounds bounds{};

  void validate() const;
  json to_json() const;
  /// Keys absent from `j` keep the values of `base`.
  static ModelConfig from_json(const json& j, ModelConfig base);
  static ModelConfig from_json(const json& j);
};

struct EncodedArticle {
  std::string article_id;
  std::string source;
  SegmentedArticle segmented;
  std::vector<std::string> sentence_text;  // aligned with segmented.sentences
  std::vector<TokenId> flat;               // body tokens, truncated
  std::vector<std::string> flat_text;      // surface tokens aligned with `flat`
};

/// A story turned into model inputs once, shared by all detectors.
struct EncodedStory {
  std::string story_id;
  Label label = Label::True;
  std::vector<TokenId> headline;
  std::vector<std::string> headline_text;
  std::vector<EncodedArticle> articles;
};

EncodedStory encode_story(const NewsStory& story, const Vocabulary& vocab, const ModelConfig& cfg);
std::vector<EncodedStory> encode_stories(const std::vector<const NewsStory*>& stories,
                                         const Vocabulary& vocab, const ModelConfig& cfg);

struct Prediction {
  double score = 0.5;  // probability of FAKE
  Label label = Label::Fake;
  double headline_confidence = 0.5;
  double articles_confidence = 0.5;
};

struct TrainingLog {
  std::vector<double> epoch_loss;
  bool loss_decreased() const {
    return epoch_loss.size() >= 2 && epoch_loss.back() < epoch_loss.front();
  }
  json to_json() const { return {{"epoch_loss", epoch_loss}, {"loss_decreased", loss_decreased()}}; }
};

enum class DetectorKind { Headline, Hierarchical, Mimic, ArticleAttention };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view name);

/// Common surface of the four detectors.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorKind kind() const = 0;
  /// Probability that the story is FAKE.
  virtual double score(const EncodedStory& story) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual const ModelConfig& config() const = 0;
  virtual const TrainingLog& training_log() const = 0;
  virtual std::string weights_checksum() const = 0;

  /// Weights, config and vocabulary under `dir`; the model card is written by
  /// the caller since it depends on the evaluation split.
  virtual void save(const std::filesystem::path& dir) const = 0;
};

/// Shared base of the differentiable detectors.
class NeuralDetector : public Detector {
 public:
  NeuralDetector(Vocabulary vocab, ModelConfig cfg) : vocab_(std::move(vocab)), cfg_(cfg) {}

  const Vocabulary& vocabulary() const override { return vocab_; }
  const ModelConfig& config() const override { return cfg_; }
  const TrainingLog& training_log() const override { return log_; }
  std::string weights_checksum() const override { return params_.checksum(); }
  void save(const std::filesystem::path& dir) const override;

  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }
  void set_training_log(TrainingLog log) { log_ = std::move(log); }

  /// Logit of FAKE for one story. Dropout is applied only when `rng` is set.
  virtual ad::Var logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const = 0;

  /// Mean binary cross-entropy over `batch`.
  ad::Var loss(ad::Tape& tape, const std::vector<const EncodedStory*>& batch,
               std::mt19937_64* rng) const;

  double score(const EncodedStory& story) const override;

  /// Minibatch Adam over `train`; records per-epoch mean loss.
  const TrainingLog& fit(const std::vector<EncodedStory>& train);

 protected:
  /// Loss term of one story; binary cross-entropy of logit() by default.
  virtual ad::Var story_loss(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const;
  /// Extra fields stored in the artifact's config.json.
  virtual json artifact_extra() const { return json::object(); }

  ad::Var bilstm(ad::Tape& tape, ad::Var x, const std::string& prefix) const;
  ad::Var embed_tokens(ad::Tape& tape, const std::vector<TokenId>& ids) const;
  void add_bilstm(const std::string& prefix, int input, std::mt19937_64& rng);
  void add_embedding(const EmbeddingTable& table);

  Vocabulary vocab_;
  ModelConfig cfg_;
  mutable ad::ParameterSet params_;
  TrainingLog log_;
};

/// M1: BiLSTM over the headline with self-attention pooling.
class HeadlineModel : public NeuralDetector {
 public:
  HeadlineModel(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg);
  DetectorKind kind() const override { return DetectorKind::Headline; }
  ad::Var logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const override;

  /// Attention weight per headline token.
  std::vector<double> token_attention(const EncodedStory& story) const;

 private:
  ad::Var attention(ad::Tape& tape, ad::Var states) const;
};

/// M2: sentence-level and article-level attention over averaged word
/// embeddings, combined with a BiLSTM headline representation.
class HierarchicalModel : public NeuralDetector {
 public:
  HierarchicalModel(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg);
  DetectorKind kind() const override { return DetectorKind::Hierarchical; }
  ad::Var logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const override;

  struct Attention {
    std::vector<double> article;                // one weight per article
    std::vector<std::vector<double>> sentence;  // per article, one weight per sentence
  };
  Attention attention(const EncodedStory& story) const;

 private:
  ad::Var forward(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng,
                  std::vector<ad::Var>* sentence_att, ad::Var* article_att) const;
};

/// M4: BiLSTM over article tokens with headline-conditioned attention.
class ArticleAttentionModel : public NeuralDetector {
 public:
  ArticleAttentionModel(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg);
  DetectorKind kind() const override { return DetectorKind::ArticleAttention; }
  ad::Var logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const override;

  /// Per article, attention over its (truncated) body tokens.
  std::vector<std::vector<double>> token_attention(const EncodedStory& story) const;

 private:
  ad::Var forward(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng,
                  std::vector<ad::Var>* token_att) const;
};

/// Attribute groups of the mimic student.
enum class FeatureGroup { Claim = 0, Text = 1, Source = 2 };

/// Grouped feature layout for the tree student: headline token presence,
/// article token presence, and source-domain frequency + label prior.
class MimicFeatureSpace {
 public:
  MimicFeatureSpace() = default;
  static MimicFeatureSpace fit(const std::vector<EncodedStory>& train, std::size_t top_k);

  std::size_t width() const { return headline_tokens_.size() + article_tokens_.size() + 2; }
  /// Half-open column range of a group.
  std::pair<std::size_t, std::size_t> group_range(FeatureGroup g) const;
  /// Feature row for a (story, article) pair; article may be null.
  std::vector<double> row(const EncodedStory& story, const EncodedArticle* article) const;

  json to_json() const;
  static MimicFeatureSpace from_json(const json& j);

 private:
  std::vector<TokenId> headline_tokens_;
  std::vector<TokenId> article_tokens_;
  std::map<std::string, double> domain_frequency_;
  std::map<std::string, double> domain_prior_;
  double global_prior_ = 0.5;
};

/// Teacher of M3: BiLSTM over headline and article text plus a learned
/// source-domain embedding, scored per (story, article) pair.
class MimicTeacher : public NeuralDetector {
 public:
  MimicTeacher(Vocabulary vocab, const EmbeddingTable& embeddings, ModelConfig cfg,
               std::vector<std::string> domains);
  DetectorKind kind() const override { return DetectorKind::Mimic; }
  ad::Var logit(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const override;

  /// Pair logits for each article (or one headline-only pair).
  std::vector<ad::Var> pair_logits(ad::Tape& tape, const EncodedStory& story,
                                   std::mt19937_64* rng) const;
  std::vector<double> pair_scores(const EncodedStory& story) const;
  /// Mean of the pair probabilities.
  double score(const EncodedStory& story) const override;
  const std::vector<std::string>& domains() const { return domains_; }

 protected:
  ad::Var story_loss(ad::Tape& tape, const EncodedStory& story, std::mt19937_64* rng) const override;
  json artifact_extra() const override { return {{"domains", domains_}}; }

 private:
  int domain_id(const std::string& domain) const;
  std::vector<std::string> domains_;
  std::map<std::string, int> domain_index_;
};

struct StudentTargets {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
};

/// M3: the 60-tree student distilled from the teacher's soft scores.
class MimicModel : public Detector {
 public:
  MimicModel(std::unique_ptr<MimicTeacher> teacher, MimicFeatureSpace features,
             GradientBoostedTrees student, std::vector<double> feature_means);

  DetectorKind kind() const override { return DetectorKind::Mimic; }
  double score(const EncodedStory& story) const override;
  const Vocabulary& vocabulary() const override { return teacher_->vocabulary(); }
  const ModelConfig& config() const override { return teacher_->config(); }
  const TrainingLog& training_log() const override { return teacher_->training_log(); }
  std::string weights_checksum() const override;
  void save(const std::filesystem::path& dir) const override;

  const MimicTeacher& teacher() const { return *teacher_; }
  const GradientBoostedTrees& student() const { return student_; }
  const MimicFeatureSpace& features() const { return features_; }
  const std::vector<double>& feature_means() const { return feature_means_; }

  /// Student output for each pair of the story.
  std::vector<double> pair_scores(const EncodedStory& story) const;
  double teacher_score(const EncodedStory& story) const;
  /// Student prediction with one group's columns replaced by training means.
  double neutralized_score(const std::vector<double>& row, FeatureGroup group) const;

  /// Fraction of stories where student and teacher labels agree.
  double fidelity(const std::vector<EncodedStory>& stories) const;

  std::vector<std::string> warnings;

 private:
  std::unique_ptr<MimicTeacher> teacher_;
  MimicFeatureSpace features_;
  GradientBoostedTrees student_;
  std::vector<double> feature_means_;
};

// Training entry points. All require both labels in the training data.
std::unique_ptr<HeadlineModel> train_headline_model(const std::vector<EncodedStory>& train,
                                                    const Vocabulary& vocab,
                                                    const EmbeddingTable& embeddings,
                                                    const ModelConfig& cfg);
std::unique_ptr<HierarchicalModel> train_hierarchical_model(const std::vector<EncodedStory>& train,
                                                            const Vocabulary& vocab,
                                                            const EmbeddingTable& embeddings,
                                                            const ModelConfig& cfg);
std::unique_ptr<MimicModel> train_mimic_model(const std::vector<EncodedStory>& train,
                                              const Vocabulary& vocab,
                                              const EmbeddingTable& embeddings,
                                              const ModelConfig& cfg,
                                              const ModelConfig& teacher_cfg,
                                              GbdtConfig student_cfg = {});
std::unique_ptr<ArticleAttentionModel> train_article_attention_model(
    const std::vector<EncodedStory>& train, const Vocabulary& vocab,
    const EmbeddingTable& embeddings, const ModelConfig& cfg);

/// Throws SINGLE_CLASS when `train` lacks either label.
void require_both_labels(const std::vector<EncodedStory>& train);

struct EnsemblePrediction {
  std::array<double, 4> member_scores{};
  double score = 0.5;
  Label label = Label::Fake;
  double headline_confidence = 0.5;
  double articles_confidence = 0.5;
};

/// Averages member scores given in the order M1, M2, M3, M4.
EnsemblePrediction combine_members(const std::array<double, 4>& member_scores);

struct Ensemble {
  std::unique_ptr<HeadlineModel> headline;
  std::unique_ptr<HierarchicalModel> hierarchical;
  std::unique_ptr<MimicModel> mimic;
  std::unique_ptr<ArticleAttentionModel> article;

  /// Throws VOCAB_MISMATCH unless all members share one vocabulary.
  void check_vocabulary() const;
  const Vocabulary& vocabulary() const { return headline->vocabulary(); }
  std::array<const Detector*, 4> members() const {
    return {headline.get(), hierarchical.get(), mimic.get(), article.get()};
  }
};

EnsemblePrediction ensemble_predict(const Ensemble& ensemble, const EncodedStory& story);

struct AccuracyReport {
  std::size_t n = 0;
  std::size_t true_positive = 0;  // positive class is FAKE
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  double accuracy = 0.0;
  Rate precision;
  Rate recall;

  json to_json() const;
};

/// Scores are probabilities of FAKE, thresholded at 0.5.
AccuracyReport evaluate_scores(const std::vector<double>& scores, const std::vector<Label>& labels);
AccuracyReport evaluate(const Detector& model, const std::vector<EncodedStory>& stories);
AccuracyReport evaluate(const Ensemble& ensemble, const std::vector<EncodedStory>& stories);

// Model artifact directories.
inline constexpr int kArtifactVersion = 1;
std::unique_ptr<Detector> load_detector(const std::filesystem::path& dir);
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir);
void write_model_card(const std::filesystem::path& dir, const Detector& model,
                      const AccuracyReport& report, const std::string& split_name,
                      const std::vector<std::string>& warnings = {});

}  // namespace xaifn
