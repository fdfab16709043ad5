#include <fstream>

#include "xaifn/detectors.hpp"

namespace xaifn {

namespace fs = std::filesystem;

namespace {

json read_artifact_config(const fs::path& dir) {
  const json cfg = read_json(dir / "config.json");
  if (cfg.value("version", 0) != kArtifactVersion) {
    throw Error("BAD_ARTIFACT", dir.string() + ": unsupported artifact version");
  }
  return cfg;
}

template <class Model, class... Extra>
std::unique_ptr<Model> load_neural(const fs::path& dir, const json& cfg, Extra&&... extra) {
  Vocabulary vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
  if (vocab.hash() != cfg.at("vocab_hash").get<std::string>()) {
    throw Error("VOCAB_MISMATCH", dir.string() + ": vocabulary hash does not match config");
  }
  const ModelConfig mc = ModelConfig::from_json(cfg.at("config"));
  const EmbeddingTable placeholder =
      EmbeddingTable::random_init(vocab, static_cast<std::size_t>(mc.embedding_dim), 0);
  auto model = std::make_unique<Model>(vocab, placeholder, mc, std::forward<Extra>(extra)...);
  model->parameters().load_json(read_json(dir / "weights.json"));
  TrainingLog log;
  if (cfg.contains("training_log")) {
    log.epoch_loss = cfg.at("training_log").at("epoch_loss").get<std::vector<double>>();
  }
  model->set_training_log(std::move(log));
  return model;
}

}  // namespace

void NeuralDetector::save(const fs::path& dir) const {
  fs::create_directories(dir);
  json cfg = {{"version", kArtifactVersion},
              {"kind", to_string(kind())},
              {"config", cfg_.to_json()},
              {"vocab_hash", vocab_.hash()},
              {"weights_checksum", weights_checksum()},
              {"training_log", log_.to_json()}};
  const json extra = artifact_extra();
  for (auto& [k, v] : extra.items()) cfg[k] = v;
  write_json(dir / "config.json", cfg);
  write_text(dir / "weights.json", params_.to_json().dump() + "\n");
  write_text(dir / "vocab.json", vocab_.to_json().dump() + "\n");
}

void MimicModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  teacher_->save(dir / "teacher");
  json cfg = {{"version", kArtifactVersion},
              {"kind", to_string(kind())},
              {"config", teacher_->config().to_json()},
              {"vocab_hash", vocabulary().hash()},
              {"weights_checksum", weights_checksum()},
              {"warnings", warnings}};
  write_json(dir / "config.json", cfg);
  write_text(dir / "student.json", student_.to_json().dump() + "\n");
  write_text(dir / "features.json",
             json{{"space", features_.to_json()}, {"means", feature_means_}}.dump() + "\n");
}

std::unique_ptr<Detector> load_detector(const fs::path& dir) {
  const json cfg = read_artifact_config(dir);
  switch (parse_detector_kind(cfg.at("kind").get<std::string>())) {
    case DetectorKind::Headline:
      return load_neural<HeadlineModel>(dir, cfg);
    case DetectorKind::Hierarchical:
      return load_neural<HierarchicalModel>(dir, cfg);
    case DetectorKind::ArticleAttention:
      return load_neural<ArticleAttentionModel>(dir, cfg);
    case DetectorKind::Mimic: {
      const fs::path tdir = dir / "teacher";
      const json tcfg = read_artifact_config(tdir);
      auto teacher = load_neural<MimicTeacher>(
          tdir, tcfg, tcfg.at("domains").get<std::vector<std::string>>());
      const json feats = read_json(dir / "features.json");
      auto model = std::make_unique<MimicModel>(
          std::move(teacher), MimicFeatureSpace::from_json(feats.at("space")),
          GradientBoostedTrees::from_json(read_json(dir / "student.json")),
          feats.at("means").get<std::vector<double>>());
      model->warnings = cfg.value("warnings", std::vector<std::string>{});
      return model;
    }
  }
  throw Error("BAD_ARTIFACT", dir.string() + ": unknown model kind");
}

void save_ensemble(const Ensemble& ensemble, const fs::path& dir) {
  ensemble.check_vocabulary();
  fs::create_directories(dir);
  json members = json::object();
  for (const Detector* m : ensemble.members()) {
    const std::string name = to_string(m->kind());
    m->save(dir / name);
    members[name] = m->weights_checksum();
  }
  write_json(dir / "ensemble.json", {{"version", kArtifactVersion},
                                     {"kind", "ensemble"},
                                     {"vocab_hash", ensemble.vocabulary().hash()},
                                     {"members", members}});
}

Ensemble load_ensemble(const fs::path& dir) {
  const json manifest = read_json(dir / "ensemble.json");
  if (manifest.value("kind", "") != "ensemble") {
    throw Error("BAD_ARTIFACT", dir.string() + ": not an ensemble directory");
  }
  auto take = [&](const char* name) { return load_detector(dir / name); };
  auto cast = [](std::unique_ptr<Detector> d, auto* tag) {
    using T = std::remove_pointer_t<decltype(tag)>;
    auto* raw = dynamic_cast<T*>(d.get());
    if (!raw) throw Error("BAD_ARTIFACT", "ensemble member has the wrong kind");
    d.release();
    return std::unique_ptr<T>(raw);
  };
  Ensemble e;
  e.headline = cast(take("m1"), static_cast<HeadlineModel*>(nullptr));
  e.hierarchical = cast(take("m2"), static_cast<HierarchicalModel*>(nullptr));
  e.mimic = cast(take("m3"), static_cast<MimicModel*>(nullptr));
  e.article = cast(take("m4"), static_cast<ArticleAttentionModel*>(nullptr));
  e.check_vocabulary();
  return e;
}

void write_model_card(const fs::path& dir, const Detector& model, const AccuracyReport& report,
                      const std::string& split_name, const std::vector<std::string>& warnings) {
  write_json(dir / "model_card.json", {{"version", kArtifactVersion},
                                       {"kind", to_string(model.kind())},
                                       {"vocab_hash", model.vocabulary().hash()},
                                       {"weights_checksum", model.weights_checksum()},
                                       {"config", model.config().to_json()},
                                       {"training_log", model.training_log().to_json()},
                                       {"evaluation", {{"split", split_name}, {"report", report.to_json()}}},
                                       {"warnings", warnings}});
}

}  // namespace xaifn
