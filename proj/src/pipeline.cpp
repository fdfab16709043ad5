#include "xaifn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>

#include "xaifn/analysis.hpp"
#include "xaifn/detectors.hpp"
#include "xaifn/explain.hpp"
#include "xaifn/metrics.hpp"
#include "xaifn/service.hpp"
#include "xaifn/study.hpp"

namespace xaifn {

namespace fs = std::filesystem;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"ingest",  "split",  "train",    "eval",   "explain",
                                                 "curate",  "serve",  "simulate", "analyze"};
  return names;
}

json default_options(const std::string& command) {
  if (command == "ingest") return {{"claims", ""}, {"articles", ""}, {"out", ""}};
  if (command == "split") {
    return {{"corpus", ""}, {"out", ""}, {"seed", 7}, {"ratios", {0.8, 0.1, 0.1}}};
  }
  if (command == "train") {
    const ModelConfig m;
    const GbdtConfig g;
    return {{"corpus", ""},
            {"split", ""},
            {"out", ""},
            {"seed", 1},
            {"min_freq", 2},
            {"embeddings", ""},
            {"hidden_size", m.hidden_size},
            {"epochs", m.epochs},
            {"learning_rate", m.learning_rate},
            {"batch_size", m.batch_size},
            {"dropout", m.dropout},
            {"embedding_dim", m.embedding_dim},
            {"max_article_tokens", m.max_article_tokens},
            {"max_sentences", m.bounds.max_sentences},
            {"max_tokens_per_sentence", m.bounds.max_tokens_per_sentence},
            {"n_trees", g.n_trees},
            {"tree_depth", g.max_depth},
            {"tree_learning_rate", g.learning_rate}};
  }
  if (command == "eval") {
    return {{"models", ""}, {"corpus", ""}, {"split", ""}, {"subset", "test"}, {"out", ""}};
  }
  if (command == "explain") {
    return {{"models", ""}, {"corpus", ""}, {"split", ""}, {"subset", "test"}, {"epsilon", kDefaultHeatmapEpsilon},
            {"out", ""}};
  }
  if (command == "curate") {
    return {{"pool", ""}, {"length", 24}, {"seed", 0}, {"study_id", "study"}, {"allow_override", true}, {"out", ""}};
  }
  if (command == "serve") {
    return {{"study", ""}, {"store", ""}, {"host", "127.0.0.1"}, {"port", 8080}, {"assignment", "round-robin"},
            {"condition", "xai-all"}};
  }
  if (command == "simulate") {
    return {{"queue", ""}, {"condition", "xai-all"}, {"policy", "compliant"}, {"n", 40},  {"seed", 0},
            {"skip_prob", 0.0}, {"panel_open_prob", 0.9}, {"guess", "previous"}, {"out", ""}};
  }
  if (command == "analyze") {
    return {{"metrics", ""}, {"plan", "default"}, {"min_duration", 10.0}, {"levene_center", "mean"}, {"out", ""}};
  }
  throw Error("USAGE", "unknown command \"" + command + "\"");
}

json resolve_options(const std::string& command, const json& config, const json& flags) {
  json out = default_options(command);
  for (const json* layer : {&config, &flags}) {
    if (layer->is_null()) continue;
    if (!layer->is_object()) throw Error("USAGE", "options must be a JSON object");
    for (const auto& [k, v] : layer->items()) {
      if (!out.contains(k)) throw Error("USAGE", command + ": unknown option \"" + k + "\"");
      out[k] = v;
    }
  }
  return out;
}

std::string hash_path(const fs::path& path) {
  if (!fs::exists(path)) return "";
  if (fs::is_regular_file(path)) return fnv1a_hex(read_text(path));
  std::vector<std::string> parts;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    parts.push_back(fs::relative(entry.path(), path).generic_string() + ":" + fnv1a_hex(read_text(entry.path())));
  }
  std::sort(parts.begin(), parts.end());
  std::string all;
  for (const auto& p : parts) all += p + "\n";
  return fnv1a_hex(all);
}

namespace {

std::string need(const json& o, const char* key) {
  const std::string v = o.at(key).get<std::string>();
  if (v.empty()) throw Error("USAGE", std::string("--") + key + " is required");
  return v;
}

ModelConfig model_config(const json& o) {
  ModelConfig c;
  c.hidden_size = o.at("hidden_size").get<int>();
  c.epochs = o.at("epochs").get<int>();
  c.learning_rate = o.at("learning_rate").get<double>();
  c.batch_size = o.at("batch_size").get<int>();
  c.seed = o.at("seed").get<std::uint64_t>();
  c.dropout = o.at("dropout").get<double>();
  c.embedding_dim = o.at("embedding_dim").get<int>();
  c.max_article_tokens = o.at("max_article_tokens").get<int>();
  c.bounds.max_sentences = o.at("max_sentences").get<std::size_t>();
  c.bounds.max_tokens_per_sentence = o.at("max_tokens_per_sentence").get<std::size_t>();
  c.validate();
  return c;
}

struct Loaded {
  Corpus corpus;
  CorpusSplit split;
};

Loaded load_corpus_and_split(const json& o) {
  return {read_corpus_dir(need(o, "corpus")), split_from_json(read_json(need(o, "split")))};
}

std::vector<EncodedStory> encode_subset(const Loaded& l, const std::string& subset, const Vocabulary& vocab,
                                        const ModelConfig& cfg) {
  return encode_stories(l.corpus.select(l.split.named(subset)), vocab, cfg);
}

json run_ingest(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const Corpus corpus = ingest_corpus(need(o, "claims"), need(o, "articles"));
  write_corpus(corpus, out);
  const auto flagged = corpus.flagged_without_articles();
  write_json(out / "summary.json",
             {{"stories", corpus.size()},
              {"articles", corpus.article_count()},
              {"mean_articles_per_story",
               corpus.size() ? static_cast<double>(corpus.article_count()) / static_cast<double>(corpus.size()) : 0.0},
              {"flagged_without_articles", flagged}});
  outputs["corpus"] = out.string();
  return {};
}

json run_split(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const auto r = o.at("ratios").get<std::vector<double>>();
  if (r.size() != 3) throw Error("USAGE", "--ratios needs three numbers");
  const CorpusSplit split = split_corpus(read_corpus_dir(need(o, "corpus")), {r[0], r[1], r[2]},
                                         o.at("seed").get<std::uint64_t>());
  fs::create_directories(out);
  write_json(out / "split.json", split_to_json(split));
  outputs["split"] = (out / "split.json").string();
  return {{"seed", split.seed}};
}

json run_train(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const Loaded l = load_corpus_and_split(o);
  const ModelConfig cfg = model_config(o);
  const Vocabulary vocab = build_vocabulary(l.corpus.select(l.split.train), o.at("min_freq").get<std::size_t>());
  const std::string emb_file = o.at("embeddings").get<std::string>();
  const EmbeddingTable emb =
      emb_file.empty() ? EmbeddingTable::random_init(vocab, static_cast<std::size_t>(cfg.embedding_dim), cfg.seed)
                       : EmbeddingTable::load_pretrained(emb_file, vocab, cfg.seed);
  const auto train = encode_subset(l, "train", vocab, cfg);
  const auto validation = encode_subset(l, "validation", vocab, cfg);
  GbdtConfig g;
  g.n_trees = o.at("n_trees").get<int>();
  g.max_depth = o.at("tree_depth").get<int>();
  g.learning_rate = o.at("tree_learning_rate").get<double>();

  Ensemble e;
  e.headline = train_headline_model(train, vocab, emb, cfg);
  e.hierarchical = train_hierarchical_model(train, vocab, emb, cfg);
  e.mimic = train_mimic_model(train, vocab, emb, cfg, cfg, g);
  e.article = train_article_attention_model(train, vocab, emb, cfg);
  save_ensemble(e, out);
  json reports = json::object();
  for (const Detector* m : e.members()) {
    const AccuracyReport r = evaluate(*m, validation);
    const std::vector<std::string> warnings =
        m->kind() == DetectorKind::Mimic ? e.mimic->warnings : std::vector<std::string>{};
    write_model_card(out / to_string(m->kind()), *m, r, "validation", warnings);
    reports[to_string(m->kind())] = r.accuracy;
  }
  reports["ensemble"] = evaluate(e, validation).accuracy;
  outputs["models"] = out.string();
  return {{"seed", cfg.seed}, {"validation_accuracy", reports}, {"vocabulary_size", vocab.size()}};
}

json run_eval(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const Loaded l = load_corpus_and_split(o);
  const Ensemble e = load_ensemble(need(o, "models"));
  const std::string subset = o.at("subset").get<std::string>();
  const auto stories = encode_subset(l, subset, e.vocabulary(), e.headline->config());
  json report = {{"subset", subset}, {"stories", stories.size()}};
  for (const Detector* m : e.members()) report[to_string(m->kind())] = evaluate(*m, stories).to_json();
  report["ensemble"] = evaluate(e, stories).to_json();
  report["m3_fidelity"] = e.mimic->fidelity(stories);
  fs::create_directories(out);
  write_json(out / "eval.json", report);
  outputs["eval"] = (out / "eval.json").string();
  return {};
}

json run_explain(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const Loaded l = load_corpus_and_split(o);
  const Ensemble e = load_ensemble(need(o, "models"));
  const std::string subset = o.at("subset").get<std::string>();
  const double eps = o.at("epsilon").get<double>();
  const auto selected = l.corpus.select(l.split.named(subset));
  const auto stories = encode_stories(selected, e.vocabulary(), e.headline->config());
  std::vector<json> pool, bundles, predictions, publics;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    const auto& s = stories[i];
    const EnsemblePrediction p = ensemble_predict(e, s);
    std::vector<std::string> article_ids;
    for (const auto& a : s.articles) article_ids.push_back(a.article_id);
    pool.push_back({{"story_id", s.story_id}, {"label", to_string(s.label)}, {"score", p.score}, {"article_ids", article_ids}});
    predictions.push_back({{"story_id", s.story_id},
                           {"score", p.score},
                           {"label", to_string(p.label)},
                           {"member_scores", p.member_scores},
                           {"headline_confidence", p.headline_confidence},
                           {"articles_confidence", p.articles_confidence}});
    bundles.push_back(bundle_to_json(build_bundle(e, s, eps)));
    publics.push_back(public_story(*selected[i]));
  }
  fs::create_directories(out);
  write_jsonl(out / "pool.jsonl", pool);
  write_jsonl(out / "predictions.jsonl", predictions);
  write_jsonl(out / "bundles.jsonl", bundles);
  write_jsonl(out / "stories.jsonl", publics);
  outputs["pool"] = out.string();
  return {};
}

json run_curate(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const fs::path pool_dir = need(o, "pool");
  StudyMaterials m;
  m.study_id = o.at("study_id").get<std::string>();
  for (const auto& r : read_jsonl(pool_dir / "pool.jsonl")) {
    PoolItem p;
    p.story_id = r.at("story_id").get<std::string>();
    p.label = parse_label(r.at("label").get<std::string>());
    p.score = r.at("score").get<double>();
    p.article_ids = r.value("article_ids", std::vector<std::string>{});
    m.pool.push_back(std::move(p));
  }
  CurationOptions co;
  co.length = o.at("length").get<std::size_t>();
  co.seed = o.at("seed").get<std::uint64_t>();
  co.allow_override = o.at("allow_override").get<bool>();
  m.queue = curate_queue(m.pool, co);
  for (const auto& s : read_jsonl(pool_dir / "stories.jsonl")) m.stories[s.at("story_id").get<std::string>()] = s;
  for (const auto& b : read_jsonl(pool_dir / "bundles.jsonl")) {
    auto bundle = bundle_from_json(b);
    m.bundles[bundle.story_id] = std::move(bundle);
  }
  m.save(out);
  std::size_t overridden = 0;
  for (const auto& item : m.queue.items) overridden += item.overridden ? 1 : 0;
  outputs["study"] = out.string();
  return {{"seed", co.seed}, {"overridden", overridden}};
}

std::shared_ptr<const CuratedQueue> load_queue(const fs::path& p) {
  const fs::path file = fs::is_directory(p) ? p / "queue.jsonl" : p;
  return std::make_shared<const CuratedQueue>(CuratedQueue::from_records(read_jsonl(file)));
}

json run_simulate(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  const auto queue = load_queue(need(o, "queue"));
  std::vector<Condition> conditions;
  const std::string cond = o.at("condition").get<std::string>();
  if (cond == "all") {
    conditions.assign(kAllConditions.begin(), kAllConditions.end());
  } else {
    std::size_t start = 0;
    while (start <= cond.size()) {
      const std::size_t comma = cond.find(',', start);
      conditions.push_back(parse_condition(cond.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  SimulantPolicy policy = SimulantPolicy::parse(o.at("policy").get<std::string>());
  policy.skip_prob = o.at("skip_prob").get<double>();
  policy.panel_open_prob = o.at("panel_open_prob").get<double>();
  const std::string guess = o.at("guess").get<std::string>();
  if (guess == "previous") {
    policy.guess = SimulantPolicy::Guess::PreviousDisplayed;
  } else if (guess == "displayed") {
    policy.guess = SimulantPolicy::Guess::Displayed;
  } else if (guess == "random") {
    policy.guess = SimulantPolicy::Guess::Random;
  } else {
    throw Error("USAGE", "--guess must be previous, displayed or random");
  }
  const auto n = o.at("n").get<std::size_t>();
  const auto seed = o.at("seed").get<std::uint64_t>();
  fs::remove_all(out / "sessions");
  FileStore store(out / "sessions");
  std::vector<json> metrics;
  for (Condition c : conditions) {
    for (std::size_t i = 0; i < n; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "sim-%s-%04zu", to_string(c).c_str(), i);
      const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(c) * 10007ULL + i;
      const Session session = simulate_participant(queue, c, policy, s, id);
      store.create({id, "simulation", c});
      for (const auto& e : session.state().events) store.append(id, e);
      metrics.push_back(build_report(session).to_json());
    }
  }
  write_jsonl(out / "metrics.jsonl", metrics);
  outputs["sessions"] = (out / "sessions").string();
  outputs["metrics"] = (out / "metrics.jsonl").string();
  return {{"seed", seed}};
}

json run_analyze(const json& o, json& outputs) {
  const fs::path out = need(o, "out");
  AnalysisPlan plan = AnalysisPlan::by_name(o.at("plan").get<std::string>());
  plan.min_duration_minutes = o.at("min_duration").get<double>();
  const std::string center = o.at("levene_center").get<std::string>();
  if (center == "median") {
    plan.levene_center = stats::LeveneCenter::Median;
  } else if (center != "mean") {
    throw Error("USAGE", "--levene-center must be mean or median");
  }
  std::vector<MetricsReport> metrics;
  for (const auto& r : read_jsonl(need(o, "metrics"))) metrics.push_back(MetricsReport::from_json(r));
  const AnalysisReport report = analyze_study(metrics, plan);
  fs::create_directories(out);
  write_json(out / "analysis.json", report.to_json());
  write_text(out / "analysis.txt", report.summary());
  outputs["analysis"] = (out / "analysis.json").string();
  return {};
}

json run_serve(const json& o, json& outputs) {
  const fs::path store_dir = need(o, "store");
  StudyMaterials m = StudyMaterials::load(need(o, "study"));
  ServiceOptions so;
  const std::string assignment = o.at("assignment").get<std::string>();
  if (assignment == "fixed") {
    so.assignment = AssignmentPolicy::Fixed;
  } else if (assignment != "round-robin") {
    throw Error("USAGE", "--assignment must be fixed or round-robin");
  }
  so.fixed_condition = parse_condition(o.at("condition").get<std::string>());
  StudyService service(std::move(m), std::make_shared<FileStore>(store_dir), so);
  HttpFrontend http(service);
  const std::string host = o.at("host").get<std::string>();
  const int port = o.at("port").get<int>();
  outputs["store"] = store_dir.string();
  std::cerr << "serving study " << service.study_id() << " on http://" << host << ":" << port << "\n";
  http.run(host, port);
  return {};
}

std::vector<std::string> input_keys(const std::string& command) {
  if (command == "ingest") return {"claims", "articles"};
  if (command == "split") return {"corpus"};
  if (command == "train") return {"corpus", "split", "embeddings"};
  if (command == "eval" || command == "explain") return {"models", "corpus", "split"};
  if (command == "curate") return {"pool"};
  if (command == "serve") return {"study"};
  if (command == "simulate") return {"queue"};
  if (command == "analyze") return {"metrics"};
  return {};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

json run_command(const std::string& command, const json& options) {
  const json o = resolve_options(command, json::object(), options);
  json inputs = json::object();
  for (const auto& key : input_keys(command)) {
    const std::string p = o.at(key).get<std::string>();
    if (!p.empty()) inputs[p] = hash_path(p);
  }
  json manifest = {{"command", command}, {"options", o}, {"inputs", inputs}, {"started_at", utc_now()}};
  const fs::path manifest_dir = command == "serve" ? need(o, "store") : need(o, "out");
  if (command == "serve") {
    fs::create_directories(manifest_dir);
    write_json(manifest_dir / "manifest.json", manifest);
  }

  json outputs = json::object();
  json extra;
  if (command == "ingest") extra = run_ingest(o, outputs);
  else if (command == "split") extra = run_split(o, outputs);
  else if (command == "train") extra = run_train(o, outputs);
  else if (command == "eval") extra = run_eval(o, outputs);
  else if (command == "explain") extra = run_explain(o, outputs);
  else if (command == "curate") extra = run_curate(o, outputs);
  else if (command == "serve") extra = run_serve(o, outputs);
  else if (command == "simulate") extra = run_simulate(o, outputs);
  else if (command == "analyze") extra = run_analyze(o, outputs);

  json hashes = json::object();
  for (const auto& [k, v] : outputs.items()) hashes[v.get<std::string>()] = hash_path(v.get<std::string>());
  manifest["outputs"] = hashes;
  if (extra.is_object() && !extra.empty()) manifest["results"] = extra;
  if (o.contains("seed")) manifest["seeds"] = {{"seed", o.at("seed")}};
  fs::create_directories(manifest_dir);
  write_json(manifest_dir / "manifest.json", manifest);
  return manifest;
}

json replay_manifest(const fs::path& path) {
  const json m = read_json(path);
  if (!m.contains("command") || !m.contains("options")) {
    throw Error("BAD_MANIFEST", path.string() + ": manifest needs command and options");
  }
  return run_command(m.at("command").get<std::string>(), m.at("options"));
}

}  // namespace xaifn
