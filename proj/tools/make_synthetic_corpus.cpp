// Writes a planted-signal corpus (claims.jsonl, articles.jsonl, truth.jsonl).
#include <CLI11.hpp>

#include <iostream>

#include "xaifn/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic corpus with planted label signals"};
  xaifn::SyntheticOptions o;
  std::string out;
  std::string signal = "triggers";
  app.add_option("--out", out)->required();
  app.add_option("--n-claims", o.n_claims);
  app.add_option("--articles", o.articles_per_story);
  app.add_option("--sentences", o.sentences_per_article);
  app.add_option("--neutral-rate", o.neutral_headline_rate);
  app.add_option("--signal", signal)->check(CLI::IsMember({"triggers", "source-only"}));
  app.add_option("--seed", o.seed);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  o.signal = signal == "triggers" ? xaifn::SyntheticOptions::Signal::Triggers
                                  : xaifn::SyntheticOptions::Signal::SourceOnly;
  try {
    const auto syn = xaifn::generate_synthetic_corpus(o);
    std::filesystem::create_directories(out);
    xaifn::write_jsonl(std::filesystem::path(out) / "claims.jsonl", syn.claims);
    xaifn::write_jsonl(std::filesystem::path(out) / "articles.jsonl", syn.articles);
    std::vector<xaifn::json> truth;
    for (const auto& [id, t] : syn.truth) {
      truth.push_back({{"story_id", id},
                       {"label", xaifn::to_string(t.label)},
                       {"headline_trigger_position", t.headline_trigger_position},
                       {"signal_article_id", t.signal_article_id},
                       {"signal_sentence_index", t.signal_sentence_index}});
    }
    xaifn::write_jsonl(std::filesystem::path(out) / "truth.jsonl", truth);
    xaifn::write_json(std::filesystem::path(out) / "options.json", o.to_json());
  } catch (const xaifn::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
