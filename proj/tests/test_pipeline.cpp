#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "xaifn/pipeline.hpp"

using namespace xaifn;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(XAIFN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string usage_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Options, DefaultsThenConfigThenFlags) {
  const json d = default_options("split");
  EXPECT_EQ(d["seed"], 7);
  const json c = resolve_options("split", {{"seed", 11}, {"out", "a"}}, json::object());
  EXPECT_EQ(c["seed"], 11);
  EXPECT_EQ(c["out"], "a");
  const json f = resolve_options("split", {{"seed", 11}, {"out", "a"}}, {{"seed", 12}});
  EXPECT_EQ(f["seed"], 12);
  EXPECT_EQ(f["out"], "a");
  EXPECT_EQ(f["ratios"], d["ratios"]);
}

TEST(Options, UnknownKeysAndCommands) {
  EXPECT_EQ(usage_code([] { resolve_options("split", {{"sed", 1}}, json::object()); }), "USAGE");
  EXPECT_EQ(usage_code([] { resolve_options("split", json::object(), {{"bogus", 1}}); }), "USAGE");
  EXPECT_EQ(usage_code([] { default_options("frobnicate"); }), "USAGE");
  EXPECT_EQ(usage_code([] { run_command("split", {{"corpus", "x"}}); }), "USAGE");
  for (const auto& name : command_names()) EXPECT_TRUE(default_options(name).is_object()) << name;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("split --no-such-flag 1"), 2);
  EXPECT_EQ(run("split --corpus /nonexistent"), 2);
  EXPECT_EQ(run("split --seed notanumber --corpus x --out y"), 2);
  const fs::path out = fs::temp_directory_path() / ("xaifn_cli_exit_" + std::to_string(::getpid()));
  EXPECT_EQ(run("split --corpus /nonexistent/corpus --out " + out.string()), 1);
  fs::remove_all(out);
}

TEST(HashPath, DirectoryHashIgnoresManifestAndTracksContent) {
  const fs::path dir = fs::temp_directory_path() / ("xaifn_hash_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir / "sub");
  write_text(dir / "sub" / "a.txt", "one");
  const std::string h1 = hash_path(dir);
  write_text(dir / "manifest.json", "{}");
  EXPECT_EQ(hash_path(dir), h1);
  write_text(dir / "sub" / "a.txt", "two");
  EXPECT_NE(hash_path(dir), h1);
  EXPECT_EQ(hash_path(dir / "missing"), "");
  fs::remove_all(dir);
}

/// Runs the whole pipeline once through the CLI on a small synthetic corpus.
class EndToEnd : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("xaifn_e2e_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string r = root.string();
    auto synth = std::string(XAIFN_SYNTH) + " --out " + r + "/raw --n-claims 300 --seed 9 > /dev/null 2>&1";
    ASSERT_EQ(std::system(synth.c_str()), 0);
    write_json(root / "train.json", {{"hidden_size", 8}, {"embedding_dim", 12}, {"epochs", 3}, {"n_trees", 10}});
    const std::vector<std::string> steps = {
        "ingest --claims " + r + "/raw/claims.jsonl --articles " + r + "/raw/articles.jsonl --out " + r + "/corpus",
        "split --corpus " + r + "/corpus --out " + r + "/split --ratios 0.5,0.1,0.4",
        "train --config " + r + "/train.json --corpus " + r + "/corpus --split " + r + "/split/split.json --out " + r +
            "/models --epochs 2",
        "eval --models " + r + "/models --corpus " + r + "/corpus --split " + r + "/split/split.json --out " + r + "/eval",
        "explain --models " + r + "/models --corpus " + r + "/corpus --split " + r + "/split/split.json --out " + r +
            "/pool",
        "curate --pool " + r + "/pool --length 40 --seed 4 --out " + r + "/study",
        "simulate --queue " + r + "/study --condition all --n 4 --skip-prob 0.1 --out " + r + "/sim",
        "analyze --metrics " + r + "/sim/metrics.jsonl --min-duration 0 --out " + r + "/analysis",
    };
    for (const auto& s : steps) ASSERT_EQ(run(s), 0) << s;
  }

  static void TearDownTestSuite() { fs::remove_all(root); }
};

fs::path EndToEnd::root;

TEST_F(EndToEnd, ManifestsRecordOptionsInputsAndOutputs) {
  for (const char* step : {"corpus", "split", "models", "eval", "pool", "study", "sim", "analysis"}) {
    const json m = read_json(root / step / "manifest.json");
    EXPECT_TRUE(m.contains("command")) << step;
    EXPECT_TRUE(m["options"].is_object()) << step;
    EXPECT_FALSE(m["outputs"].empty()) << step;
  }
  const json train = read_json(root / "models" / "manifest.json");
  // Flag beats config file, config file beats default.
  EXPECT_EQ(train["options"]["epochs"], 2);
  EXPECT_EQ(train["options"]["hidden_size"], 8);
  EXPECT_EQ(train["options"]["batch_size"], default_options("train")["batch_size"]);
  EXPECT_EQ(train["inputs"].size(), 2u);
  EXPECT_TRUE(train["results"].contains("validation_accuracy"));
}

TEST_F(EndToEnd, SimulationCoversEveryCondition) {
  std::map<std::string, int> per;
  for (const auto& r : read_jsonl(root / "sim" / "metrics.jsonl")) ++per[r["condition"].get<std::string>()];
  EXPECT_EQ(per.size(), 5u);
  for (const auto& [c, n] : per) EXPECT_EQ(n, 4) << c;
  std::size_t logs = 0;
  for (const auto& e : fs::directory_iterator(root / "sim" / "sessions")) logs += e.path().string().ends_with(".events.jsonl");
  EXPECT_EQ(logs, 20u);
  const json a = read_json(root / "analysis" / "analysis.json");
  EXPECT_EQ(a["sessions_in"], 20);
}

TEST_F(EndToEnd, ReplayReproducesAnalysisBytes) {
  const std::string before = read_text(root / "analysis" / "analysis.json");
  const std::string metrics_before = read_text(root / "sim" / "metrics.jsonl");
  ASSERT_EQ(run("replay " + (root / "sim" / "manifest.json").string()), 0);
  EXPECT_EQ(read_text(root / "sim" / "metrics.jsonl"), metrics_before);
  replay_manifest(root / "analysis" / "manifest.json");
  EXPECT_EQ(read_text(root / "analysis" / "analysis.json"), before);
}

TEST_F(EndToEnd, StudyMaterialsAreLoadable) {
  const json study = read_json(root / "study" / "study.json");
  EXPECT_EQ(study["length"], 40);
  EXPECT_EQ(read_jsonl(root / "study" / "queue.jsonl").size(), 40u);
  for (const auto& s : read_jsonl(root / "pool" / "stories.jsonl")) EXPECT_FALSE(s.contains("label"));
  const json eval = read_json(root / "eval" / "eval.json");
  EXPECT_TRUE(eval.contains("m3_fidelity"));
  EXPECT_TRUE(eval.contains("ensemble"));
}

TEST(Replay, BadManifest) {
  const fs::path p = fs::temp_directory_path() / ("xaifn_badmanifest_" + std::to_string(::getpid()) + ".json");
  write_json(p, {{"options", json::object()}});
  EXPECT_EQ(usage_code([&] { replay_manifest(p); }), "BAD_MANIFEST");
  fs::remove(p);
}
