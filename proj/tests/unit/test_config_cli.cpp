#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "craft/config.hpp"
#include "craft/craft.hpp"
#include "support.hpp"

using namespace craft;
using testing_support::TempDir;
using testing_support::fixture;
using testing_support::slurp;

namespace {

int run(const std::string& args, const std::filesystem::path& out = {}) {
  std::string cmd = std::string(CRAFT_CLI) + " " + args;
  cmd += out.empty() ? " >/dev/null 2>&1" : " >" + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesIni) {
  const auto c = load_run_config(fixture("run.ini"));
  EXPECT_EQ(c.depth, 3);
  EXPECT_EQ(c.relations, (std::vector<std::string>{"UsedFor", "CapableOf"}));
  EXPECT_EQ(c.top_k, 25u);
  EXPECT_EQ(c.provider, "file:store.cemb");
  EXPECT_EQ(c.prior_source, "llm-fixture");
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(c.max_iters, 7);
  EXPECT_EQ(c.template_id, "used-to");
  EXPECT_EQ(c.n_pos, 2u);
  EXPECT_EQ(c.seed, 12345678901234u);
  EXPECT_EQ(c.jobs, 2u);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, HashIgnoresJobsAndOutput) {
  auto c = load_run_config(fixture("run.ini"));
  const auto h = c.hash();
  c.jobs = 9;
  c.output_dir = "elsewhere";
  EXPECT_EQ(c.hash(), h);
  c.lambda = 0.25;
  EXPECT_NE(c.hash(), h);
}

TEST(Config, BadValuesAreUsageErrors) {
  std::istringstream in("[grounding]\nlambda = fast\n");
  try {
    parse_run_config(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    labels_ = generate_labels({.verbs = 6, .categories = 24, .affording_per_verb = 4, .images_per_category = 2, .seed = 1});
    {
      std::ofstream out(dir_ / "labels.tsv");
      write_affordance_labels(out, labels_);
    }
    save_store(dir_ / "store.cemb", *identity_world(labels_, 16, 2));
    ASSERT_EQ(run("ingest --assertions " + fixture("assertions.tsv").string() + " --out " + (dir_ / "g.snap").string()), 0);
    // store with the prompts needed to ground "cut" over two images
    EmbeddingStore s(2);
    s.insert(text_key("a photo of a knife"), EmbeddingVector({1.0, 0.0}));
    s.insert(text_key("a photo of a scissors"), EmbeddingVector({0.6, 0.8}));
    s.insert(text_key("a photo of a saw"), EmbeddingVector({0.0, 1.0}));
    s.insert(text_key("a photo of a cleaver"), EmbeddingVector({0.5, 0.5}));
    s.insert(image_key("a.jpg"), EmbeddingVector({0.0, 1.0}));
    s.insert(image_key("b.jpg"), EmbeddingVector({1.0, 0.1}));
    save_store(dir_ / "emb.cemb", s);
  }

  std::string common() const {
    return "--labels " + (dir_ / "labels.tsv").string() + " --provider file:" + (dir_ / "store.cemb").string();
  }

  TempDir dir_;
  LabelTable labels_;
};

TEST_F(Cli, GroundPrintsResult) {
  const auto out = dir_ / "ground.json";
  ASSERT_EQ(run("ground --verb cut --candidates a.jpg,b.jpg --graph " + (dir_ / "g.snap").string() +
                    " --provider file:" + (dir_ / "emb.cemb").string(),
                out),
            0);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j["verb"], "/c/en/cut");
  EXPECT_EQ(j["selected"], 1);
  EXPECT_EQ(j["candidates"].size(), 2u);
  EXPECT_TRUE(j.contains("config_hash"));
  EXPECT_EQ(j["tool_version"], kToolVersion);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("eval --backend random --labels /nonexistent/labels.tsv"), 2);
  EXPECT_EQ(run("eval " + common() + " --backend nope"), 1);
  EXPECT_EQ(run("ground --verb cut --candidates a.jpg --graph " + (dir_ / "g.snap").string() +
                " --provider http://127.0.0.1:1"),
            3);
  EXPECT_EQ(run("ground --verb cutt --candidates a.jpg --graph " + (dir_ / "g.snap").string() +
                " --provider file:" + (dir_ / "emb.cemb").string()),
            2);
}

TEST_F(Cli, EvalWritesArtifactsReproducibly) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run("eval " + common() + " --backend oracle-object --episodes 5 --seed 3 --jobs 1 --out-dir " + a.string()), 0);
  ASSERT_EQ(run("eval " + common() + " --backend oracle-object --episodes 5 --seed 3 --jobs 3 --out-dir " + b.string()), 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "episodes.jsonl"), slurp(b / "episodes.jsonl"));
  const auto j = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(j["aggregate"]["accuracy_at_1"], 1.0);
  EXPECT_EQ(j["tool_version"], kToolVersion);
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
  {
    std::ofstream ini(dir_ / "run.ini");
    ini << "[eval]\nbackend = random\nepisodes = 4\nseed = 9\n[output]\ndir = " << (dir_ / "cfgout").string() << "\n";
  }
  ASSERT_EQ(run("eval --config " + (dir_ / "run.ini").string() + " " + common()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "cfgout" / "report.json"))["backend"], "random");
  ASSERT_EQ(run("eval --config " + (dir_ / "run.ini").string() + " " + common() + " --backend oracle-object"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "cfgout" / "report.json"))["backend"], "oracle-object");
}

TEST_F(Cli, SweepWritesCsv) {
  ASSERT_EQ(run("sweep " + common() + " --backend random --n 5,10 --episodes 4 --out-dir " + (dir_ / "sw").string()), 0);
  const auto csv = slurp(dir_ / "sw" / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,metric,mean,stderr");
  EXPECT_TRUE(std::filesystem::exists(dir_ / "sw" / "report_n10.json"));
}

TEST_F(Cli, ExportTracesDeterministic) {
  const auto args = "export-traces --graph " + (dir_ / "g.snap").string() + " --verb cut --depth 2 --out ";
  ASSERT_EQ(run(args + (dir_ / "t1.json").string() + " --dot " + (dir_ / "e1.dot").string()), 0);
  ASSERT_EQ(run(args + (dir_ / "t2.json").string() + " --dot " + (dir_ / "e2.dot").string()), 0);
  EXPECT_EQ(slurp(dir_ / "t1.json"), slurp(dir_ / "t2.json"));
  EXPECT_EQ(slurp(dir_ / "e1.dot"), slurp(dir_ / "e2.dot"));
  EXPECT_FALSE(read_traces_json(slurp(dir_ / "t1.json")).empty());
}

TEST_F(Cli, SidecarUrlFromEnvironment) {
  const std::string cmd = "CRAFT_SIDECAR_URL=http://127.0.0.1:1 " + std::string(CRAFT_CLI) +
                          " ground --verb cut --candidates a.jpg --graph " + (dir_ / "g.snap").string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 3);
}

TEST(CliSelftest, Passes) { EXPECT_EQ(run("selftest"), 0); }
