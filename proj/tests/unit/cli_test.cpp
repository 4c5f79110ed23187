#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "fewie/sampler.hpp"
#include "fewie/store.hpp"
#include "synthetic.hpp"

namespace fewie {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "fewie-bench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = testing::make_balanced_corpus({.n_classes = 5, .sentences_per_class = 12});
    corpus_path_ = dir_ / "syn.conll";
    testing::write_text_file(corpus_path_, serialize_conll(corpus_));
    testing::write_text_file(dir_ / "cfg.toml",
                             "[corpus]\npath = \"syn.conll\"\n"
                             "[sampling]\nscenarios = [[5, 1], [3, 2]]\nn_episodes = 6\n"
                             "[encoder]\ndim = 16\n"
                             "[output]\ndir = \"out\"\n");
  }

  testing::TempDir dir_;
  Corpus corpus_;
  fs::path corpus_path_;
};

TEST_F(CliTest, RunPopulatesOutputDirectory) {
  const auto r = invoke({"run", (dir_ / "cfg.toml").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"run_manifest.json", "results.csv", "results.md", "episodes_5way_1shot_1q.jsonl",
                           "scores_3way_2shot_1q.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / name)) << name;
  }
  EXPECT_NE(r.out.find("5-way 1-shot: mean F1"), std::string::npos) << r.out;
}

TEST_F(CliTest, RunOverridesAndTable) {
  ASSERT_EQ(invoke({"run", (dir_ / "cfg.toml").string(), "--out", (dir_ / "lr").string(), "--threads", "1"}).code, 0);
  const auto nn = invoke({"run", (dir_ / "cfg.toml").string(), "--out", (dir_ / "nn").string(), "--readout", "NN",
                          "--episodes", "6", "--set", "encoder.label=\"Rand\""});
  ASSERT_EQ(nn.code, 0) << nn.err;
  const auto manifest = testing::read_text_file(dir_ / "nn" / "run_manifest.json");
  EXPECT_NE(manifest.find("\"label\": \"Rand NN\""), std::string::npos);

  const auto t = invoke({"table", (dir_ / "lr").string(), (dir_ / "nn").string(), "--csv",
                         (dir_ / "t.csv").string(), "--md", (dir_ / "t.md").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("| Dataset | Scenario | Random | Rand NN |"), std::string::npos) << t.out;
  EXPECT_EQ(testing::read_text_file(dir_ / "t.md"), t.out);
  EXPECT_TRUE(fs::exists(dir_ / "t.csv"));
}

TEST_F(CliTest, SampleIsByteIdentical) {
  const std::vector<std::string> base = {"sample", corpus_path_.string(), "--n", "5", "--k", "1",
                                         "--episodes", "20", "--seed", "42"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir_ / "a.jsonl").string()});
  b.insert(b.end(), {"--out", (dir_ / "b.jsonl").string()});
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  const auto text = testing::read_text_file(dir_ / "a.jsonl");
  EXPECT_EQ(text, testing::read_text_file(dir_ / "b.jsonl"));
  EXPECT_EQ(invoke(base).out, text);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 20);
}

TEST_F(CliTest, ValidateAcceptsSampledAndRejectsBrokenManifest) {
  ASSERT_EQ(invoke({"sample", corpus_path_.string(), "--n", "5", "--k", "2", "--episodes", "5", "--seed", "1",
                    "--out", (dir_ / "m.jsonl").string()})
                .code,
            0);
  const auto ok = invoke({"validate", corpus_path_.string(), (dir_ / "m.jsonl").string(), "--k", "2", "--q", "1"});
  EXPECT_EQ(ok.code, 0) << ok.out;

  auto episodes = read_manifest_file(dir_ / "m.jsonl");
  Episode ep = episodes[0].episode;
  ep.query[0] = ep.support[0];  // same sentence in support and query
  testing::write_text_file(dir_ / "bad.jsonl", episode_to_json_line(0, ep) + "\n");
  const auto bad = invoke({"validate", corpus_path_.string(), (dir_ / "bad.jsonl").string()});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.out.find("disjointness"), std::string::npos) << bad.out;
}

TEST_F(CliTest, StoreCheck) {
  store_write(dir_ / "ok.fewe", testing::make_clustered_embeddings(corpus_, 4, 0.1, 1), 4);
  const auto ok = invoke({"store-check", (dir_ / "ok.fewe").string(), corpus_path_.string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("60 sentence(s) aligned"), std::string::npos) << ok.out;
  testing::write_text_file(dir_ / "junk.fewe", "not a store at all");
  EXPECT_EQ(invoke({"store-check", (dir_ / "junk.fewe").string(), corpus_path_.string()}).code, 2);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({"run", (dir_ / "cfg.toml").string(), "--bogus"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"sample", corpus_path_.string(), "--n", "1", "--k", "1", "--episodes", "1", "--seed", "0"}).code,
            1);
  testing::write_text_file(dir_ / "bad.toml", "[corpus]\npath = \"syn.conll\"\nnope = 1\n[output]\ndir = \"o\"\n");
  EXPECT_EQ(invoke({"run", (dir_ / "bad.toml").string()}).code, 1);
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST_F(CliTest, InfeasibleExitsThree) {
  EXPECT_EQ(invoke({"sample", corpus_path_.string(), "--n", "6", "--k", "1", "--episodes", "1", "--seed", "0"}).code,
            3);
  testing::write_text_file(dir_ / "big.toml",
                           "[corpus]\npath = \"syn.conll\"\n[sampling]\nscenarios = [[6, 1]]\nn_episodes = 2\n"
                           "[output]\ndir = \"big\"\n");
  EXPECT_EQ(invoke({"run", (dir_ / "big.toml").string()}).code, 3);
}

TEST_F(CliTest, MalformedCorpusIsDataError) {
  testing::write_text_file(dir_ / "broken.conll", "EU B-ORG\nrejects\n");
  const auto r = invoke({"sample", (dir_ / "broken.conll").string(), "--n", "2", "--k", "1", "--episodes", "1",
                         "--seed", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace fewie
