// Copyright 2026 The kgcycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kgcycle/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "crawl_fixture.h"
#include "json.hpp"
#include "kgcycle/checkpoint.h"
#include "toy_workspace.h"

namespace kgcycle {
namespace {

namespace fs = std::filesystem;
using toy::Cli;
using Json = nlohmann::json;

TEST(RunConfigTest, DefaultsFileAndUnknownKeys) {
  RunConfig defaults;
  RunConfig c = ParseRunConfig("{}");
  EXPECT_EQ(c.train, defaults.train);
  EXPECT_EQ(c.decode, defaults.decode);

  c = ParseRunConfig(R"({"train": {"seed": 9, "optimizer": "sgd"}, "decode": {"beam_width": 1},
                         "data": {"format": "tsv"}})");
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.train.optimizer, OptimizerKind::kSgd);
  EXPECT_EQ(c.train.batch_size, defaults.train.batch_size);
  EXPECT_EQ(c.decode.beam_width, 1u);
  EXPECT_EQ(c.data.format, CorpusFormat::kTsvLines);

  EXPECT_THROW(ParseRunConfig(R"({"train": {"sead": 1}})"), UsageError);
  EXPECT_THROW(ParseRunConfig(R"({"trian": {}})"), UsageError);
  EXPECT_THROW(ParseRunConfig(R"({"train": {"batch_size": -1}})"), UsageError);
  EXPECT_THROW(ParseRunConfig(R"({"train": {"optimizer": "lion"}})"), UsageError);
  EXPECT_THROW(ParseRunConfig("not json"), UsageError);

  RunConfig round = ParseRunConfig(RunConfigToJson(c));
  EXPECT_EQ(round.train, c.train);
  EXPECT_EQ(round.decode, c.decode);
  EXPECT_EQ(round.data, c.data);
}

TEST(CliTest, UsageErrorsExitTwo) {
  const std::string dir = testing_util::TempDir("cli_usage");
  EXPECT_EQ(Cli({}), kExitUsage);
  EXPECT_EQ(Cli({"frobnicate"}), kExitUsage);
  EXPECT_EQ(Cli({"train", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"train", "--corpus", dir + "/missing.tsv", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"train", "--corpus", dir, "--regime", "half", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"train", "--config", dir + "/none.json", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"eval", "--task", "speech", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"crawl", "--out-dir", dir}), kExitUsage);
  EXPECT_EQ(Cli({"--help"}), kExitOk);
}

class CliPipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ws_ = new toy::Workspace(toy::MakeWorkspace("cli_pipeline"));
    ASSERT_EQ(Cli({"train", "--config", ws_->config, "--corpus", ws_->train, "--regime",
                   "finetune15", "--seed", "7", "--out-dir", ws_->Path("ft15_a")}),
              kExitOk);
    ASSERT_EQ(Cli({"train", "--config", ws_->config, "--corpus", ws_->train, "--seed", "7",
                   "--out-dir", ws_->Path("base")}),
              kExitOk);
  }
  static void TearDownTestSuite() { delete ws_; }

  static toy::Workspace *ws_;
};
toy::Workspace *CliPipelineTest::ws_ = nullptr;

TEST_F(CliPipelineTest, TrainIsDeterministicAndWritesArtifacts) {
  ASSERT_EQ(Cli({"train", "--config", ws_->config, "--corpus", ws_->train, "--regime",
                 "finetune15", "--seed", "7", "--out-dir", ws_->Path("ft15_b")}),
            kExitOk);
  EXPECT_EQ(ReadFile(ws_->Path("ft15_a/model.ckpt")), ReadFile(ws_->Path("ft15_b/model.ckpt")));
  EXPECT_NE(ReadFile(ws_->Path("ft15_a/model.ckpt")), ReadFile(ws_->Path("base/model.ckpt")));
  for (const char *f : {"manifest.json", "vocab.txt", "train_log.tsv"}) {
    EXPECT_TRUE(fs::exists(ws_->Path(std::string("base/") + f))) << f;
  }
  Json manifest = Json::parse(ReadFile(ws_->Path("ft15_a/manifest.json")));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["regime"], "finetune15");
  // Flag over file over default: seed from the flag, d_model from the file.
  EXPECT_EQ(manifest["config"]["model"]["d_model"], 32);
  EXPECT_EQ(manifest["config"]["train"]["batch_size"], 4);
  EXPECT_EQ(manifest["config"]["train"]["patience"], TrainConfig().patience);
  EXPECT_EQ(manifest["inputs"][ws_->train], Sha256HexOfFile(ws_->train));
  EXPECT_EQ(manifest["tool_version"], kToolVersion);
}

TEST_F(CliPipelineTest, CycleWritesPerIterationCheckpoints) {
  const std::string out = ws_->Path("cycle3");
  ASSERT_EQ(Cli({"cycle", "--config", ws_->config, "--checkpoint", ws_->Path("base/model.ckpt"),
                 "--corpus", ws_->train, "--text-pool", ws_->texts, "--graph-pool",
                 ws_->graphs, "--steps", "3", "--draw", "8", "--out-dir", out}),
            kExitOk);
  for (int i = 1; i <= 3; ++i) {
    EXPECT_TRUE(fs::exists(out + "/iteration_" + std::to_string(i) + ".ckpt")) << i;
  }
  EXPECT_FALSE(fs::exists(out + "/iteration_4.ckpt"));
  TrainLog log = TrainLog::FromTsv(ReadFile(out + "/cycle_log.tsv"));
  std::set<size_t> steps;
  for (const auto &row : log.rows()) {
    EXPECT_EQ(row.phase, "cycle");
    EXPECT_TRUE(std::isfinite(row.cycle_loss));
    steps.insert(row.step);
  }
  EXPECT_EQ(steps, (std::set<size_t>{1, 2, 3}));
  // The final model is the last iteration's restored best.
  EXPECT_EQ(ReadFile(out + "/model.ckpt"), ReadFile(out + "/iteration_3.ckpt"));
}

TEST_F(CliPipelineTest, CycleZeroStepsCopiesCheckpoint) {
  const std::string out = ws_->Path("cycle0");
  ASSERT_EQ(Cli({"cycle", "--config", ws_->config, "--checkpoint", ws_->Path("base/model.ckpt"),
                 "--steps", "0", "--out-dir", out}),
            kExitOk);
  EXPECT_EQ(ReadFile(out + "/model.ckpt"), ReadFile(ws_->Path("base/model.ckpt")));
}

TEST_F(CliPipelineTest, MissingCheckpointFailsAfterManifest) {
  const std::string out = ws_->Path("cycle_missing");
  EXPECT_EQ(Cli({"cycle", "--checkpoint", ws_->Path("nope.ckpt"), "--steps", "0", "--out-dir",
                 out}),
            kExitFailure);
  EXPECT_TRUE(fs::exists(out + "/manifest.json"));
}

TEST_F(CliPipelineTest, GenerateAndParseKeepLineCorrespondence) {
  ASSERT_EQ(Cli({"prepare", "--config", ws_->config, "--corpus", ws_->test, "--out-dir",
                 ws_->Path("prep")}),
            kExitOk);
  const std::string ckpt = ws_->Path("base/model.ckpt");
  for (const char *cmd : {"generate", "parse"}) {
    const std::string input = std::string(cmd) == "generate" ? ws_->Path("prep/g2t.source")
                                                             : ws_->Path("prep/t2g.source");
    std::vector<std::string> lines = ReadLines(input);
    lines.push_back("");  // blank input still maps to one output line
    const std::string padded = ws_->Path(std::string(cmd) + ".in");
    WriteLines(padded, lines);
    for (const char *run : {"a", "b"}) {
      ASSERT_EQ(Cli({cmd, "--config", ws_->config, "--checkpoint", ckpt, "--input", padded,
                     "--output", ws_->Path(std::string(cmd) + run + ".out"), "--out-dir",
                     ws_->Path(std::string(cmd) + "_dir")}),
                kExitOk);
    }
    const auto a = ReadLines(ws_->Path(std::string(cmd) + "a.out"));
    EXPECT_EQ(a.size(), lines.size()) << cmd;
    EXPECT_EQ(a, ReadLines(ws_->Path(std::string(cmd) + "b.out"))) << cmd;
    EXPECT_EQ(a.back(), "") << cmd;
    if (std::string(cmd) == "parse") {
      for (const auto &line : a) {
        if (!line.empty()) EXPECT_NO_THROW(ParseGraph(line));
      }
    }
  }
}

TEST_F(CliPipelineTest, VocabularyMismatchIsAnError) {
  WriteLines(ws_->Path("other_vocab.txt"), ReservedPieces());
  EXPECT_EQ(Cli({"generate", "--checkpoint", ws_->Path("base/model.ckpt"), "--vocab",
                 ws_->Path("other_vocab.txt"), "--input", ws_->graphs, "--out-dir",
                 ws_->Path("mismatch")}),
            kExitFailure);
}

TEST_F(CliPipelineTest, PrepareAssignsSplitsAndGroupsReferences) {
  const std::string out = ws_->Path("prep_split");
  ASSERT_EQ(Cli({"prepare", "--config", ws_->config, "--corpus", ws_->test, "--train-corpus",
                 ws_->train, "--out-dir", out}),
            kExitOk);
  const auto splits = ReadLines(out + "/g2t.splits");
  EXPECT_EQ(splits.size(), ReadLines(out + "/g2t.source").size());
  for (const auto &s : splits) {
    auto tag = ParseSplitTag(s);
    ASSERT_TRUE(tag.has_value()) << s;
    EXPECT_TRUE(IsTestSplit(*tag)) << s;
    EXPECT_NE(*tag, SplitTag::kTestUnseenCategories);  // every category is "Toy"
  }
  EXPECT_FALSE(fs::exists(ws_->Path("prep/g2t.splits")));
}

TEST(CliEvalTest, ReportsAndSplitColumns) {
  const std::string dir = testing_util::TempDir("cli_eval");
  WriteLines(dir + "/hyp.txt", {"a b c d", "e f g h"});
  WriteLines(dir + "/ref.txt", {"a b c d\tother text", "e f g h"});
  ASSERT_EQ(Cli({"eval", "--task", "text", "--hyp", dir + "/hyp.txt", "--ref", dir + "/ref.txt",
                 "--out-dir", dir + "/plain"}),
            kExitOk);
  EXPECT_EQ(ReadLines(dir + "/plain/report.tsv"),
            (std::vector<std::string>{"metric\toverall", "bleu\t1.0000", "ter\t0.0000",
                                      "chrf++\t1.0000"}));

  WriteLines(dir + "/splits.txt", {"seen_categories", "unseen_entities"});
  ASSERT_EQ(Cli({"eval", "--task", "text", "--hyp", dir + "/hyp.txt", "--ref", dir + "/ref.txt",
                 "--splits", dir + "/splits.txt", "--out-dir", dir + "/split"}),
            kExitOk);
  EXPECT_EQ(ReadLines(dir + "/split/report.tsv")[0],
            "metric\toverall\tseen_categories\tunseen_entities");

  WriteLines(dir + "/ghyp.txt", {"<S> a <P> b <O> c <S> d <P> e <O> f", ""});
  WriteLines(dir + "/gref.txt", {"<S> a <P> b <O> c <S> x <P> y <O> z", "<S> q <P> r <O> s"});
  ASSERT_EQ(Cli({"eval", "--task", "graph", "--hyp", dir + "/ghyp.txt", "--ref",
                 dir + "/gref.txt", "--out-dir", dir + "/graph"}),
            kExitOk);
  Json j = Json::parse(ReadFile(dir + "/graph/report.json"));
  EXPECT_DOUBLE_EQ(j["overall"]["precision"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["overall"]["recall"].get<double>(), 1.0 / 3.0);

  WriteLines(dir + "/short.txt", {"a b c d"});
  EXPECT_EQ(Cli({"eval", "--task", "text", "--hyp", dir + "/short.txt", "--ref",
                 dir + "/ref.txt", "--out-dir", dir + "/bad"}),
            kExitFailure);
}

std::string CrawlConfigJson(const std::string &extra = "") {
  auto cfg = crawl_fixture::FixtureConfig({});
  return R"({"crawl": {"origin_entities": [{"id": "Q1", "name": "Alpha"}], "rate_limit": 0,
    "endpoints": {"sparql_url": ")" + cfg.endpoints.sparql_url + R"(", "wiki_api_url": ")" +
         cfg.endpoints.wiki_api_url + R"("},
    "offline_fixture_dir": ")" + crawl_fixture::Dir() + "\"" + extra + "}}";
}

TEST(CliCrawlTest, FixturePoolsMatchExpectedFiles) {
  const std::string dir = testing_util::TempDir("cli_crawl");
  WriteFile(dir + "/crawl.json", CrawlConfigJson());
  ASSERT_EQ(Cli({"crawl", "--config", dir + "/crawl.json", "--out-dir", dir + "/out"}), kExitOk);
  EXPECT_EQ(ReadFile(dir + "/out/graphs.txt"), ReadFile(crawl_fixture::ExpectedGraphs()));
  EXPECT_EQ(ReadFile(dir + "/out/texts.txt"), ReadFile(crawl_fixture::ExpectedTexts()));
  Json stats = Json::parse(ReadFile(dir + "/out/stats.json"));
  EXPECT_EQ(stats["entities"], 5);
  EXPECT_EQ(stats["triples"], 15);
  EXPECT_EQ(stats["paragraphs"], 10);
  EXPECT_DOUBLE_EQ(stats["mean_text_length"].get<double>(),
                   stats["text_characters"].get<double>() / stats["text_instances"].get<double>());
}

TEST(CliCrawlTest, ResumedCrawlHasNoDuplicateEntities) {
  const std::string dir = testing_util::TempDir("cli_crawl_resume");
  WriteFile(dir + "/crawl.json", CrawlConfigJson(", \"max_entities\": 2"));
  for (int run = 0; run < 3; ++run) {
    ASSERT_EQ(Cli({"crawl", "--config", dir + "/crawl.json", "--out-dir", dir + "/out"}),
              kExitOk);
  }
  std::vector<std::string> ids;
  for (const auto &r : LoadRecords(dir + "/out/records.jsonl")) ids.push_back(r.entity_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"Q1", "Q3", "Q2", "Q4", "Q5"}));
  EXPECT_EQ(ReadFile(dir + "/out/graphs.txt"), ReadFile(crawl_fixture::ExpectedGraphs()));
}

TEST(CliCrawlTest, UnreachableEndpointsFail) {
  const std::string dir = testing_util::TempDir("cli_crawl_down");
  WriteFile(dir + "/crawl.json", R"({"crawl": {"origin_entities": [{"id": "Q1", "name": "A"}],
    "rate_limit": 0, "max_retries": 0, "endpoints": {"sparql_url": "http://127.0.0.1:9/sparql",
    "wiki_api_url": "http://127.0.0.1:9/w/api.php"}}})");
  EXPECT_EQ(Cli({"crawl", "--config", dir + "/crawl.json", "--out-dir", dir + "/out"}),
            kExitFailure);
}

}  // namespace
}  // namespace kgcycle
