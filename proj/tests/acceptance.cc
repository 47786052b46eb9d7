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

// Acceptance gate. Prints one PASS, FAIL or SKIP line per criterion and
// exits nonzero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <set>
#include <string>

#include "crawl_fixture.h"
#include "kgcycle/beam_search.h"
#include "kgcycle/corpus.h"
#include "kgcycle/crawler.h"
#include "kgcycle/graph_codec.h"
#include "kgcycle/metrics.h"
#include "kgcycle/training.h"
#include "metric_fixtures.h"
#include "model_oracles.h"
#include "test_util.h"
#include "toy_domain.h"
#include "toy_workspace.h"

namespace kgcycle::acceptance {
namespace {

namespace fs = std::filesystem;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome Check(bool ok, std::string detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)};
}

std::string Fmt(const char *format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Shared toy setup for the overfit and cycle criteria.
struct ToySetup {
  Vocabulary vocab = toy::DomainVocab();
  ParallelCorpus eight;
  ParallelCorpus sixteen;
  ParallelCorpus held_out;
  UnlabeledCorpus texts{PoolKind::kText, "toy"};
  UnlabeledCorpus graphs{PoolKind::kGraphs, "toy"};

  ToySetup() {
    Rng rng(20260101);
    std::set<std::string> seen;
    eight = toy::MakeParallel(rng, 8, 2, SplitTag::kTrain, &seen);
    sixteen = eight;
    ParallelCorpus extra = toy::MakeParallel(rng, 8, 2, SplitTag::kTrain, &seen);
    sixteen.examples.insert(sixteen.examples.end(), extra.examples.begin(), extra.examples.end());
    held_out = toy::MakeParallel(rng, 32, 2, SplitTag::kTest, &seen);
    std::tie(texts, graphs) = toy::MakePools(rng, 64, 2, &seen);
  }
};

ToySetup &Toy() {
  static ToySetup setup;
  return setup;
}

TrainConfig OverfitConfig() {
  TrainConfig c;
  c.validation_fraction = 0.0;
  c.max_optimizer_steps = 500;
  c.max_epochs_finetune = 1000000;
  c.patience = 1000000;
  return c;
}

// Fine-tunes on the eight pairs; shared with the cycle criterion.
const TrainResult &Overfit() {
  static const TrainResult result = [] {
    ToySetup &t = Toy();
    ModelParams init = ModelParams::Initialize(toy::SmallModel(t.vocab.size()), 7);
    return Finetune(init, t.vocab, t.eight, OverfitConfig());
  }();
  return result;
}

Outcome GradientCheck() {
  Timer timer;
  Rng rng(4242);
  double worst = 0.0;
  size_t checked = 0;
  size_t largest = 0;
  for (int trial = 0; trial < 3; ++trial) {
    ModelParams p = testing_util::RandomSmallModel(rng, 10 + rng.UniformInt(6));
    largest = std::max(largest, p.Count());
    if (p.Count() >= 5000) return {Verdict::kFail, "config exceeds 5k parameters"};
    auto r = testing_util::CheckGradients(p, testing_util::RandomBatch(rng, p.config.vocab_size, 2));
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }
  const double secs = timer.Seconds();
  return Check(worst < 1e-4 && secs < 60.0,
               Fmt("max rel err %.3g over %zu entries, largest model %zu params, %.1fs", worst,
                   checked, largest, secs));
}

Outcome OverfitCriterion() {
  Timer timer;
  const TrainResult &r = Overfit();
  ToySetup &t = Toy();
  const double acc = TeacherForcedAccuracy(r.params, t.vocab, SupervisedPairs(t.eight.examples));
  const double secs = timer.Seconds();
  return Check(acc > 0.99 && r.optimizer_steps <= 500 && secs < 300.0,
               Fmt("accuracy %.4f after %zu optimizer steps, %.1fs", acc, r.optimizer_steps,
                   secs));
}

double HeldOutStrictF1(const ModelParams &params, const Vocabulary &vocab,
                       const ParallelCorpus &held_out) {
  DecodeConfig decode;
  GenerateFn generate = ModelGenerator(params, vocab, decode);
  std::vector<std::optional<KnowledgeGraph>> hyps;
  std::vector<KnowledgeGraph> refs;
  for (const auto &e : held_out.examples) {
    try {
      hyps.push_back(ParseGraph(generate(PrefixTask(kGenerateGraph, e.text))));
    } catch (const NoTriplesRecoverable &) {
      hyps.push_back(std::nullopt);
    }
    refs.push_back(e.graph);
  }
  return StrictTripleMatch(hyps, refs).f1;
}

Outcome CycleDescent() {
  Timer timer;
  ToySetup &t = Toy();
  TrainConfig extend = OverfitConfig();
  TrainResult start = Finetune(Overfit().params, t.vocab, t.sixteen, extend);
  const double acc16 =
      TeacherForcedAccuracy(start.params, t.vocab, SupervisedPairs(t.sixteen.examples));
  const double f1_before = HeldOutStrictF1(start.params, t.vocab, t.held_out);

  TrainConfig cycle;  // default hyperparameters
  cycle.synthetic_per_iteration = 64;
  CycleResult r = CycleTrain(start.params, t.vocab, t.texts, t.graphs, t.sixteen, cycle,
                             DecodeConfig());
  const double f1_after = HeldOutStrictF1(r.params, t.vocab, t.held_out);
  if (r.state.cycle_loss_history.empty() || r.state.cycle_loss_history[0].size() < 2) {
    return {Verdict::kFail, "iteration 1 ran fewer than two epochs"};
  }
  const auto &first = r.state.cycle_loss_history[0];
  const bool descent = first.back() < first.front();
  const bool f1_ok = f1_after >= f1_before - 0.05;
  return Check(descent && f1_ok && r.state.step_index == 3,
               Fmt("16-pair acc %.4f; iteration 1 L_cycle %.6f -> %.6f over %zu epochs; "
                   "held-out F1 %.4f -> %.4f; %.1fs",
                   acc16, first.front(), first.back(), first.size(), f1_before, f1_after,
                   timer.Seconds()));
}

Outcome CycleIdentity() {
  ToySetup &t = Toy();
  ModelParams params = ModelParams::Initialize(toy::SmallModel(t.vocab.size()), 99);
  std::map<std::string, std::string> table;
  std::vector<std::string> texts, graphs;
  std::vector<TrainingPair> g2t, t2g;
  for (const auto &e : t.sixteen.examples) {
    const std::string g = LinearizeGraph(e.graph);
    table[PrefixTask(kGenerateGraph, e.text)] = g;
    table[PrefixTask(kGenerateText, g)] = e.text;
    texts.push_back(e.text);
    graphs.push_back(g);
    g2t.push_back(GraphToTextPair(e.graph, e.text));
    t2g.push_back(TextToGraphPair(e.text, e.graph));
  }
  CycleLosses cyc = CycleStepLosses(params, t.vocab, texts, graphs,
                                    [&](const std::string &s) { return table.at(s); });
  const double sup_g2t = EvaluateLoss(params, EncodePairs(t.vocab, g2t));
  const double sup_t2g = EvaluateLoss(params, EncodePairs(t.vocab, t2g));
  const double diff = std::max(std::abs(cyc.g2t - sup_g2t), std::abs(cyc.t2g - sup_t2g));
  return Check(diff <= 1e-6, Fmt("max |L_cycle - L_sup| = %.3g", diff));
}

Outcome CodecRoundTrip() {
  Rng rng(5150);
  size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    KnowledgeGraph g = testing_util::RandomGraph(rng);
    try {
      if (!(ParseGraph(LinearizeGraph(g)) == g)) ++failures;
    } catch (const Error &) {
      ++failures;
    }
  }
  return Check(failures == 0, Fmt("%zu failures in 10000 graphs", failures));
}

Outcome MetricOracles() {
  using fixtures::kTolerance;
  size_t cases = 0;
  std::vector<std::string> bad;
  auto expect = [&](const std::string &name, double got, double want) {
    ++cases;
    if (!(std::abs(got - want) <= kTolerance)) bad.push_back(name);
  };
  for (const auto &f : fixtures::BleuCases()) expect("bleu/" + f.name, Bleu(f.hyps, f.refs), f.expected);
  for (const auto &f : fixtures::TerCases()) expect("ter/" + f.name, Ter(f.hyps, f.refs), f.expected);
  for (const auto &f : fixtures::ChrfCases()) {
    expect("chrf/" + f.name, ChrfPlusPlus(f.hyps, f.refs), f.expected);
  }
  for (const auto &f : fixtures::StrictCases()) {
    PrecisionRecall pr = StrictTripleMatch(f.hyps, f.refs);
    expect("strict/" + f.name + "/p", pr.precision, f.precision);
    expect("strict/" + f.name + "/r", pr.recall, f.recall);
    expect("strict/" + f.name + "/f1", pr.f1, f.f1);
  }
  return Check(bad.empty(), Fmt("%zu fixture values, %zu mismatches%s%s", cases, bad.size(),
                                bad.empty() ? "" : ", first ", bad.empty() ? "" : bad[0].c_str()));
}

Outcome BeamDegeneracy() {
  Rng rng(777);
  DecodeConfig cfg;
  cfg.beam_width = 1;
  cfg.repetition_penalty = 1.0;
  cfg.max_new_tokens = 12;
  size_t mismatches = 0;
  for (int model = 0; model < 4; ++model) {
    ModelParams p = testing_util::RandomSmallModel(rng, 20 + rng.UniformInt(10));
    for (int i = 0; i < 25; ++i) {
      TokenSequence src = testing_util::RandomContent(rng, p.config.vocab_size, 1, 8);
      if (Generate(p, src, cfg).ids() !=
          testing_util::GreedyDecode(p, src.ids(), cfg.max_new_tokens)) {
        ++mismatches;
      }
    }
  }
  return Check(mismatches == 0, Fmt("%zu mismatches in 100 inputs", mismatches));
}

Outcome CrawlerDiscipline() {
  const std::vector<std::string> trace = {"Q1", "Q3", "Q2", "Q4", "Q5"};
  Crawler dfs(crawl_fixture::FixtureConfig({{"Q1", "Alpha"}}));
  const auto records = dfs.Crawl();
  Crawler chain(crawl_fixture::FixtureConfig({{"Q10", "Chain 0"}}));
  const auto chain_records = chain.Crawl();
  std::vector<std::string> order;
  size_t max_depth = 0;
  bool unique = true;
  for (const auto *set : {&records, &chain_records}) {
    std::set<std::string> ids;
    for (const auto &r : *set) {
      unique = unique && ids.insert(r.entity_id).second;
      max_depth = std::max(max_depth, r.depth);
    }
  }
  for (const auto &r : records) order.push_back(r.entity_id);
  const bool order_ok = order == trace;
  return Check(order_ok && max_depth <= 5 && unique && chain_records.size() == 6,
               Fmt("order %s, max depth %zu, chain visits %zu, %s", order_ok ? "matches" : "differs",
                   max_depth, chain_records.size(), unique ? "no revisits" : "revisits"));
}

// Candidate files for one task under the test directory.
std::vector<fs::path> TestFiles(const fs::path &test_dir, const std::string &marker) {
  std::vector<fs::path> all, marked;
  for (const auto &e : fs::recursive_directory_iterator(test_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".xml") continue;
    all.push_back(e.path());
    if (e.path().filename().string().find(marker) != std::string::npos) marked.push_back(e.path());
  }
  std::sort(all.begin(), all.end());
  std::sort(marked.begin(), marked.end());
  return marked.empty() ? all : marked;
}

ParallelCorpus LoadFiles(const std::vector<fs::path> &files, SplitTag split) {
  ParallelCorpus c;
  for (const auto &f : files) {
    ParallelCorpus part = LoadParallel(f.string(), CorpusFormat::kWebNlgXml, split);
    c.examples.insert(c.examples.end(), part.examples.begin(), part.examples.end());
    c.skipped += part.skipped;
  }
  return c;
}

Outcome DataAccounting() {
  const char *root = std::getenv("KGCYCLE_WEBNLG_DIR");
  if (root == nullptr || *root == '\0') {
    return {Verdict::kSkip, "KGCYCLE_WEBNLG_DIR not set"};
  }
  const fs::path dir(root);
  if (!fs::is_directory(dir / "train") || !fs::is_directory(dir / "test")) {
    return {Verdict::kFail, std::string("expected train/ and test/ under ") + root};
  }
  ParallelCorpus train = LoadParallel((dir / "train").string(), CorpusFormat::kWebNlgXml,
                                      SplitTag::kTrain);
  ParallelCorpus g2t = LoadFiles(TestFiles(dir / "test", "rdf-to-text"), SplitTag::kTest);
  ParallelCorpus t2g = LoadFiles(TestFiles(dir / "test", "semantic-parsing"), SplitTag::kTest);
  AssignTestSplits(train, &g2t);
  AssignTestSplits(train, &t2g);
  SplitCounts a = CountGraphToTextInstances(g2t);
  SplitCounts b = CountTextToGraphInstances(t2g);
  const bool ok = a.seen_categories == 490 && a.unseen_entities == 393 &&
                  a.unseen_categories == 896 && b.seen_categories == 606 &&
                  b.unseen_entities == 457 && b.unseen_categories == 1092;
  return Check(ok, Fmt("G2T %zu/%zu/%zu, T2G %zu/%zu/%zu, skipped entries %zu/%zu",
                       a.seen_categories, a.unseen_entities, a.unseen_categories,
                       b.seen_categories, b.unseen_entities, b.unseen_categories, g2t.skipped,
                       t2g.skipped));
}

Outcome Determinism() {
  Timer timer;
  toy::Workspace ws = toy::MakeWorkspace("acceptance_determinism");
  std::ostringstream sink;
  std::streambuf *saved = std::cout.rdbuf(sink.rdbuf());
  const std::string a = toy::RunPipeline(ws, ws.Path("run_a"), 11);
  const std::string b = toy::RunPipeline(ws, ws.Path("run_b"), 11);
  std::cout.rdbuf(saved);
  if (a.empty() || b.empty()) return {Verdict::kFail, "a pipeline step failed"};
  return Check(a == b, Fmt("reports %s (%zu bytes), %.1fs", a == b ? "identical" : "differ",
                           a.size(), timer.Seconds()));
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace kgcycle::acceptance

int main(int argc, char **argv) {
  using namespace kgcycle::acceptance;
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria = {
      {1, "gradient check", GradientCheck},
      {2, "overfit eight pairs", OverfitCriterion},
      {3, "cycle descent", CycleDescent},
      {4, "cycle loss identity", CycleIdentity},
      {5, "codec round trip", CodecRoundTrip},
      {6, "metric oracles", MetricOracles},
      {7, "beam degeneracy", BeamDegeneracy},
      {8, "crawler discipline", CrawlerDiscipline},
      {9, "WebNLG test accounting", DataAccounting},
      {10, "pipeline determinism", Determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto &c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const char *tag = o.verdict == Verdict::kPass   ? "PASS"
                      : o.verdict == Verdict::kFail ? "FAIL"
                                                    : "SKIP";
    if (o.verdict == Verdict::kFail) ++failures;
    std::printf("%s criterion %d (%s): %s\n", tag, c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
