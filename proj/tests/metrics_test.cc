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

#include "kgcycle/metrics.h"

#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "metric_fixtures.h"
#include "toy_domain.h"

namespace kgcycle {
namespace {

using fixtures::kTolerance;

TEST(BleuTest, HandTabulatedFixtures) {
  for (const auto &f : fixtures::BleuCases()) {
    EXPECT_NEAR(Bleu(f.hyps, f.refs), f.expected, kTolerance) << f.name;
  }
}

TEST(BleuTest, Errors) {
  EXPECT_THROW(Bleu({}, {}), MetricError);
  EXPECT_THROW(Bleu({"a"}, {}), MetricError);
  EXPECT_THROW(Bleu({"a"}, {{}}), MetricError);
}

TEST(TerTest, HandTracedFixtures) {
  for (const auto &f : fixtures::TerCases()) {
    EXPECT_NEAR(Ter(f.hyps, f.refs), f.expected, kTolerance) << f.name;
  }
  EXPECT_THROW(Ter({"a"}, {{""}}), MetricError);
}

// Word-level Levenshtein distance, written independently of the library.
size_t Levenshtein(const std::vector<std::string> &a, const std::vector<std::string> &b) {
  std::vector<std::vector<size_t>> d(a.size() + 1, std::vector<size_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

TEST(TerPropertyTest, ShiftsNeverCostMoreThanPlainEdits) {
  Rng rng(17);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> hyp, ref;
    for (size_t i = 0, n = rng.UniformInt(8); i < n; ++i) hyp.push_back(words[rng.UniformInt(5)]);
    for (size_t i = 0, n = 1 + rng.UniformInt(8); i < n; ++i) ref.push_back(words[rng.UniformInt(5)]);
    const size_t edits = TerEdits(hyp, ref);
    EXPECT_LE(edits, Levenshtein(hyp, ref));
    EXPECT_EQ(edits == 0, hyp == ref);
    // Each shift moves words without changing counts, so the bag-of-words
    // difference bounds the edits from below.
    std::map<std::string, long> diff;
    for (const auto &w : hyp) ++diff[w];
    for (const auto &w : ref) --diff[w];
    long extra = 0, missing = 0;
    for (const auto &[w, c] : diff) (c > 0 ? extra : missing) += std::labs(c);
    EXPECT_GE(edits, static_cast<size_t>(std::max(extra, missing)));
  }
}

TEST(ChrfTest, HandTabulatedFixtures) {
  for (const auto &f : fixtures::ChrfCases()) {
    EXPECT_NEAR(ChrfPlusPlus(f.hyps, f.refs), f.expected, kTolerance) << f.name;
  }
}

TEST(ChrfTest, SegmentEdgeCases) {
  EXPECT_DOUBLE_EQ(ChrfPlusPlusSegment("", ""), 1.0);
  EXPECT_DOUBLE_EQ(ChrfPlusPlusSegment("", "abc"), 0.0);
  // Whitespace does not count for character n-grams.
  EXPECT_NEAR(ChrfPlusPlusSegment("ab c", "abc"),
              ChrfPlusPlusSegment("a bc", "abc"), kTolerance);
}

TEST(StrictTripleMatchTest, Fixtures) {
  for (const auto &f : fixtures::StrictCases()) {
    PrecisionRecall pr = StrictTripleMatch(f.hyps, f.refs);
    EXPECT_NEAR(pr.precision, f.precision, kTolerance) << f.name;
    EXPECT_NEAR(pr.recall, f.recall, kTolerance) << f.name;
    EXPECT_NEAR(pr.f1, f.f1, kTolerance) << f.name;
  }
}

TEST(StrictTripleMatchTest, ByteExactModeAndErrors) {
  std::vector<std::optional<KnowledgeGraph>> hyp = {KnowledgeGraph({MakeTriple("A", "b", "c")})};
  std::vector<KnowledgeGraph> ref = {KnowledgeGraph({MakeTriple("a", "b", "c")})};
  EXPECT_DOUBLE_EQ(StrictTripleMatch(hyp, ref).f1, 1.0);
  EXPECT_DOUBLE_EQ(StrictTripleMatch(hyp, ref, {.byte_exact = true}).f1, 0.0);
  EXPECT_THROW(StrictTripleMatch(hyp, {}), MetricError);
}

std::optional<KnowledgeGraph> MaybeGraph(Rng &rng) {
  if (rng.UniformInt(5) == 0) return std::nullopt;
  return toy::RandomGraph(rng, 4);
}

TEST(MetricPropertyTest, PermutationInvarianceAndSymmetry) {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t n = 1 + rng.UniformInt(6);
    std::vector<std::string> hyps;
    References refs;
    std::vector<std::optional<KnowledgeGraph>> ghyp;
    std::vector<KnowledgeGraph> gref;
    for (size_t i = 0; i < n; ++i) {
      KnowledgeGraph g = toy::RandomGraph(rng, 3);
      hyps.push_back(toy::Verbalize(toy::RandomGraph(rng, 3)));
      refs.push_back({toy::Verbalize(g)});
      ghyp.push_back(MaybeGraph(rng));
      gref.push_back(g);
    }
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    rng.Shuffle(perm);
    std::vector<std::string> phyps;
    References prefs;
    std::vector<std::optional<KnowledgeGraph>> pghyp;
    std::vector<KnowledgeGraph> pgref;
    for (size_t i : perm) {
      phyps.push_back(hyps[i]);
      prefs.push_back(refs[i]);
      pghyp.push_back(ghyp[i]);
      pgref.push_back(gref[i]);
    }
    EXPECT_NEAR(Bleu(hyps, refs), Bleu(phyps, prefs), 1e-12);
    EXPECT_NEAR(Ter(hyps, refs), Ter(phyps, prefs), 1e-12);
    EXPECT_NEAR(ChrfPlusPlus(hyps, refs), ChrfPlusPlus(phyps, prefs), 1e-12);
    PrecisionRecall a = StrictTripleMatch(ghyp, gref);
    PrecisionRecall b = StrictTripleMatch(pghyp, pgref);
    EXPECT_EQ(a.matched, b.matched);
    EXPECT_EQ(a.predicted, b.predicted);

    // Swapping roles exchanges precision and recall.
    std::vector<std::optional<KnowledgeGraph>> swapped_hyp;
    std::vector<KnowledgeGraph> swapped_ref;
    bool all_present = true;
    for (size_t i = 0; i < n; ++i) {
      if (!ghyp[i]) all_present = false;
    }
    if (all_present) {
      for (size_t i = 0; i < n; ++i) {
        swapped_hyp.push_back(gref[i]);
        swapped_ref.push_back(*ghyp[i]);
      }
      PrecisionRecall s = StrictTripleMatch(swapped_hyp, swapped_ref);
      EXPECT_NEAR(s.precision, a.recall, 1e-12);
      EXPECT_NEAR(s.recall, a.precision, 1e-12);
    }
    EXPECT_LE(a.f1, std::min(1.0, 2.0 * std::min(a.precision, a.recall) /
                                     (a.precision + a.recall + 1e-12) + 1e-12));

    EXPECT_LE(Bleu(hyps, refs), 1.0);
    std::vector<std::string> firsts;
    for (const auto &r : refs) firsts.push_back(r[0]);
    EXPECT_DOUBLE_EQ(Bleu(firsts, refs), 1.0);
    EXPECT_DOUBLE_EQ(Ter(firsts, refs), 0.0);
    EXPECT_DOUBLE_EQ(ChrfPlusPlus(firsts, refs), 1.0);
  }
}

TEST(ReportTest, ColumnsAndFormatting) {
  std::vector<std::string> hyps = {"a b c d", "e f g h", "x y z w"};
  References refs = {{"a b c d"}, {"e f g h"}, {"x y z w"}};
  TextEvalReport overall = EvaluateText(hyps, refs);
  ASSERT_EQ(overall.columns.size(), 1u);
  std::vector<std::string> lines = FormatReport(overall);
  EXPECT_EQ(lines, (std::vector<std::string>{"overall\tbleu\t1.0000", "overall\tter\t0.0000",
                                              "overall\tchrf++\t1.0000"}));

  std::vector<SplitTag> tags = {SplitTag::kTestSeenCategories,
                                SplitTag::kTestUnseenCategories,
                                SplitTag::kTestUnseenCategories};
  TextEvalReport split = EvaluateText(hyps, refs, &tags);
  ASSERT_EQ(split.columns.size(), 3u);
  EXPECT_EQ(split.columns[1].split, "seen_categories");
  EXPECT_EQ(split.columns[2].split, "unseen_categories");
  EXPECT_EQ(split.columns[2].scores.count, 2u);
  EXPECT_EQ(FormatReportTable(split),
            (std::vector<std::string>{"metric\toverall\tseen_categories\tunseen_categories",
                                      "bleu\t1.0000\t1.0000\t1.0000",
                                      "ter\t0.0000\t0.0000\t0.0000",
                                      "chrf++\t1.0000\t1.0000\t1.0000"}));
  auto j = nlohmann::json::parse(ReportJson(split));
  EXPECT_DOUBLE_EQ(j["overall"]["bleu"].get<double>(), 1.0);

  std::vector<std::optional<KnowledgeGraph>> gh = {std::nullopt};
  std::vector<KnowledgeGraph> gr = {KnowledgeGraph({MakeTriple("a", "b", "c")})};
  GraphEvalReport graphs = EvaluateGraphs(gh, gr);
  EXPECT_EQ(FormatReport(graphs)[0], "overall\tf1\t0.0000");
}

}  // namespace
}  // namespace kgcycle
