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

// Corpus-level text metrics (BLEU, TER, chrF++) and strict triple matching.
// Text is tokenized on whitespace only.

#ifndef KGCYCLE_METRICS_H_
#define KGCYCLE_METRICS_H_

#include <optional>
#include <string>
#include <vector>

#include "kgcycle/corpus.h"
#include "kgcycle/graph_codec.h"

namespace kgcycle {

class MetricError : public Error {
 public:
  using Error::Error;
};

using References = std::vector<std::vector<std::string>>;

// BLEU-4 with clipped multi-reference counts and the closest reference
// length for the brevity penalty. Unsmoothed: 0 when any order has no match.
double Bleu(const std::vector<std::string> &hypotheses, const References &references);

// Shift search limits.
inline constexpr size_t kTerMaxShiftSize = 10;
inline constexpr size_t kTerMaxShiftDistance = 50;

// Edits of one hypothesis against one reference: greedy block shifts, each
// taken while it lowers the word edit distance, plus the final distance.
size_t TerEdits(const std::vector<std::string> &hyp, const std::vector<std::string> &ref);

// Total edits over total average reference length; per segment the edits
// are the minimum over its references.
double Ter(const std::vector<std::string> &hypotheses, const References &references);

// chrF++ of one segment against one reference: character 1..6-grams with
// whitespace removed and word 1..2-grams, precision and recall averaged over
// the orders with at least one n-gram on either side, beta = 2.
double ChrfPlusPlusSegment(const std::string &hyp, const std::string &ref);

// Mean over segments of the best score against any reference.
double ChrfPlusPlus(const std::vector<std::string> &hypotheses,
                    const References &references);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t matched = 0;
  size_t predicted = 0;
  size_t gold = 0;
};

struct MatchOptions {
  // Compare fields byte for byte instead of case-folded and
  // whitespace-collapsed.
  bool byte_exact = false;
};

// Micro-averaged set matching of triples; an empty hypothesis slot predicts
// nothing.
PrecisionRecall StrictTripleMatch(const std::vector<std::optional<KnowledgeGraph>> &hyps,
                                  const std::vector<KnowledgeGraph> &refs,
                                  const MatchOptions &options = {});

struct TextScores {
  double bleu = 0.0;
  double ter = 0.0;
  double chrfpp = 0.0;
  size_t count = 0;
};

// Per report column: "overall" then the test splits that have instances.
template <typename Scores>
struct EvalColumn {
  std::string split;
  Scores scores;
};

struct TextEvalReport {
  std::vector<EvalColumn<TextScores>> columns;
};

struct GraphEvalReport {
  std::vector<EvalColumn<PrecisionRecall>> columns;
};

// `splits`, when given, holds one tag per instance.
TextEvalReport EvaluateText(const std::vector<std::string> &hypotheses,
                            const References &references,
                            const std::vector<SplitTag> *splits = nullptr);
GraphEvalReport EvaluateGraphs(const std::vector<std::optional<KnowledgeGraph>> &hyps,
                               const std::vector<KnowledgeGraph> &refs,
                               const std::vector<SplitTag> *splits = nullptr,
                               const MatchOptions &options = {});

// Lines of "split<TAB>metric<TAB>value" with values to 4 decimals.
std::vector<std::string> FormatReport(const TextEvalReport &report);
std::vector<std::string> FormatReport(const GraphEvalReport &report);

// Table with one row per metric and one column per split, tab separated,
// headed by "metric" and the split names.
std::vector<std::string> FormatReportTable(const TextEvalReport &report);
std::vector<std::string> FormatReportTable(const GraphEvalReport &report);

// Full-precision JSON keyed by split.
std::string ReportJson(const TextEvalReport &report);
std::string ReportJson(const GraphEvalReport &report);

}  // namespace kgcycle

#endif  // KGCYCLE_METRICS_H_
