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

// Parallel graph/text corpora, non-parallel pools, supervised subsetting and
// per-iteration pool draws.

#ifndef KGCYCLE_CORPUS_H_
#define KGCYCLE_CORPUS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kgcycle/graph_codec.h"
#include "kgcycle/util.h"

namespace kgcycle {

class CorpusError : public Error {
 public:
  using Error::Error;
};

// kTest marks test data whose seen/unseen split is not yet known; see
// AssignTestSplits().
enum class SplitTag {
  kTrain,
  kDev,
  kTestSeenCategories,
  kTestUnseenEntities,
  kTestUnseenCategories,
  kTest,
};

std::string_view SplitTagName(SplitTag tag);
// Accepts the canonical names plus common spellings ("seen", "unseen
// categories", "testdata_unseen_entities", ...).
std::optional<SplitTag> ParseSplitTag(std::string_view name);
bool IsTestSplit(SplitTag tag);

// Report columns in table order.
inline constexpr std::array<SplitTag, 3> kTestSplits = {
    SplitTag::kTestSeenCategories, SplitTag::kTestUnseenEntities,
    SplitTag::kTestUnseenCategories};

struct ParallelExample {
  KnowledgeGraph graph;
  std::string text;
  std::string category;
  SplitTag split = SplitTag::kTrain;
  // Examples sharing an id come from one entry with several references.
  std::string entry_id;

  bool operator==(const ParallelExample &) const = default;
};

struct ParallelCorpus {
  std::vector<ParallelExample> examples;
  size_t skipped = 0;  // entries rejected by the loader

  std::vector<ParallelExample> WithSplit(SplitTag tag) const;
  bool operator==(const ParallelCorpus &) const = default;
};

enum class CorpusFormat { kWebNlgXml, kTsvLines };

std::optional<CorpusFormat> ParseCorpusFormat(std::string_view name);

// Loads a file, or every *.xml / *.tsv file below a directory in sorted
// path order. Split tags come from, in order: `split_override`, an entry
// attribute, the file path ("train", "dev", "test" components).
ParallelCorpus LoadParallel(const std::string &path, CorpusFormat format,
                            std::optional<SplitTag> split_override = {});

// Parses one WebNLG benchmark document; `source` names it in diagnostics.
ParallelCorpus ParseWebNlgXml(const std::string &xml, const std::string &source,
                              SplitTag default_split);

// TSV line: linearized graph, text, category, split name.
ParallelCorpus ParseTsvLines(const std::string &contents, const std::string &source,
                             std::optional<SplitTag> split_override = {});
std::string FormatTsvLine(const ParallelExample &example);

// Resolves kTest examples against the training data: an unseen category
// gives kTestUnseenCategories; a seen category with every subject and object
// seen in training gives kTestSeenCategories; otherwise kTestUnseenEntities.
void AssignTestSplits(const ParallelCorpus &train, ParallelCorpus *test);

// Test instance counts per task: G2T counts entries, T2G counts texts.
struct SplitCounts {
  size_t seen_categories = 0;
  size_t unseen_entities = 0;
  size_t unseen_categories = 0;
};
SplitCounts CountGraphToTextInstances(const ParallelCorpus &corpus);
SplitCounts CountTextToGraphInstances(const ParallelCorpus &corpus);

// Uniform sample without replacement of round(fraction * N) train examples;
// other splits pass through. Output keeps input order.
ParallelCorpus SubsetSupervised(const ParallelCorpus &corpus, double fraction,
                                uint64_t seed);

enum class PoolKind { kGraphs, kText };

// Deduplicated pool of graphs (stored as linearized lines) or texts.
class UnlabeledCorpus {
 public:
  UnlabeledCorpus(PoolKind kind, std::string provenance)
      : kind_(kind), provenance_(std::move(provenance)) {}

  // Returns false when an item with the same normalized form exists.
  bool Add(const std::string &item);
  bool AddGraph(const KnowledgeGraph &graph) { return Add(LinearizeGraph(graph)); }

  PoolKind kind() const { return kind_; }
  const std::string &provenance() const { return provenance_; }
  const std::vector<std::string> &items() const { return items_; }
  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  // One item per line.
  void Save(const std::string &path) const;
  static UnlabeledCorpus Load(const std::string &path, PoolKind kind);

  bool operator==(const UnlabeledCorpus &other) const {
    return kind_ == other.kind_ && items_ == other.items_;
  }

 private:
  PoolKind kind_;
  std::string provenance_;
  std::vector<std::string> items_;
  std::unordered_set<std::string> keys_;  // normalized forms
};

// Pools built from a parallel corpus with the alignment discarded.
UnlabeledCorpus GraphPoolFrom(const ParallelCorpus &corpus, std::string provenance);
UnlabeledCorpus TextPoolFrom(const ParallelCorpus &corpus, std::string provenance);

// Items of draw `iteration`. The pool is consumed as a sequence of seeded
// permutations; draw i takes positions [i*size, (i+1)*size). When a
// permutation runs out mid-draw, the next one is started with the items
// already in the draw moved to its end, so a draw never repeats an item.
// A size above the pool size narrows to one full shuffled pool with a
// warning.
std::vector<std::string> DrawIteration(const UnlabeledCorpus &pool, size_t size,
                                       size_t iteration, uint64_t seed);
// Pool indices of the same draw.
std::vector<size_t> DrawIterationIndices(size_t pool_size, size_t size,
                                         size_t iteration, uint64_t seed);

}  // namespace kgcycle

#endif  // KGCYCLE_CORPUS_H_
