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

// Metric fixtures with values tabulated by hand. The working for each value
// is in the comment above it.

#ifndef KGCYCLE_TESTS_METRIC_FIXTURES_H_
#define KGCYCLE_TESTS_METRIC_FIXTURES_H_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kgcycle/graph_codec.h"
#include "kgcycle/metrics.h"

namespace kgcycle::fixtures {

inline constexpr double kTolerance = 1e-9;

struct TextCase {
  std::string name;
  std::vector<std::string> hyps;
  References refs;
  double expected;
};

struct GraphCase {
  std::string name;
  std::vector<std::optional<KnowledgeGraph>> hyps;
  std::vector<KnowledgeGraph> refs;
  double precision, recall, f1;
};

inline std::vector<TextCase> BleuCases() {
  return {
      {"identical corpus", {"the cat sat on the mat", "a b c d e"},
       {{"the cat sat on the mat"}, {"a b c d e"}}, 1.0},
      {"no shared unigram", {"x y z w"}, {{"a b c d"}}, 0.0},
      // Clipped matches per order: 5/6 (only one "the" in the reference),
      // 3/5 (the cat, cat sat, sat on), 2/4 (the cat sat, cat sat on),
      // 1/3 (the cat sat on). Equal lengths, so no brevity penalty.
      {"cat on mat", {"the cat sat on the mat"}, {{"the cat sat on a mat"}},
       std::pow(5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0, 0.25)},
      // All precisions 1; c = 4, r = 5 gives BP = exp(1 - 5/4).
      {"brevity penalty", {"a b c d"}, {{"a b c d e"}}, std::exp(-0.25)},
      // Second reference "a b c d" is the closest length (4 vs 6) and
      // matches everything.
      {"closest reference", {"a b c d"}, {{"a b c d e f", "a b c d"}}, 1.0},
  };
}

inline std::vector<TextCase> TerCases() {
  return {
      {"identical", {"a b c d"}, {{"a b c d"}}, 0.0},
      // One substitution (e -> d) over 4 reference words.
      {"substitution", {"a b c e"}, {{"a b c d"}}, 0.25},
      // Moving the block "a b" to the front leaves no further edits.
      {"block shift", {"c d a b"}, {{"a b c d"}}, 0.25},
      // Minimum edits over references is 1 (vs "a b"); the average
      // reference length is (2 + 4) / 2 = 3.
      {"multi reference", {"a x"}, {{"a b", "a b c d"}}, 1.0 / 3.0},
      // Segment edits 1 and 2 over reference words 4 + 2.
      {"corpus", {"a b c e", "p"}, {{"a b c d"}, {"q r"}}, 3.0 / 6.0},
  };
}

inline std::vector<TextCase> ChrfCases() {
  return {
      {"identical", {"the cat", "abc"}, {{"the cat"}, {"abc"}}, 1.0},
      {"disjoint", {"xyz"}, {{"abc"}}, 0.0},
      // Orders with n-grams: char 1 (P = R = 2/3), char 2 (1/2), char 3 (0)
      // and word 1 (0). Averages P = R = (2/3 + 1/2) / 4 = 7/24, so F = 7/24.
      {"cat cab", {"cat"}, {{"cab"}}, 7.0 / 24.0},
      // char 1: P = 1, R = 2/3; char 2: P = 1, R = 1/2; char 3: P = 0,
      // R = 0; word 1: 0, 0. P = 1/2, R = 7/24.
      // F = 5 * P * R / (4P + R) = (35/48) / (55/24) = 7/22.
      {"ab abc", {"ab"}, {{"abc"}}, 7.0 / 22.0},
      // Segment mean of 1 and 7/24; the best of two references counts.
      {"segment mean", {"abc", "cat"}, {{"abc"}, {"zzz", "cab"}},
       (1.0 + 7.0 / 24.0) / 2.0},
  };
}

inline std::vector<GraphCase> StrictCases() {
  const Triple abc = MakeTriple("a", "b", "c");
  const Triple def = MakeTriple("d", "e", "f");
  const Triple xyz = MakeTriple("x", "y", "z");
  return {
      {"equal", {KnowledgeGraph({abc, def})}, {KnowledgeGraph({abc, def})}, 1.0, 1.0, 1.0},
      // One of two predicted and one of two gold triples match.
      {"overlap", {KnowledgeGraph({abc, def})}, {KnowledgeGraph({abc, xyz})}, 0.5, 0.5, 0.5},
      {"case folded", {KnowledgeGraph({MakeTriple("A", "b", "c")})},
       {KnowledgeGraph({abc})}, 1.0, 1.0, 1.0},
      // Micro-average: matched 1, predicted 1, gold 1 + 2 = 3; the empty
      // slot predicts nothing. F1 = 2 * 1 * (1/3) / (4/3) = 1/2.
      {"empty slot", {KnowledgeGraph({abc}), std::nullopt},
       {KnowledgeGraph({abc}), KnowledgeGraph({def, xyz})}, 1.0, 1.0 / 3.0, 0.5},
      // Duplicate predictions count once.
      {"duplicates", {KnowledgeGraph({abc, abc})}, {KnowledgeGraph({abc})}, 1.0, 1.0, 1.0},
  };
}

}  // namespace kgcycle::fixtures

#endif  // KGCYCLE_TESTS_METRIC_FIXTURES_H_
