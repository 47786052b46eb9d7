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

// Triples, knowledge graphs and their single-line linearized form:
//
//   <S> subject <P> predicate <O> object <S> subject <P> ...
//
// plus the task-token prefixes that tell the multi-task model which
// direction it is asked to translate in.

#ifndef KGCYCLE_GRAPH_CODEC_H_
#define KGCYCLE_GRAPH_CODEC_H_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "kgcycle/util.h"

namespace kgcycle {

class CodecError : public Error {
 public:
  using Error::Error;
};

// Raised by ParseGraph when no complete <S> <P> <O> block is present.
class NoTriplesRecoverable : public CodecError {
 public:
  using CodecError::CodecError;
};

inline constexpr std::string_view kSubjectMarker = "<S>";
inline constexpr std::string_view kPredicateMarker = "<P>";
inline constexpr std::string_view kObjectMarker = "<O>";
inline constexpr std::array<std::string_view, 3> kDelimiters = {
    kSubjectMarker, kPredicateMarker, kObjectMarker};

inline constexpr size_t kMinTriples = 1;
inline constexpr size_t kMaxTriples = 6;

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  bool operator==(const Triple &) const = default;
  auto operator<=>(const Triple &) const = default;
};

// Builds a triple with trimmed fields. Throws CodecError when a field is
// blank, contains a delimiter, or contains a tab or line break.
Triple MakeTriple(std::string_view subject, std::string_view predicate,
                  std::string_view object);

// Throws CodecError if the triple violates the field invariants.
void ValidateTriple(const Triple &triple);

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Throws CodecError unless 1..6 valid triples are given.
  explicit KnowledgeGraph(std::vector<Triple> triples);

  const std::vector<Triple> &triples() const { return triples_; }
  size_t size() const { return triples_.size(); }

  // Order-exact comparison. Metrics use set semantics instead.
  bool operator==(const KnowledgeGraph &) const = default;

 private:
  std::vector<Triple> triples_;
};

enum class Task { kGraphToText, kTextToGraph };

struct TaskToken {
  Task task;
  std::string_view surface;
};

inline constexpr TaskToken kGenerateText = {Task::kGraphToText,
                                            "generate text:"};
inline constexpr TaskToken kGenerateGraph = {Task::kTextToGraph,
                                             "generate graph:"};

const TaskToken &TaskTokenFor(Task task);

// True if s begins with any task-token surface.
bool HasTaskPrefix(std::string_view s);

std::string LinearizeGraph(const KnowledgeGraph &graph);

// Parses model output. Complete blocks are collected left to right;
// incomplete fragments are dropped and fields are trimmed. At most 6
// triples are kept. Throws NoTriplesRecoverable if nothing is complete.
KnowledgeGraph ParseGraph(std::string_view s);

// Prepends the task-token surface and a single space. Throws CodecError if
// x already starts with a task-token surface.
std::string PrefixTask(const TaskToken &token, std::string_view x);

}  // namespace kgcycle

#endif  // KGCYCLE_GRAPH_CODEC_H_
