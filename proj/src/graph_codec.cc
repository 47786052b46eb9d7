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

#include "kgcycle/graph_codec.h"

#include <optional>

namespace kgcycle {

namespace {

void ValidateField(std::string_view field, const char *name) {
  if (IsBlank(field)) {
    throw CodecError(std::string("triple ") + name + " is empty");
  }
  for (auto delimiter : kDelimiters) {
    if (field.find(delimiter) != std::string_view::npos) {
      throw CodecError(std::string("triple ") + name +
                       " contains reserved delimiter " +
                       std::string(delimiter) + ": " + std::string(field));
    }
  }
  if (field.find_first_of("\t\r\n") != std::string_view::npos) {
    throw CodecError(std::string("triple ") + name +
                     " contains a tab or line break");
  }
}

}  // namespace

Triple MakeTriple(std::string_view subject, std::string_view predicate,
                  std::string_view object) {
  Triple triple{Trim(subject), Trim(predicate), Trim(object)};
  ValidateTriple(triple);
  return triple;
}

void ValidateTriple(const Triple &triple) {
  ValidateField(triple.subject, "subject");
  ValidateField(triple.predicate, "predicate");
  ValidateField(triple.object, "object");
  if (triple.subject != Trim(triple.subject) ||
      triple.predicate != Trim(triple.predicate) ||
      triple.object != Trim(triple.object)) {
    throw CodecError("triple fields must not have surrounding whitespace");
  }
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples)
    : triples_(std::move(triples)) {
  if (triples_.size() < kMinTriples || triples_.size() > kMaxTriples) {
    throw CodecError("knowledge graph must have 1 to 6 triples, got " +
                     std::to_string(triples_.size()));
  }
  for (const auto &triple : triples_) ValidateTriple(triple);
}

const TaskToken &TaskTokenFor(Task task) {
  return task == Task::kGraphToText ? kGenerateText : kGenerateGraph;
}

bool HasTaskPrefix(std::string_view s) {
  return s.starts_with(kGenerateText.surface) ||
         s.starts_with(kGenerateGraph.surface);
}

std::string LinearizeGraph(const KnowledgeGraph &graph) {
  if (graph.size() < kMinTriples || graph.size() > kMaxTriples) {
    throw CodecError("cannot linearize a graph with " +
                     std::to_string(graph.size()) + " triples");
  }
  std::string out;
  for (const auto &triple : graph.triples()) {
    ValidateTriple(triple);
    if (!out.empty()) out += ' ';
    out += kSubjectMarker;
    out += ' ';
    out += triple.subject;
    out += ' ';
    out += kPredicateMarker;
    out += ' ';
    out += triple.predicate;
    out += ' ';
    out += kObjectMarker;
    out += ' ';
    out += triple.object;
  }
  return out;
}

KnowledgeGraph ParseGraph(std::string_view s) {
  // Split into (marker index, following text) segments.
  struct Segment {
    int marker;
    std::string_view text;
  };
  std::vector<Segment> segments;
  size_t pos = 0;
  int current = -1;
  size_t text_start = 0;
  while (pos < s.size()) {
    int found = -1;
    for (int m = 0; m < 3; ++m) {
      if (s.substr(pos).starts_with(kDelimiters[m])) {
        found = m;
        break;
      }
    }
    if (found < 0) {
      ++pos;
      continue;
    }
    if (current >= 0) {
      segments.push_back({current, s.substr(text_start, pos - text_start)});
    }
    current = found;
    pos += kDelimiters[found].size();
    text_start = pos;
  }
  if (current >= 0) segments.push_back({current, s.substr(text_start)});

  std::vector<Triple> triples;
  std::optional<std::string_view> subject, predicate;
  for (const auto &segment : segments) {
    switch (segment.marker) {
      case 0:
        subject = segment.text;
        predicate.reset();
        break;
      case 1:
        if (subject && !predicate) {
          predicate = segment.text;
        } else {
          subject.reset();
          predicate.reset();
        }
        break;
      case 2:
        if (subject && predicate) {
          try {
            triples.push_back(MakeTriple(*subject, *predicate, segment.text));
          } catch (const CodecError &) {
            // Fields that fail validation make the block incomplete.
          }
        }
        subject.reset();
        predicate.reset();
        break;
    }
    if (triples.size() == kMaxTriples) break;
  }
  if (triples.empty()) {
    throw NoTriplesRecoverable("no complete <S> <P> <O> block in: " +
                               std::string(s.substr(0, 80)));
  }
  return KnowledgeGraph(std::move(triples));
}

std::string PrefixTask(const TaskToken &token, std::string_view x) {
  if (HasTaskPrefix(x)) {
    throw CodecError("input already carries a task prefix: " +
                     std::string(x.substr(0, 40)));
  }
  std::string out(token.surface);
  out += ' ';
  out += x;
  return out;
}

}  // namespace kgcycle
