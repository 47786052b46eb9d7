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

#include "kgcycle/corpus.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

namespace kgcycle {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string Canonical(std::string_view name) {
  std::string out;
  for (char c : AsciiLower(Trim(name))) out += (c == ' ' || c == '-') ? '_' : c;
  return out;
}

// WebNLG node label: underscores become spaces, enclosing quotes go.
std::string CleanWebNlgField(std::string field) {
  std::replace(field.begin(), field.end(), '_', ' ');
  field = CollapseWhitespace(field);
  if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
    field = Trim(field.substr(1, field.size() - 2));
  }
  return field;
}

Triple ParseMtriple(const std::string &line) {
  std::vector<std::string> parts = Split(line, '|');
  if (parts.size() != 3) throw CodecError("mtriple must have 3 fields: " + line);
  return MakeTriple(CleanWebNlgField(parts[0]), CleanWebNlgField(parts[1]),
                    CleanWebNlgField(parts[2]));
}

SplitTag SplitFromPath(const fs::path &path) {
  for (const auto &part : path) {
    const std::string p = AsciiLower(part.string());
    if (p == "train") return SplitTag::kTrain;
    if (p == "dev") return SplitTag::kDev;
  }
  const std::string file = AsciiLower(path.filename().string());
  if (file.find("test") != std::string::npos) return SplitTag::kTest;
  for (const auto &part : path) {
    if (AsciiLower(part.string()) == "test") return SplitTag::kTest;
  }
  if (file.find("dev") != std::string::npos) return SplitTag::kDev;
  return SplitTag::kTrain;
}

void Append(ParallelCorpus &into, ParallelCorpus &&from) {
  for (auto &e : from.examples) into.examples.push_back(std::move(e));
  into.skipped += from.skipped;
}

std::vector<size_t> Permutation(size_t n, uint64_t seed, uint64_t round) {
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  Rng rng(DeriveSeed(seed, round, 0x64726177));
  rng.Shuffle(perm);
  return perm;
}

}  // namespace

std::string_view SplitTagName(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kDev:
      return "dev";
    case SplitTag::kTestSeenCategories:
      return "test_seen_categories";
    case SplitTag::kTestUnseenEntities:
      return "test_unseen_entities";
    case SplitTag::kTestUnseenCategories:
      return "test_unseen_categories";
    case SplitTag::kTest:
      return "test";
  }
  return "unknown";
}

std::optional<SplitTag> ParseSplitTag(std::string_view name) {
  std::string c = Canonical(name);
  for (std::string_view prefix : {"testdata_", "test_"}) {
    if (c.starts_with(prefix) && c.size() > prefix.size()) {
      c = c.substr(prefix.size());
      break;
    }
  }
  if (c == "train") return SplitTag::kTrain;
  if (c == "dev" || c == "validation") return SplitTag::kDev;
  if (c == "test") return SplitTag::kTest;
  if (c == "seen" || c == "seen_categories" || c == "seen_category") {
    return SplitTag::kTestSeenCategories;
  }
  if (c == "unseen_entities" || c == "unseen_entity") {
    return SplitTag::kTestUnseenEntities;
  }
  if (c == "unseen" || c == "unseen_categories" || c == "unseen_category") {
    return SplitTag::kTestUnseenCategories;
  }
  return std::nullopt;
}

bool IsTestSplit(SplitTag tag) {
  return tag != SplitTag::kTrain && tag != SplitTag::kDev;
}

std::vector<ParallelExample> ParallelCorpus::WithSplit(SplitTag tag) const {
  std::vector<ParallelExample> out;
  for (const auto &e : examples) {
    if (e.split == tag) out.push_back(e);
  }
  return out;
}

std::optional<CorpusFormat> ParseCorpusFormat(std::string_view name) {
  const std::string c = Canonical(name);
  if (c == "webnlg_xml" || c == "xml") return CorpusFormat::kWebNlgXml;
  if (c == "tsv_lines" || c == "tsv") return CorpusFormat::kTsvLines;
  return std::nullopt;
}

ParallelCorpus ParseWebNlgXml(const std::string &xml, const std::string &source,
                              SplitTag default_split) {
  pt::ptree tree;
  std::istringstream in(xml);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error &e) {
    throw CorpusError(source + ":" + std::to_string(e.line()) + ": malformed XML: " +
                      e.message());
  }
  const auto entries = tree.get_child_optional("benchmark.entries");
  if (!entries) throw CorpusError(source + ": missing benchmark/entries");

  ParallelCorpus corpus;
  size_t entry_index = 0;
  for (const auto &[tag, entry] : *entries) {
    if (tag != "entry") continue;
    ++entry_index;
    const std::string category = Trim(entry.get("<xmlattr>.category", ""));
    const std::string eid =
        entry.get("<xmlattr>.eid", "Id" + std::to_string(entry_index));
    SplitTag split = default_split;
    for (const char *attr : {"<xmlattr>.split", "<xmlattr>.test_category"}) {
      if (auto value = entry.get_optional<std::string>(attr)) {
        if (auto parsed = ParseSplitTag(*value)) split = *parsed;
      }
    }

    std::vector<Triple> triples;
    bool valid = !category.empty();
    if (auto mset = entry.get_child_optional("modifiedtripleset")) {
      for (const auto &[mtag, mtriple] : *mset) {
        if (mtag != "mtriple") continue;
        try {
          triples.push_back(ParseMtriple(mtriple.get_value<std::string>()));
        } catch (const CodecError &) {
          valid = false;
        }
      }
    }
    if (triples.size() < kMinTriples || triples.size() > kMaxTriples) valid = false;

    std::vector<std::string> texts;
    for (const auto &[ltag, lex] : entry) {
      if (ltag != "lex") continue;
      const std::string lang = lex.get("<xmlattr>.lang", "en");
      if (lang != "en") continue;
      std::string text = lex.get_child_optional("text")
                             ? lex.get<std::string>("text")
                             : lex.get_value<std::string>();
      text = CollapseWhitespace(text);
      if (!text.empty()) texts.push_back(std::move(text));
    }
    if (texts.empty()) valid = false;

    if (!valid) {
      spdlog::warn("{}: skipping entry {} ({} triples, {} texts)", source, eid,
                   triples.size(), texts.size());
      ++corpus.skipped;
      continue;
    }
    KnowledgeGraph graph(triples);
    for (auto &text : texts) {
      corpus.examples.push_back({graph, std::move(text), category, split,
                                 source + "#" + eid});
    }
  }
  return corpus;
}

ParallelCorpus ParseTsvLines(const std::string &contents, const std::string &source,
                             std::optional<SplitTag> split_override) {
  ParallelCorpus corpus;
  std::istringstream in(contents);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (IsBlank(line)) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::vector<std::string> cols = Split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) {
      throw CorpusError(where + ": expected 3 or 4 tab-separated columns");
    }
    SplitTag split = SplitTag::kTrain;
    if (cols.size() == 4 && !IsBlank(cols[3])) {
      auto parsed = ParseSplitTag(cols[3]);
      if (!parsed) throw CorpusError(where + ": unknown split '" + cols[3] + "'");
      split = *parsed;
    }
    if (split_override) split = *split_override;
    const std::string text = CollapseWhitespace(cols[1]);
    const std::string category = Trim(cols[2]);
    try {
      KnowledgeGraph graph = ParseGraph(cols[0]);
      if (LinearizeGraph(graph) != Trim(cols[0])) {
        throw CodecError("graph column is not a canonical linearization");
      }
      if (text.empty() || category.empty()) {
        throw CodecError("empty text or category");
      }
      corpus.examples.push_back({std::move(graph), text, category, split, where});
    } catch (const CodecError &e) {
      spdlog::warn("{}: skipping line: {}", where, e.what());
      ++corpus.skipped;
    }
  }
  return corpus;
}

std::string FormatTsvLine(const ParallelExample &example) {
  return LinearizeGraph(example.graph) + "\t" + example.text + "\t" + example.category +
         "\t" + std::string(SplitTagName(example.split));
}

ParallelCorpus LoadParallel(const std::string &path, CorpusFormat format,
                            std::optional<SplitTag> split_override) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    const std::string ext = format == CorpusFormat::kWebNlgXml ? ".xml" : ".tsv";
    for (const auto &entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ext) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  ParallelCorpus corpus;
  for (const auto &file : files) {
    const std::string contents = ReadFile(file.string());
    if (format == CorpusFormat::kWebNlgXml) {
      const SplitTag split = split_override.value_or(SplitFromPath(file));
      Append(corpus, ParseWebNlgXml(contents, file.string(), split));
      if (split_override) {
        for (auto &e : corpus.examples) e.split = *split_override;
      }
    } else {
      Append(corpus, ParseTsvLines(contents, file.string(), split_override));
    }
  }
  if (corpus.examples.empty()) {
    throw CorpusError(path + ": no valid examples (" + std::to_string(corpus.skipped) +
                      " skipped)");
  }
  return corpus;
}

void AssignTestSplits(const ParallelCorpus &train, ParallelCorpus *test) {
  std::set<std::string> categories;
  std::set<std::string> entities;
  for (const auto &e : train.examples) {
    if (e.split != SplitTag::kTrain) continue;
    categories.insert(e.category);
    for (const auto &t : e.graph.triples()) {
      entities.insert(t.subject);
      entities.insert(t.object);
    }
  }
  for (auto &e : test->examples) {
    if (e.split != SplitTag::kTest) continue;
    if (!categories.contains(e.category)) {
      e.split = SplitTag::kTestUnseenCategories;
      continue;
    }
    bool all_seen = true;
    for (const auto &t : e.graph.triples()) {
      all_seen = all_seen && entities.contains(t.subject) && entities.contains(t.object);
    }
    e.split = all_seen ? SplitTag::kTestSeenCategories : SplitTag::kTestUnseenEntities;
  }
}

namespace {

void Bump(SplitCounts &counts, SplitTag tag) {
  switch (tag) {
    case SplitTag::kTestSeenCategories:
      ++counts.seen_categories;
      break;
    case SplitTag::kTestUnseenEntities:
      ++counts.unseen_entities;
      break;
    case SplitTag::kTestUnseenCategories:
      ++counts.unseen_categories;
      break;
    default:
      break;
  }
}

}  // namespace

SplitCounts CountGraphToTextInstances(const ParallelCorpus &corpus) {
  SplitCounts counts;
  std::set<std::string> seen;
  for (const auto &e : corpus.examples) {
    if (seen.insert(e.entry_id).second) Bump(counts, e.split);
  }
  return counts;
}

SplitCounts CountTextToGraphInstances(const ParallelCorpus &corpus) {
  SplitCounts counts;
  for (const auto &e : corpus.examples) Bump(counts, e.split);
  return counts;
}

ParallelCorpus SubsetSupervised(const ParallelCorpus &corpus, double fraction,
                                uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw CorpusError("subset fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<size_t> train;
  for (size_t i = 0; i < corpus.examples.size(); ++i) {
    if (corpus.examples[i].split == SplitTag::kTrain) train.push_back(i);
  }
  const auto keep = static_cast<size_t>(std::llround(fraction * train.size()));
  Rng rng(seed);
  rng.Shuffle(train);
  std::vector<bool> chosen(corpus.examples.size(), false);
  for (size_t i = 0; i < keep; ++i) chosen[train[i]] = true;

  ParallelCorpus out;
  out.skipped = corpus.skipped;
  for (size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto &e = corpus.examples[i];
    if (e.split != SplitTag::kTrain || chosen[i]) out.examples.push_back(e);
  }
  return out;
}

bool UnlabeledCorpus::Add(const std::string &item) {
  if (kind_ == PoolKind::kGraphs) {
    try {
      if (LinearizeGraph(ParseGraph(item)) != item) {
        throw CorpusError("not a canonical linearized graph: " + item);
      }
    } catch (const CodecError &e) {
      throw CorpusError(std::string("invalid graph item: ") + e.what());
    }
  } else if (IsBlank(item)) {
    throw CorpusError("blank text item");
  }
  if (!keys_.insert(NormalizeForMatch(item)).second) return false;
  items_.push_back(item);
  return true;
}

void UnlabeledCorpus::Save(const std::string &path) const { WriteLines(path, items_); }

UnlabeledCorpus UnlabeledCorpus::Load(const std::string &path, PoolKind kind) {
  UnlabeledCorpus pool(kind, path);
  for (const auto &line : ReadLines(path)) {
    if (!IsBlank(line)) pool.Add(line);
  }
  return pool;
}

UnlabeledCorpus GraphPoolFrom(const ParallelCorpus &corpus, std::string provenance) {
  UnlabeledCorpus pool(PoolKind::kGraphs, std::move(provenance));
  for (const auto &e : corpus.examples) pool.AddGraph(e.graph);
  return pool;
}

UnlabeledCorpus TextPoolFrom(const ParallelCorpus &corpus, std::string provenance) {
  UnlabeledCorpus pool(PoolKind::kText, std::move(provenance));
  for (const auto &e : corpus.examples) pool.Add(e.text);
  return pool;
}

std::vector<size_t> DrawIterationIndices(size_t pool_size, size_t size,
                                         size_t iteration, uint64_t seed) {
  if (pool_size == 0) throw CorpusError("cannot draw from an empty pool");
  if (size == 0) throw CorpusError("draw size must be at least 1");
  if (size > pool_size) {
    spdlog::warn("draw size {} exceeds pool size {}; using the whole pool", size,
                 pool_size);
    return Permutation(pool_size, seed, iteration);
  }
  uint64_t round = 0;
  std::vector<size_t> perm = Permutation(pool_size, seed, round);
  size_t pos = 0;
  std::vector<size_t> draw;
  for (size_t d = 0; d <= iteration; ++d) {
    draw.clear();
    std::vector<bool> in_draw(pool_size, false);
    while (draw.size() < size) {
      if (pos == pool_size) {
        perm = Permutation(pool_size, seed, ++round);
        std::stable_partition(perm.begin(), perm.end(),
                              [&](size_t i) { return !in_draw[i]; });
        pos = 0;
      }
      const size_t item = perm[pos++];
      in_draw[item] = true;
      draw.push_back(item);
    }
  }
  return draw;
}

std::vector<std::string> DrawIteration(const UnlabeledCorpus &pool, size_t size,
                                       size_t iteration, uint64_t seed) {
  std::vector<std::string> out;
  for (size_t i : DrawIterationIndices(pool.size(), size, iteration, seed)) {
    out.push_back(pool.items()[i]);
  }
  return out;
}

}  // namespace kgcycle
