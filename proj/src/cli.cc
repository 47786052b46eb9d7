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

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <type_traits>

#include "json.hpp"
#include "kgcycle/checkpoint.h"
#include "kgcycle/graph_codec.h"
#include "kgcycle/metrics.h"
#include "kgcycle/tokenizer.h"

namespace kgcycle {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Reads one config section, rejecting keys nobody asked for.
class Section {
 public:
  Section(const Json &j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void Read(const std::string &key, T *out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) Fail(key, "a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) Fail(key, "a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) Fail(key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) Fail(key, "a string");
    }
    try {
      *out = it->get<T>();
    } catch (const Json::exception &) {
      Fail(key, "well-typed");
    }
  }

  // Reads a string and maps it through `parse`.
  template <typename T, typename Parse>
  void ReadEnum(const std::string &key, T *out, Parse parse) {
    std::string name;
    if (!j_.contains(key)) {
      used_.insert(key);
      return;
    }
    Read(key, &name);
    auto value = parse(name);
    if (!value) Fail(key, "a known name, got '" + name + "'");
    *out = *value;
  }

  const Json *Child(const std::string &key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void Finish() const {
    for (const auto &[key, value] : j_.items()) {
      if (used_.count(key) == 0) throw UsageError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  [[noreturn]] void Fail(const std::string &key, const std::string &what) const {
    throw UsageError("config key '" + name_ + "." + key + "' must be " + what);
  }

  const Json &j_;
  std::string name_;
  std::set<std::string> used_;
};

std::string FormatName(CorpusFormat f) {
  return f == CorpusFormat::kWebNlgXml ? "webnlg_xml" : "tsv_lines";
}

Json ToJson(const CrawlConfig &c) {
  Json origins = Json::array();
  for (const auto &e : c.origin_entities) origins.push_back({{"id", e.id}, {"name", e.name}});
  Json j;
  j["origin_entities"] = origins;
  j["max_depth"] = c.max_depth;
  j["max_paragraphs"] = c.max_paragraphs;
  j["rate_limit"] = c.rate_limit;
  j["visited_store_path"] = c.visited_store_path;
  j["endpoints"] = {{"sparql_url", c.endpoints.sparql_url},
                    {"wiki_api_url", c.endpoints.wiki_api_url}};
  j["offline_fixture_dir"] = c.offline_fixture_dir ? Json(*c.offline_fixture_dir) : Json();
  j["max_retries"] = c.max_retries;
  j["initial_backoff_seconds"] = c.initial_backoff_seconds;
  j["max_entities"] = c.max_entities;
  return j;
}

void ReadCrawl(const Json &j, CrawlConfig *c) {
  Section s(j, "crawl");
  if (const Json *origins = s.Child("origin_entities")) {
    if (!origins->is_array()) throw UsageError("crawl.origin_entities must be an array");
    c->origin_entities.clear();
    for (const auto &o : *origins) {
      Section e(o, "crawl.origin_entities[]");
      Entity entity;
      e.Read("id", &entity.id);
      e.Read("name", &entity.name);
      e.Finish();
      c->origin_entities.push_back(entity);
    }
  }
  s.Read("max_depth", &c->max_depth);
  s.Read("max_paragraphs", &c->max_paragraphs);
  s.Read("rate_limit", &c->rate_limit);
  s.Read("visited_store_path", &c->visited_store_path);
  if (const Json *endpoints = s.Child("endpoints")) {
    Section e(*endpoints, "crawl.endpoints");
    e.Read("sparql_url", &c->endpoints.sparql_url);
    e.Read("wiki_api_url", &c->endpoints.wiki_api_url);
    e.Finish();
  }
  if (const Json *dir = s.Child("offline_fixture_dir")) {
    if (dir->is_null()) {
      c->offline_fixture_dir.reset();
    } else if (dir->is_string()) {
      c->offline_fixture_dir = dir->get<std::string>();
    } else {
      throw UsageError("crawl.offline_fixture_dir must be a string or null");
    }
  }
  s.Read("max_retries", &c->max_retries);
  s.Read("initial_backoff_seconds", &c->initial_backoff_seconds);
  s.Read("max_entities", &c->max_entities);
  s.Finish();
}

std::string HashInput(const std::string &path) {
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) return Sha256HexOfFile(path);
  if (fs::is_directory(path, ec)) {
    std::vector<std::string> files;
    for (const auto &entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto &f : files) {
      listing += fs::relative(f, path).string() + "\t" + Sha256HexOfFile(f) + "\n";
    }
    return Sha256Hex(listing);
  }
  return "";
}

struct Args {
  std::string command;
  std::string config_path;
  std::string out_dir = "kgcycle_out";
  std::string regime = "baseline";
  std::string checkpoint;
  std::string vocab;
  std::string corpus;
  std::string train_corpus;
  std::string format;
  std::string text_pool;
  std::string graph_pool;
  std::string input;
  std::string output;
  std::string hyp;
  std::string ref;
  std::string splits;
  std::string task;
  uint64_t seed = 0;
  size_t steps = 0;
  size_t draw = 0;
  bool has_seed = false;
  bool has_steps = false;
  bool has_draw = false;
};

class Command {
 public:
  Command(Args args, std::vector<std::string> argv)
      : args_(std::move(args)), argv_(std::move(argv)) {}

  int Run();

 private:
  void Resolve();
  void WriteManifest(const std::vector<std::string> &inputs) const;
  std::string Out(const std::string &name) const {
    return (fs::path(args_.out_dir) / name).string();
  }
  void Require(const std::string &value, const std::string &flag) const {
    if (value.empty()) throw UsageError(flag + " is required");
  }
  void RequireExists(const std::string &path, const std::string &flag) const {
    Require(path, flag);
    if (!fs::exists(path)) throw UsageError(flag + " not found: " + path);
  }
  ParallelCorpus SupervisedData(const std::string &path) const;
  std::pair<ModelParams, Vocabulary> LoadModel() const;

  int Train();
  int Cycle();
  int GenerateOrParse();
  int Prepare();
  int Eval();
  int Crawl();

  Args args_;
  std::vector<std::string> argv_;
  RunConfig config_;
};

void Command::Resolve() {
  if (!args_.config_path.empty()) {
    if (!fs::exists(args_.config_path)) {
      throw UsageError("config file not found: " + args_.config_path);
    }
    config_ = ParseRunConfig(ReadFile(args_.config_path));
  }
  if (args_.has_seed) config_.train.seed = args_.seed;
  if (args_.has_steps) config_.train.cycle_steps = args_.steps;
  if (args_.has_draw) config_.train.synthetic_per_iteration = args_.draw;
  if (!args_.corpus.empty()) config_.data.corpus = args_.corpus;
  if (!args_.text_pool.empty()) config_.data.text_pool = args_.text_pool;
  if (!args_.graph_pool.empty()) config_.data.graph_pool = args_.graph_pool;
  if (!args_.format.empty()) {
    auto f = ParseCorpusFormat(args_.format);
    if (!f) throw UsageError("unknown corpus format: " + args_.format);
    config_.data.format = *f;
  }
  if (args_.command == "crawl") config_.crawl.endpoints.ApplyEnvironment();
  if (args_.regime != "baseline" && args_.regime != "finetune15") {
    throw UsageError("--regime must be baseline or finetune15, got " + args_.regime);
  }
  if (config_.model.max_len < config_.train.max_len) {
    throw UsageError("model.max_len must be at least train.max_len");
  }
  try {
    config_.train.Validate();
    config_.decode.Validate();
  } catch (const Error &e) {
    throw UsageError(e.what());
  }
}

void Command::WriteManifest(const std::vector<std::string> &inputs) const {
  fs::create_directories(args_.out_dir);
  Json j;
  j["command"] = args_.command;
  j["argv"] = argv_;
  j["tool_version"] = kToolVersion;
  j["seed"] = config_.train.seed;
  j["regime"] = args_.regime;
  j["config"] = Json::parse(RunConfigToJson(config_));
  Json hashes = Json::object();
  for (const auto &path : inputs) {
    if (!path.empty()) hashes[path] = HashInput(path);
  }
  j["inputs"] = hashes;
  WriteFile(Out("manifest.json"), j.dump(2) + "\n");
}

ParallelCorpus Command::SupervisedData(const std::string &path) const {
  ParallelCorpus corpus = LoadParallel(path, config_.data.format);
  if (corpus.skipped > 0) spdlog::warn("{}: skipped {} invalid entries", path, corpus.skipped);
  if (args_.regime == "finetune15") {
    corpus = SubsetSupervised(corpus, config_.data.subset_fraction, config_.train.seed);
  }
  return corpus;
}

std::pair<ModelParams, Vocabulary> Command::LoadModel() const {
  Checkpoint ckpt = LoadCheckpoint(args_.checkpoint);
  const std::string vocab_path =
      args_.vocab.empty() ? (fs::path(args_.checkpoint).parent_path() / "vocab.txt").string()
                          : args_.vocab;
  Vocabulary vocab = Vocabulary::Load(vocab_path);
  if (vocab.Hash() != ckpt.vocab_hash) {
    throw Error("vocabulary " + vocab_path + " does not match checkpoint " + args_.checkpoint +
                " (hash " + vocab.Hash().substr(0, 12) + " vs " +
                ckpt.vocab_hash.substr(0, 12) + ")");
  }
  return {std::move(ckpt.params), std::move(vocab)};
}

int Command::Train() {
  RequireExists(config_.data.corpus, "--corpus");
  WriteManifest({args_.config_path, config_.data.corpus});
  ParallelCorpus corpus = SupervisedData(config_.data.corpus);
  const auto train = corpus.WithSplit(SplitTag::kTrain);
  if (train.empty()) throw Error("no train-split examples in " + config_.data.corpus);

  std::vector<std::string> vocab_corpus = {std::string(kGenerateText.surface),
                                           std::string(kGenerateGraph.surface)};
  for (const auto &e : train) {
    vocab_corpus.push_back(LinearizeGraph(e.graph));
    vocab_corpus.push_back(e.text);
  }
  Vocabulary vocab = BuildVocab(vocab_corpus, config_.data.vocab_size);
  ModelConfig model = config_.model;
  model.vocab_size = vocab.size();
  ModelParams init = ModelParams::Initialize(model, config_.train.seed);
  spdlog::info("train: regime {}, {} examples, vocabulary {}, {} parameters", args_.regime,
               train.size(), vocab.size(), init.Count());

  TrainResult result = Finetune(init, vocab, corpus, config_.train);
  vocab.Save(Out("vocab.txt"));
  SaveCheckpoint(Out("model.ckpt"), result.params, vocab.Hash());
  result.log.Save(Out("train_log.tsv"));
  spdlog::info("train: best epoch {} with loss {:.6f} after {} updates", result.best_epoch,
               result.best_loss, result.optimizer_steps);
  return kExitOk;
}

int Command::Cycle() {
  Require(args_.checkpoint, "--checkpoint");
  if (config_.train.cycle_steps > 0) {
    RequireExists(config_.data.text_pool, "--text-pool");
    RequireExists(config_.data.graph_pool, "--graph-pool");
  }
  WriteManifest({args_.config_path, args_.checkpoint, args_.vocab, config_.data.corpus,
                 config_.data.text_pool, config_.data.graph_pool});
  auto [params, vocab] = LoadModel();
  vocab.Save(Out("vocab.txt"));
  if (config_.train.cycle_steps == 0) {
    spdlog::warn("cycle: --steps 0, copying {} unchanged", args_.checkpoint);
    fs::copy_file(args_.checkpoint, Out("model.ckpt"), fs::copy_options::overwrite_existing);
    return kExitOk;
  }
  UnlabeledCorpus texts = UnlabeledCorpus::Load(config_.data.text_pool, PoolKind::kText);
  UnlabeledCorpus graphs = UnlabeledCorpus::Load(config_.data.graph_pool, PoolKind::kGraphs);
  ParallelCorpus supervised;
  if (!config_.data.corpus.empty()) supervised = SupervisedData(config_.data.corpus);
  spdlog::info("cycle: {} iterations over {} texts and {} graphs, {} supervised examples",
               config_.train.cycle_steps, texts.size(), graphs.size(),
               supervised.examples.size());

  const std::string hash = vocab.Hash();
  CycleResult result =
      CycleTrain(params, vocab, texts, graphs, supervised, config_.train, config_.decode,
                 [&](size_t iteration, const ModelParams &p) {
                   SaveCheckpoint(Out("iteration_" + std::to_string(iteration + 1) + ".ckpt"),
                                  p, hash);
                 });
  SaveCheckpoint(Out("model.ckpt"), result.params, hash);
  result.log.Save(Out("cycle_log.tsv"));
  return kExitOk;
}

int Command::GenerateOrParse() {
  Require(args_.checkpoint, "--checkpoint");
  RequireExists(args_.input, "--input");
  WriteManifest({args_.config_path, args_.checkpoint, args_.vocab, args_.input});
  auto [params, vocab] = LoadModel();
  GenerateFn generate = ModelGenerator(params, vocab, config_.decode, config_.train.max_len);
  const bool to_text = args_.command == "generate";
  std::vector<std::string> out;
  size_t empty = 0;
  for (const auto &line : ReadLines(args_.input)) {
    std::string result;
    if (to_text) {
      try {
        result = generate(PrefixTask(kGenerateText, LinearizeGraph(ParseGraph(line))));
      } catch (const CodecError &e) {
        spdlog::warn("generate: input line {} is not a graph: {}", out.size() + 1, e.what());
      }
    } else if (!IsBlank(line)) {
      try {
        result = LinearizeGraph(ParseGraph(generate(PrefixTask(kGenerateGraph, line))));
      } catch (const NoTriplesRecoverable &) {
      }
    }
    if (result.empty()) ++empty;
    out.push_back(result);
  }
  const std::string output = args_.output.empty() ? Out("output.txt") : args_.output;
  WriteLines(output, out);
  spdlog::info("{}: wrote {} lines to {} ({} empty)", args_.command, out.size(), output, empty);
  return kExitOk;
}

int Command::Prepare() {
  RequireExists(config_.data.corpus, "--corpus");
  if (!args_.train_corpus.empty()) RequireExists(args_.train_corpus, "--train-corpus");
  WriteManifest({args_.config_path, config_.data.corpus, args_.train_corpus});
  ParallelCorpus corpus = LoadParallel(config_.data.corpus, config_.data.format);
  if (!args_.train_corpus.empty()) {
    AssignTestSplits(LoadParallel(args_.train_corpus, config_.data.format), &corpus);
  }
  bool tagged = false;
  for (const auto &e : corpus.examples) tagged = tagged || IsTestSplit(e.split);

  // Graph-to-text: one instance per entry with all of its texts.
  std::vector<std::string> g2t_source, g2t_refs, g2t_splits;
  std::map<std::string, size_t> entry_row;
  for (const auto &e : corpus.examples) {
    auto [it, fresh] = entry_row.emplace(e.entry_id, g2t_source.size());
    if (fresh) {
      g2t_source.push_back(LinearizeGraph(e.graph));
      g2t_refs.push_back(e.text);
      g2t_splits.emplace_back(SplitTagName(e.split));
    } else {
      g2t_refs[it->second] += "\t" + e.text;
    }
  }
  std::vector<std::string> t2g_source, t2g_refs, t2g_splits;
  for (const auto &e : corpus.examples) {
    t2g_source.push_back(e.text);
    t2g_refs.push_back(LinearizeGraph(e.graph));
    t2g_splits.emplace_back(SplitTagName(e.split));
  }
  WriteLines(Out("g2t.source"), g2t_source);
  WriteLines(Out("g2t.refs"), g2t_refs);
  WriteLines(Out("t2g.source"), t2g_source);
  WriteLines(Out("t2g.refs"), t2g_refs);
  if (tagged) {
    WriteLines(Out("g2t.splits"), g2t_splits);
    WriteLines(Out("t2g.splits"), t2g_splits);
  }
  spdlog::info("prepare: {} graph-to-text and {} text-to-graph instances", g2t_source.size(),
               t2g_source.size());
  return kExitOk;
}

int Command::Eval() {
  if (args_.task != "text" && args_.task != "graph") {
    throw UsageError("--task must be text or graph");
  }
  RequireExists(args_.hyp, "--hyp");
  RequireExists(args_.ref, "--ref");
  if (!args_.splits.empty()) RequireExists(args_.splits, "--splits");
  WriteManifest({args_.config_path, args_.hyp, args_.ref, args_.splits});
  const auto hyp_lines = ReadLines(args_.hyp);
  const auto ref_lines = ReadLines(args_.ref);
  if (hyp_lines.size() != ref_lines.size()) {
    throw Error(std::to_string(hyp_lines.size()) + " hypotheses but " +
                std::to_string(ref_lines.size()) + " references");
  }
  std::optional<std::vector<SplitTag>> tags;
  if (!args_.splits.empty()) {
    tags.emplace();
    for (const auto &line : ReadLines(args_.splits)) {
      auto tag = ParseSplitTag(line);
      if (!tag) throw Error("unknown split tag '" + line + "'");
      tags->push_back(*tag);
    }
    if (tags->size() != hyp_lines.size()) {
      throw Error(std::to_string(tags->size()) + " split tags for " +
                  std::to_string(hyp_lines.size()) + " instances");
    }
  }
  const std::vector<SplitTag> *split_ptr = tags ? &*tags : nullptr;
  std::vector<std::string> table;
  std::string json;
  if (args_.task == "text") {
    References refs;
    for (const auto &line : ref_lines) refs.push_back(Split(line, '\t'));
    TextEvalReport report = EvaluateText(hyp_lines, refs, split_ptr);
    table = FormatReportTable(report);
    json = ReportJson(report);
  } else {
    std::vector<std::optional<KnowledgeGraph>> hyps;
    std::vector<KnowledgeGraph> refs;
    for (const auto &line : hyp_lines) {
      try {
        hyps.push_back(IsBlank(line) ? std::nullopt : std::optional(ParseGraph(line)));
      } catch (const NoTriplesRecoverable &) {
        hyps.push_back(std::nullopt);
      }
    }
    for (const auto &line : ref_lines) refs.push_back(ParseGraph(line));
    GraphEvalReport report = EvaluateGraphs(hyps, refs, split_ptr);
    table = FormatReportTable(report);
    json = ReportJson(report);
  }
  WriteLines(Out("report.tsv"), table);
  WriteFile(Out("report.json"), json);
  for (const auto &line : table) std::cout << line << "\n";
  return kExitOk;
}

int Command::Crawl() {
  if (args_.config_path.empty()) throw UsageError("--config with a crawl section is required");
  CrawlConfig crawl = config_.crawl;
  if (crawl.visited_store_path.empty()) crawl.visited_store_path = Out("visited.log");
  config_.crawl = crawl;
  try {
    crawl.Validate();
  } catch (const CrawlError &e) {
    throw UsageError(e.what());
  }
  WriteManifest({args_.config_path, crawl.offline_fixture_dir.value_or("")});

  const std::string records_path = Out("records.jsonl");
  Crawler crawler(crawl);
  {
    std::ofstream records(records_path, std::ios::app | std::ios::binary);
    crawler.Crawl([&](const CrawlRecord &r) {
      records << RecordToJson(r) << '\n';
      records.flush();
    });
  }
  const CrawlStats &cs = crawler.stats();
  if (cs.visited == 0 && cs.failed > 0) {
    throw Error("every entity failed; are the endpoints reachable?");
  }
  const auto records = LoadRecords(records_path);
  auto [graphs, texts] = BuildPools(records);
  graphs.Save(Out("graphs.txt"));
  texts.Save(Out("texts.txt"));
  PoolStats ps = ComputePoolStats(records, graphs, texts);
  Json stats;
  stats["entities"] = ps.entities;
  stats["triples"] = ps.triples;
  stats["paragraphs"] = ps.paragraphs;
  stats["graph_instances"] = ps.graph_instances;
  stats["text_instances"] = ps.text_instances;
  stats["text_characters"] = ps.text_characters;
  stats["mean_text_length"] = ps.mean_text_length;
  stats["visited_this_run"] = cs.visited;
  stats["failed_this_run"] = cs.failed;
  stats["skipped_rows_this_run"] = cs.skipped_rows;
  stats["requests_this_run"] = cs.requests;
  WriteFile(Out("stats.json"), stats.dump(2) + "\n");
  spdlog::info("crawl: {} entities, {} triples, {} paragraphs, mean text length {:.2f}",
               ps.entities, ps.triples, ps.paragraphs, ps.mean_text_length);
  return kExitOk;
}

int Command::Run() {
  Resolve();
  if (args_.command == "train") return Train();
  if (args_.command == "cycle") return Cycle();
  if (args_.command == "generate" || args_.command == "parse") return GenerateOrParse();
  if (args_.command == "prepare") return Prepare();
  if (args_.command == "eval") return Eval();
  if (args_.command == "crawl") return Crawl();
  throw UsageError("unknown command " + args_.command);
}

}  // namespace

RunConfig ParseRunConfig(const std::string &json_text, const RunConfig &defaults) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::exception &e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = defaults;
  Section top(root, "config");
  if (const Json *j = top.Child("model")) {
    Section s(*j, "model");
    s.Read("d_model", &c.model.d_model);
    s.Read("n_heads", &c.model.n_heads);
    s.Read("n_layers_enc", &c.model.n_layers_enc);
    s.Read("n_layers_dec", &c.model.n_layers_dec);
    s.Read("d_ff", &c.model.d_ff);
    s.Read("max_len", &c.model.max_len);
    s.Read("dropout_rate", &c.model.dropout_rate);
    s.Finish();
  }
  if (const Json *j = top.Child("train")) {
    Section s(*j, "train");
    s.Read("batch_size", &c.train.batch_size);
    s.Read("accumulation_steps", &c.train.accumulation_steps);
    s.Read("lr_finetune", &c.train.lr_finetune);
    s.Read("lr_cycle", &c.train.lr_cycle);
    s.Read("max_epochs_finetune", &c.train.max_epochs_finetune);
    s.Read("max_epochs_cycle", &c.train.max_epochs_cycle);
    s.Read("patience", &c.train.patience);
    s.Read("cycle_steps", &c.train.cycle_steps);
    s.Read("synthetic_per_iteration", &c.train.synthetic_per_iteration);
    s.Read("seed", &c.train.seed);
    s.Read("validation_fraction", &c.train.validation_fraction);
    s.Read("max_optimizer_steps", &c.train.max_optimizer_steps);
    s.ReadEnum("optimizer", &c.train.optimizer, ParseOptimizerKind);
    s.Read("max_len", &c.train.max_len);
    s.Finish();
  }
  if (const Json *j = top.Child("decode")) {
    Section s(*j, "decode");
    s.Read("beam_width", &c.decode.beam_width);
    s.Read("max_new_tokens", &c.decode.max_new_tokens);
    s.Read("repetition_penalty", &c.decode.repetition_penalty);
    s.Read("length_penalty", &c.decode.length_penalty);
    s.Read("early_stopping", &c.decode.early_stopping);
    s.Finish();
  }
  if (const Json *j = top.Child("crawl")) ReadCrawl(*j, &c.crawl);
  if (const Json *j = top.Child("data")) {
    Section s(*j, "data");
    s.Read("corpus", &c.data.corpus);
    s.ReadEnum("format", &c.data.format, ParseCorpusFormat);
    s.Read("text_pool", &c.data.text_pool);
    s.Read("graph_pool", &c.data.graph_pool);
    s.Read("vocab_size", &c.data.vocab_size);
    s.Read("subset_fraction", &c.data.subset_fraction);
    s.Finish();
  }
  top.Finish();
  if (!(c.data.subset_fraction > 0.0 && c.data.subset_fraction <= 1.0)) {
    throw UsageError("data.subset_fraction must be in (0, 1]");
  }
  return c;
}

std::string RunConfigToJson(const RunConfig &c) {
  Json j;
  j["model"] = {{"d_model", c.model.d_model},       {"n_heads", c.model.n_heads},
                {"n_layers_enc", c.model.n_layers_enc}, {"n_layers_dec", c.model.n_layers_dec},
                {"d_ff", c.model.d_ff},             {"max_len", c.model.max_len},
                {"dropout_rate", c.model.dropout_rate}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"accumulation_steps", c.train.accumulation_steps},
                {"lr_finetune", c.train.lr_finetune},
                {"lr_cycle", c.train.lr_cycle},
                {"max_epochs_finetune", c.train.max_epochs_finetune},
                {"max_epochs_cycle", c.train.max_epochs_cycle},
                {"patience", c.train.patience},
                {"cycle_steps", c.train.cycle_steps},
                {"synthetic_per_iteration", c.train.synthetic_per_iteration},
                {"seed", c.train.seed},
                {"validation_fraction", c.train.validation_fraction},
                {"max_optimizer_steps", c.train.max_optimizer_steps},
                {"optimizer", std::string(OptimizerName(c.train.optimizer))},
                {"max_len", c.train.max_len}};
  j["decode"] = {{"beam_width", c.decode.beam_width},
                 {"max_new_tokens", c.decode.max_new_tokens},
                 {"repetition_penalty", c.decode.repetition_penalty},
                 {"length_penalty", c.decode.length_penalty},
                 {"early_stopping", c.decode.early_stopping}};
  j["crawl"] = ToJson(c.crawl);
  j["data"] = {{"corpus", c.data.corpus},
               {"format", FormatName(c.data.format)},
               {"text_pool", c.data.text_pool},
               {"graph_pool", c.data.graph_pool},
               {"vocab_size", c.data.vocab_size},
               {"subset_fraction", c.data.subset_fraction}};
  return j.dump(2);
}

int RunCli(const std::vector<std::string> &argv) {
  Args args;
  CLI::App app{"kgcycle: joint graph-to-text and text-to-graph training", "kgcycle"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--out-dir", args.out_dir, "Output directory")->capture_default_str();
    return sub;
  };
  auto seeded = [&](CLI::App *sub) {
    sub->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) {
          args.seed = v;
          args.has_seed = true;
        },
        "Random seed (overrides train.seed)");
    return sub;
  };
  auto corpus_opts = [&](CLI::App *sub) {
    sub->add_option("--corpus", args.corpus, "Parallel corpus file or directory");
    sub->add_option("--format", args.format, "webnlg_xml or tsv_lines");
    return sub;
  };
  auto model_opts = [&](CLI::App *sub) {
    sub->add_option("--checkpoint", args.checkpoint, "Model checkpoint");
    sub->add_option("--vocab", args.vocab, "Vocabulary file (default: next to checkpoint)");
    return sub;
  };

  auto *train = seeded(corpus_opts(common(app.add_subcommand("train", "Supervised fine-tuning"))));
  train->add_option("--regime", args.regime, "baseline or finetune15")->capture_default_str();

  auto *cycle = seeded(model_opts(corpus_opts(common(
      app.add_subcommand("cycle", "Cycle training on non-parallel pools")))));
  cycle->add_option("--regime", args.regime, "Supervised share: baseline or finetune15")
      ->capture_default_str();
  cycle->add_option("--text-pool", args.text_pool, "Text pool file");
  cycle->add_option("--graph-pool", args.graph_pool, "Graph pool file");
  cycle->add_option_function<size_t>(
      "--steps", [&](size_t v) {
        args.steps = v;
        args.has_steps = true;
      },
      "Cycle iterations (overrides train.cycle_steps)");
  cycle->add_option_function<size_t>(
      "--draw", [&](size_t v) {
        args.draw = v;
        args.has_draw = true;
      },
      "Items drawn per pool and iteration");

  for (const char *name : {"generate", "parse"}) {
    auto *sub = model_opts(common(app.add_subcommand(
        name, std::string(name) == "generate" ? "Graph lines to text lines"
                                              : "Text lines to linearized graph lines")));
    sub->add_option("--input", args.input, "Input file, one instance per line");
    sub->add_option("--output", args.output, "Output file (default: <out-dir>/output.txt)");
  }

  auto *prepare = corpus_opts(common(
      app.add_subcommand("prepare", "Write evaluation inputs and references from a corpus")));
  prepare->add_option("--train-corpus", args.train_corpus,
                      "Training corpus used to assign test splits");

  auto *eval = common(app.add_subcommand("eval", "Score hypotheses against references"));
  eval->add_option("--task", args.task, "text or graph");
  eval->add_option("--hyp", args.hyp, "Hypothesis file");
  eval->add_option("--ref", args.ref, "Reference file (tab-separated references per line)");
  eval->add_option("--splits", args.splits, "Optional split tag per line");

  common(app.add_subcommand("crawl", "Collect non-parallel pools from the knowledge base"));

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  args.command = app.get_subcommands().front()->get_name();

  try {
    return Command(args, argv).Run();
  } catch (const UsageError &e) {
    std::cerr << "kgcycle " << args.command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "kgcycle " << args.command << ": error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace kgcycle
