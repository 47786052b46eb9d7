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

#include "kgcycle/crawler.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace kgcycle {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

constexpr const char *kEntityPrefix = "http://www.wikidata.org/entity/";

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double MonotonicSeconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void RealSleep(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// "Q42" for an entity URI, empty for anything else.
std::string EntityIdFromUri(const std::string &uri) {
  if (uri.rfind(kEntityPrefix, 0) != 0) return "";
  std::string id = uri.substr(std::char_traits<char>::length(kEntityPrefix));
  if (id.size() < 2 || id[0] != 'Q') return "";
  for (size_t i = 1; i < id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return "";
  }
  return id;
}

std::optional<std::string> BindingValue(const Json &row, const char *name) {
  auto it = row.find(name);
  if (it == row.end() || !it->is_object() || !it->contains("value")) return std::nullopt;
  const Json &v = (*it)["value"];
  if (!v.is_string()) return std::nullopt;
  return v.get<std::string>();
}

bool IsHeading(const std::string &line) {
  return line.size() >= 2 && line.front() == '=' && line.back() == '=';
}

bool IsRetryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void Endpoints::ApplyEnvironment() {
  if (const char *v = std::getenv(kSparqlUrlEnv); v != nullptr && *v != '\0') sparql_url = v;
  if (const char *v = std::getenv(kWikiApiUrlEnv); v != nullptr && *v != '\0') wiki_api_url = v;
}

void CrawlConfig::Validate() const {
  if (origin_entities.empty()) throw CrawlError("at least one origin entity is required");
  for (const auto &e : origin_entities) {
    if (IsBlank(e.id) || IsBlank(e.name)) throw CrawlError("origin entity needs an id and a name");
  }
  if (max_paragraphs < 1) throw CrawlError("max_paragraphs must be at least 1");
  if (!(rate_limit >= 0.0)) throw CrawlError("rate_limit must be >= 0");
  if (!(initial_backoff_seconds >= 0.0)) throw CrawlError("initial_backoff_seconds must be >= 0");
  if (!offline_fixture_dir && (IsBlank(endpoints.sparql_url) || IsBlank(endpoints.wiki_api_url))) {
    throw CrawlError("endpoints are required without an offline fixture directory");
  }
}

std::string RecordToJson(const CrawlRecord &record) {
  nlohmann::ordered_json j;
  j["entity_id"] = record.entity_id;
  j["entity_name"] = record.entity_name;
  j["depth"] = record.depth;
  j["timestamp"] = record.timestamp;
  j["triples"] = nlohmann::ordered_json::array();
  for (const auto &t : record.triples) j["triples"].push_back({t.subject, t.predicate, t.object});
  j["paragraphs"] = record.paragraphs;
  return j.dump();
}

CrawlRecord RecordFromJson(const std::string &line) {
  try {
    const Json j = Json::parse(line);
    CrawlRecord r;
    r.entity_id = j.at("entity_id").get<std::string>();
    r.entity_name = j.at("entity_name").get<std::string>();
    r.depth = j.at("depth").get<size_t>();
    r.timestamp = j.value("timestamp", "");
    for (const auto &t : j.at("triples")) {
      r.triples.push_back(MakeTriple(t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                                     t.at(2).get<std::string>()));
    }
    r.paragraphs = j.at("paragraphs").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception &e) {
    throw CrawlError(std::string("bad crawl record: ") + e.what());
  }
}

std::vector<CrawlRecord> LoadRecords(const std::string &path) {
  std::vector<CrawlRecord> records;
  for (const auto &line : ReadLines(path)) {
    if (!IsBlank(line)) records.push_back(RecordFromJson(line));
  }
  return records;
}

Crawler::Crawler(CrawlConfig config) : config_(std::move(config)) {
  if (config_.offline_fixture_dir) {
    client_ = std::make_unique<FixtureHttpClient>(*config_.offline_fixture_dir);
    sleep_ = [](double) {};
  } else {
    client_ = std::make_unique<LiveHttpClient>();
    sleep_ = RealSleep;
  }
  config_.Validate();
}

Crawler::Crawler(CrawlConfig config, std::unique_ptr<HttpClient> client, SleepFn sleep)
    : config_(std::move(config)), client_(std::move(client)), sleep_(std::move(sleep)) {
  if (!sleep_) sleep_ = RealSleep;
  config_.Validate();
}

std::string Crawler::SparqlQuery(const std::string &entity_id) {
  return "SELECT ?property ?propertyLabel ?value ?valueLabel WHERE { wd:" + entity_id +
         " ?claim ?value . ?property wikibase:directClaim ?claim . "
         "SERVICE wikibase:label { bd:serviceParam wikibase:language \"en\". } }";
}

std::string Crawler::SparqlRequestUrl(const std::string &entity_id) const {
  return BuildUrl(config_.endpoints.sparql_url,
                  {{"query", SparqlQuery(entity_id)}, {"format", "json"}});
}

std::string Crawler::ExtractRequestUrl(const std::string &entity_name) const {
  return BuildUrl(config_.endpoints.wiki_api_url, {{"action", "query"},
                                                   {"format", "json"},
                                                   {"formatversion", "2"},
                                                   {"prop", "extracts"},
                                                   {"explaintext", "1"},
                                                   {"redirects", "1"},
                                                   {"titles", entity_name}});
}

void Crawler::Throttle() {
  if (config_.rate_limit <= 0.0) return;
  const double interval = 1.0 / config_.rate_limit;
  if (last_request_ >= 0.0) {
    const double wait = last_request_ + interval - MonotonicSeconds();
    if (wait > 0) sleep_(wait);
  }
  last_request_ = MonotonicSeconds();
}

HttpResponse Crawler::GetWithRetry(const std::string &url) {
  double backoff = config_.initial_backoff_seconds;
  for (size_t attempt = 0;; ++attempt) {
    Throttle();
    ++stats_.requests;
    std::string failure;
    int status = 0;
    try {
      HttpResponse response = client_->Get(url);
      if (response.status >= 200 && response.status < 300) return response;
      status = response.status;
      failure = "HTTP " + std::to_string(status);
      if (!IsRetryable(status)) throw EndpointError(failure + " from " + url, status);
    } catch (const HttpError &e) {
      failure = e.what();
    }
    if (attempt >= config_.max_retries) {
      throw EndpointError("giving up after " + std::to_string(attempt + 1) +
                              " attempts: " + failure,
                          status);
    }
    spdlog::debug("retrying in {:.2f}s: {}", backoff, failure);
    sleep_(backoff);
    backoff *= 2.0;
  }
}

TripleFetch Crawler::FetchTriples(const Entity &entity) {
  const HttpResponse response = GetWithRetry(SparqlRequestUrl(entity.id));
  Json doc;
  try {
    doc = Json::parse(response.body);
  } catch (const Json::exception &e) {
    throw CrawlError("malformed SPARQL response for " + entity.id + ": " + e.what());
  }
  const Json *bindings = nullptr;
  if (doc.contains("results") && doc["results"].contains("bindings") &&
      doc["results"]["bindings"].is_array()) {
    bindings = &doc["results"]["bindings"];
  } else {
    throw CrawlError("SPARQL response for " + entity.id + " has no results.bindings");
  }

  TripleFetch out;
  std::set<Triple> seen_triples;
  std::set<std::string> seen_objects;
  const std::string subject = CollapseWhitespace(entity.name);
  for (const Json &row : *bindings) {
    const auto property_label = BindingValue(row, "propertyLabel");
    const auto value = BindingValue(row, "value");
    auto value_label = BindingValue(row, "valueLabel");
    if (!row.is_object() || !property_label || !value) {
      ++out.skipped_rows;
      continue;
    }
    const std::string type = row["value"].value("type", "literal");
    const std::string object_id = type == "uri" ? EntityIdFromUri(*value) : "";
    if (type != "uri" && !value_label) value_label = value;
    // The label service echoes the bare id when no English label exists.
    if (!value_label || IsBlank(*value_label) ||
        (!object_id.empty() && *value_label == object_id)) {
      ++out.skipped_rows;
      continue;
    }
    Triple triple;
    try {
      triple = MakeTriple(subject, CollapseWhitespace(*property_label),
                          CollapseWhitespace(*value_label));
    } catch (const CodecError &) {
      ++out.skipped_rows;
      continue;
    }
    if (!seen_triples.insert(triple).second) continue;
    out.triples.push_back(triple);
    if (!object_id.empty() && seen_objects.insert(object_id).second) {
      out.objects.push_back({object_id, triple.object});
    }
  }
  return out;
}

std::vector<std::string> Crawler::FetchParagraphs(const std::string &entity_name) {
  if (IsBlank(entity_name)) throw CrawlError("entity name is blank");
  const HttpResponse response = GetWithRetry(ExtractRequestUrl(entity_name));
  Json doc;
  try {
    doc = Json::parse(response.body);
  } catch (const Json::exception &e) {
    throw CrawlError("malformed extract response for " + entity_name + ": " + e.what());
  }
  if (!doc.contains("query") || !doc["query"].contains("pages")) return {};
  const Json &pages = doc["query"]["pages"];
  const Json *page = nullptr;
  if (pages.is_array() && !pages.empty()) {
    page = &pages[0];
  } else if (pages.is_object() && !pages.empty()) {
    page = &pages.begin().value();
  }
  if (page == nullptr || page->contains("missing") || !page->contains("extract") ||
      !(*page)["extract"].is_string()) {
    return {};
  }

  std::vector<std::string> paragraphs;
  std::string block;
  auto flush = [&] {
    std::string p = CollapseWhitespace(block);
    block.clear();
    if (!p.empty() && paragraphs.size() < config_.max_paragraphs) paragraphs.push_back(p);
  };
  for (const auto &raw : Split((*page)["extract"].get<std::string>(), '\n')) {
    const std::string line = Trim(raw);
    if (line.empty()) {
      flush();
    } else if (!IsHeading(line)) {
      block += ' ';
      block += line;
    }
  }
  flush();
  return paragraphs;
}

void Crawler::AppendVisited(const std::string &id) const {
  if (config_.visited_store_path.empty()) return;
  std::ofstream out(config_.visited_store_path, std::ios::app | std::ios::binary);
  out << id << '\n';
  if (!out) throw CrawlError("cannot append to " + config_.visited_store_path);
}

void Crawler::SaveStack(const std::vector<Frame> &stack) const {
  if (config_.visited_store_path.empty()) return;
  std::vector<std::string> lines;
  for (const auto &f : stack) {
    lines.push_back(f.entity.id + "\t" + f.entity.name + "\t" + std::to_string(f.depth));
  }
  const std::string path = config_.visited_store_path + ".stack";
  WriteLines(path + ".tmp", lines);
  fs::rename(path + ".tmp", path);
}

void Crawler::LoadState(std::vector<Frame> *stack) {
  const std::string &store = config_.visited_store_path;
  if (!store.empty() && fs::exists(store)) {
    for (const auto &line : ReadLines(store)) {
      if (!IsBlank(line)) visited_.insert(Trim(line));
    }
    const std::string stack_path = store + ".stack";
    if (fs::exists(stack_path)) {
      for (const auto &line : ReadLines(stack_path)) {
        if (IsBlank(line)) continue;
        const auto cols = Split(line, '\t');
        if (cols.size() != 3) throw CrawlError("bad stack snapshot line: " + line);
        stack->push_back({{cols[0], cols[1]}, std::stoul(cols[2])});
      }
    }
  }
  if (stack->empty()) {
    for (const auto &origin : config_.origin_entities) stack->push_back({origin, 0});
  }
}

void Crawler::Crawl(const std::function<void(const CrawlRecord &)> &emit) {
  std::vector<Frame> stack;
  LoadState(&stack);
  std::set<std::string> failed;
  size_t visits = 0;
  while (!stack.empty()) {
    if (config_.max_entities > 0 && visits >= config_.max_entities) break;
    const Frame frame = stack.back();
    stack.pop_back();
    if (visited_.count(frame.entity.id) > 0 || failed.count(frame.entity.id) > 0) continue;

    CrawlRecord record;
    TripleFetch fetch;
    try {
      fetch = FetchTriples(frame.entity);
      record.paragraphs = FetchParagraphs(frame.entity.name);
    } catch (const Error &e) {
      spdlog::warn("skipping {} ({}): {}", frame.entity.id, frame.entity.name, e.what());
      failed.insert(frame.entity.id);
      ++stats_.failed;
      SaveStack(stack);
      continue;
    }
    record.entity_id = frame.entity.id;
    record.entity_name = frame.entity.name;
    record.triples = std::move(fetch.triples);
    record.depth = frame.depth;
    record.timestamp = UtcTimestamp();
    stats_.skipped_rows += fetch.skipped_rows;

    if (frame.depth + 1 <= config_.max_depth) {
      for (const auto &object : fetch.objects) {
        if (visited_.count(object.id) == 0 && object.id != frame.entity.id) {
          stack.push_back({object, frame.depth + 1});
        }
      }
    }
    visited_.insert(record.entity_id);
    ++visits;
    ++stats_.visited;
    emit(record);
    AppendVisited(record.entity_id);
    SaveStack(stack);
  }
  SaveStack(stack);
}

std::vector<CrawlRecord> Crawler::Crawl() {
  std::vector<CrawlRecord> records;
  Crawl([&](const CrawlRecord &r) { records.push_back(r); });
  return records;
}

std::pair<UnlabeledCorpus, UnlabeledCorpus> BuildPools(const std::vector<CrawlRecord> &records) {
  UnlabeledCorpus graphs(PoolKind::kGraphs, "crawl");
  UnlabeledCorpus texts(PoolKind::kText, "crawl");
  for (const auto &r : records) {
    for (size_t i = 0; i < r.triples.size(); i += kMaxTriples) {
      const size_t end = std::min(r.triples.size(), i + kMaxTriples);
      graphs.AddGraph(KnowledgeGraph(
          std::vector<Triple>(r.triples.begin() + i, r.triples.begin() + end)));
    }
    for (const auto &p : r.paragraphs) {
      if (!IsBlank(p)) texts.Add(p);
    }
  }
  return {std::move(graphs), std::move(texts)};
}

PoolStats ComputePoolStats(const std::vector<CrawlRecord> &records,
                           const UnlabeledCorpus &graphs, const UnlabeledCorpus &texts) {
  PoolStats s;
  s.entities = records.size();
  for (const auto &r : records) {
    s.triples += r.triples.size();
    s.paragraphs += r.paragraphs.size();
  }
  s.graph_instances = graphs.size();
  s.text_instances = texts.size();
  for (const auto &t : texts.items()) {
    for (unsigned char c : t) {
      if ((c & 0xC0) != 0x80) ++s.text_characters;
    }
  }
  s.mean_text_length =
      s.text_instances == 0 ? 0.0 : static_cast<double>(s.text_characters) / s.text_instances;
  return s;
}

}  // namespace kgcycle
