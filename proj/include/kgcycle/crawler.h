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

// Depth-first knowledge-base crawler collecting non-parallel data.
//
// Entities are taken from an explicit LIFO stack. Each visit retrieves the
// statements whose subject is the entity through SPARQL and the opening
// paragraphs of its encyclopedia page, then pushes every entity-valued
// object one level deeper. Origins sit at depth 0 and nothing deeper than
// max_depth is ever pushed.

#ifndef KGCYCLE_CRAWLER_H_
#define KGCYCLE_CRAWLER_H_

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgcycle/corpus.h"
#include "kgcycle/graph_codec.h"
#include "kgcycle/http_client.h"

namespace kgcycle {

class CrawlError : public Error {
 public:
  using Error::Error;
};

// Non-2xx response from an endpoint.
class EndpointError : public CrawlError {
 public:
  EndpointError(const std::string &what, int status) : CrawlError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

inline constexpr const char *kDefaultSparqlUrl = "https://query.wikidata.org/sparql";
inline constexpr const char *kDefaultWikiApiUrl = "https://en.wikipedia.org/w/api.php";
inline constexpr const char *kSparqlUrlEnv = "KGCYCLE_SPARQL_URL";
inline constexpr const char *kWikiApiUrlEnv = "KGCYCLE_WIKI_API_URL";

struct Entity {
  std::string id;    // e.g. "Q90"
  std::string name;  // English label
  bool operator==(const Entity &) const = default;
};

struct Endpoints {
  std::string sparql_url = kDefaultSparqlUrl;
  std::string wiki_api_url = kDefaultWikiApiUrl;

  // Replaces fields whose environment variable is set and non-empty.
  void ApplyEnvironment();
};

struct CrawlConfig {
  std::vector<Entity> origin_entities;
  size_t max_depth = 5;
  size_t max_paragraphs = 4;
  double rate_limit = 1.0;  // requests per second, 0 for no limit
  std::string visited_store_path;  // empty: nothing persisted
  Endpoints endpoints;
  std::optional<std::string> offline_fixture_dir;
  size_t max_retries = 4;
  double initial_backoff_seconds = 1.0;
  size_t max_entities = 0;  // stop after this many visits, 0 for no cap

  void Validate() const;
};

struct CrawlRecord {
  std::string entity_id;
  std::string entity_name;
  std::vector<Triple> triples;
  std::vector<std::string> paragraphs;
  size_t depth = 0;
  std::string timestamp;  // UTC, ISO 8601
};

// One JSON object per line.
std::string RecordToJson(const CrawlRecord &record);
CrawlRecord RecordFromJson(const std::string &line);
std::vector<CrawlRecord> LoadRecords(const std::string &path);

struct TripleFetch {
  std::vector<Triple> triples;
  // Entity-valued objects in retrieval order.
  std::vector<Entity> objects;
  size_t skipped_rows = 0;
};

struct CrawlStats {
  size_t visited = 0;
  size_t failed = 0;
  size_t skipped_rows = 0;
  size_t requests = 0;
};

// Sleep hook, replaceable in tests.
using SleepFn = std::function<void(double seconds)>;

class Crawler {
 public:
  // Uses a fixture client when offline_fixture_dir is set, else the live one.
  explicit Crawler(CrawlConfig config);
  Crawler(CrawlConfig config, std::unique_ptr<HttpClient> client, SleepFn sleep = {});

  // Statements of `entity` with English labels, subject = entity.name.
  TripleFetch FetchTriples(const Entity &entity);

  // First max_paragraphs blank-line-separated paragraphs of the page, with
  // headings dropped and whitespace collapsed. A missing page gives [].
  std::vector<std::string> FetchParagraphs(const std::string &entity_name);

  // Runs the DFS until the stack is empty or max_entities visits were made.
  // Visited ids and the remaining stack are persisted next to
  // visited_store_path, so a later call resumes where this one stopped.
  void Crawl(const std::function<void(const CrawlRecord &)> &emit);
  std::vector<CrawlRecord> Crawl();

  const CrawlStats &stats() const { return stats_; }
  const std::set<std::string> &visited() const { return visited_; }

  static std::string SparqlQuery(const std::string &entity_id);
  std::string SparqlRequestUrl(const std::string &entity_id) const;
  std::string ExtractRequestUrl(const std::string &entity_name) const;

 private:
  struct Frame {
    Entity entity;
    size_t depth;
  };

  HttpResponse GetWithRetry(const std::string &url);
  void Throttle();
  void LoadState(std::vector<Frame> *stack);
  void SaveStack(const std::vector<Frame> &stack) const;
  void AppendVisited(const std::string &id) const;

  CrawlConfig config_;
  std::unique_ptr<HttpClient> client_;
  SleepFn sleep_;
  CrawlStats stats_;
  std::set<std::string> visited_;
  double last_request_ = -1.0;
};

// Graph pool from each record's triples in chunks of at most kMaxTriples,
// text pool with one instance per paragraph; both deduplicated.
std::pair<UnlabeledCorpus, UnlabeledCorpus> BuildPools(const std::vector<CrawlRecord> &records);

struct PoolStats {
  size_t entities = 0;
  size_t triples = 0;
  size_t paragraphs = 0;
  size_t graph_instances = 0;
  size_t text_instances = 0;
  size_t text_characters = 0;  // code points over the text pool
  double mean_text_length = 0.0;
};

PoolStats ComputePoolStats(const std::vector<CrawlRecord> &records,
                           const UnlabeledCorpus &graphs, const UnlabeledCorpus &texts);

}  // namespace kgcycle

#endif  // KGCYCLE_CRAWLER_H_
