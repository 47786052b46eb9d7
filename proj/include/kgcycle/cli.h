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

// The kgcycle command line: train, cycle, generate, parse, prepare, eval
// and crawl behind one binary.
//
// Settings resolve as command-line flags over the --config JSON file over
// built-in defaults. Every command writes <out-dir>/manifest.json before it
// starts working.

#ifndef KGCYCLE_CLI_H_
#define KGCYCLE_CLI_H_

#include <string>
#include <vector>

#include "kgcycle/beam_search.h"
#include "kgcycle/corpus.h"
#include "kgcycle/crawler.h"
#include "kgcycle/model.h"
#include "kgcycle/training.h"

namespace kgcycle {

inline constexpr const char *kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Bad flags, settings or missing required inputs; exits with kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct DataConfig {
  std::string corpus;
  CorpusFormat format = CorpusFormat::kWebNlgXml;
  std::string text_pool;
  std::string graph_pool;
  size_t vocab_size = 8000;        // word pieces beyond the reserved ones
  double subset_fraction = 0.15;   // share of train used by finetune15

  bool operator==(const DataConfig &) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  CrawlConfig crawl;
  DataConfig data;
};

// JSON object with optional "model", "train", "decode", "crawl" and "data"
// sections. Unknown keys and ill-typed values raise UsageError.
RunConfig ParseRunConfig(const std::string &json_text, const RunConfig &defaults = {});
std::string RunConfigToJson(const RunConfig &config);

// `args` excludes the program name. Returns the process exit code.
int RunCli(const std::vector<std::string> &args);

}  // namespace kgcycle

#endif  // KGCYCLE_CLI_H_
