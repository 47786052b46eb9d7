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

// Supervised multi-task fine-tuning and iterative cycle training.

#ifndef KGCYCLE_TRAINING_H_
#define KGCYCLE_TRAINING_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgcycle/beam_search.h"
#include "kgcycle/corpus.h"
#include "kgcycle/model.h"
#include "kgcycle/optimizer.h"
#include "kgcycle/tokenizer.h"

namespace kgcycle {

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  size_t batch_size = 8;
  size_t accumulation_steps = 4;
  double lr_finetune = 2.0e-4;
  double lr_cycle = 1.0e-5;
  size_t max_epochs_finetune = 50;
  size_t max_epochs_cycle = 30;
  size_t patience = 5;
  size_t cycle_steps = 3;
  size_t synthetic_per_iteration = 1000;
  uint64_t seed = 0;
  // Share of supervised pairs held out for early stopping. At 0 the
  // training loss is monitored instead.
  double validation_fraction = 0.1;
  // Stops a phase after this many updates; 0 means no cap.
  size_t max_optimizer_steps = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  size_t max_len = kDefaultMaxLen;

  // cycle_steps may be 0; every other count must be positive.
  void Validate() const;
  bool operator==(const TrainConfig &) const = default;
};

// Patience on strict improvement of a monitored loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(size_t patience) : patience_(patience) {}

  // Records the next epoch's value; true when it is a new best.
  bool Record(double value);
  bool ShouldStop() const { return since_best_ >= patience_; }

  size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 if none
  double best_value() const { return best_value_; }
  const std::vector<double> &history() const { return history_; }

 private:
  size_t patience_;
  size_t best_epoch_ = 0;
  double best_value_ = 0.0;
  size_t since_best_ = 0;
  std::vector<double> history_;
};

// One line per epoch. cycle_loss is NaN outside the cycle phase.
struct EpochRecord {
  std::string phase;
  size_t step = 0;
  size_t epoch = 0;
  double train_loss = 0.0;
  double cycle_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

class TrainLog {
 public:
  void Append(EpochRecord record) { rows_.push_back(std::move(record)); }
  void Extend(const TrainLog &other);
  const std::vector<EpochRecord> &rows() const { return rows_; }

  // Tab-separated with a header row; losses at full precision.
  std::string ToTsv() const;
  static TrainLog FromTsv(const std::string &tsv);
  void Save(const std::string &path) const;

 private:
  std::vector<EpochRecord> rows_;
};

// Source/target strings of one seq2seq example.
struct TrainingPair {
  std::string source;
  std::string target;

  bool operator==(const TrainingPair &) const = default;
};

TrainingPair GraphToTextPair(const KnowledgeGraph &graph, const std::string &text);
TrainingPair TextToGraphPair(const std::string &text, const KnowledgeGraph &graph);

// Both directions per example, interleaved.
std::vector<TrainingPair> SupervisedPairs(const std::vector<ParallelExample> &examples);

Seq2SeqBatch EncodePairs(const Vocabulary &vocab, const std::vector<TrainingPair> &pairs,
                         size_t max_len = kDefaultMaxLen);

// Mean of per-batch token-mean losses in fixed batches.
double MeanLoss(const ModelParams &params, const Vocabulary &vocab,
                const std::vector<TrainingPair> &pairs, size_t batch_size,
                size_t max_len = kDefaultMaxLen);

// Share of non-PAD target positions whose argmax logit is the target.
double TeacherForcedAccuracy(const ModelParams &params, const Vocabulary &vocab,
                             const std::vector<TrainingPair> &pairs,
                             size_t max_len = kDefaultMaxLen);

struct TrainResult {
  ModelParams params;
  TrainLog log;
  size_t best_epoch = 0;
  double best_loss = 0.0;
  size_t optimizer_steps = 0;
};

// Multi-task maximum likelihood on the train split of `parallel`. Updates
// every accumulation_steps minibatches on the mean of their losses; the
// group at the end of an epoch may be shorter. Returns the parameters of
// the epoch with the lowest monitored loss.
TrainResult Finetune(const ModelParams &init, const Vocabulary &vocab,
                     const ParallelCorpus &parallel, const TrainConfig &config);

// Maps a task-prefixed source string to the model's output string.
using GenerateFn = std::function<std::string(const std::string &source)>;

// Beam-search generation with `params`.
GenerateFn ModelGenerator(const ModelParams &params, const Vocabulary &vocab,
                          const DecodeConfig &decode, size_t max_len = kDefaultMaxLen);

// Pseudo-pairs with generated inputs and human references. For text t the
// pair is (generate text: ĝ) -> t with ĝ = generate(generate graph: t); for a
// linearized graph g it is (generate graph: t̂) -> g with
// t̂ = generate(generate text: g). Generated strings are used verbatim.
std::vector<TrainingPair> CycleGraphToTextPairs(const std::vector<std::string> &texts,
                                                const GenerateFn &generate);
std::vector<TrainingPair> CycleTextToGraphPairs(const std::vector<std::string> &graphs,
                                                const GenerateFn &generate);

struct CycleLosses {
  double g2t = 0.0;
  double t2g = 0.0;
  double total() const { return g2t + t2g; }
};

// Token-mean losses of both cycle legs on one batch of texts and linearized
// graphs. Nothing is differentiated through `generate`.
CycleLosses CycleStepLosses(const ModelParams &params, const Vocabulary &vocab,
                            const std::vector<std::string> &texts,
                            const std::vector<std::string> &graphs,
                            const GenerateFn &generate, size_t max_len = kDefaultMaxLen);

// Adds scale * d(L_cycleG2T + L_cycleT2G)/d(params) to *grads with the
// generated strings held fixed; empty legs are skipped.
CycleLosses AccumulateCycleGradients(const ModelParams &params, const Vocabulary &vocab,
                                     const std::vector<std::string> &texts,
                                     const std::vector<std::string> &graphs,
                                     const GenerateFn &generate, double scale,
                                     ModelParams *grads, const ForwardOptions &options = {},
                                     size_t max_len = kDefaultMaxLen);

struct CycleState {
  size_t step_index = 0;  // completed iterations
  std::vector<std::vector<size_t>> text_draws;
  std::vector<std::vector<size_t>> graph_draws;
  // Mean cycle loss of every epoch, per iteration.
  std::vector<std::vector<double>> cycle_loss_history;
  std::vector<size_t> best_epochs;
};

struct CycleResult {
  ModelParams params;
  TrainLog log;
  CycleState state;
};

// Called with the restored best parameters after every iteration.
using IterationCallback = std::function<void(size_t iteration, const ModelParams &)>;

// cycle_steps iterations of L_cycle plus the supervised loss, each on a
// fresh pool draw, at lr_cycle, with per-iteration early stopping on the
// held-out supervised loss (or on L_cycle without supervised data).
CycleResult CycleTrain(const ModelParams &init, const Vocabulary &vocab,
                       const UnlabeledCorpus &text_pool,
                       const UnlabeledCorpus &graph_pool,
                       const ParallelCorpus &supervised, const TrainConfig &config,
                       const DecodeConfig &decode,
                       const IterationCallback &on_iteration = {});

}  // namespace kgcycle

#endif  // KGCYCLE_TRAINING_H_
