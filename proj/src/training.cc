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

#include "kgcycle/training.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgcycle/graph_codec.h"

namespace kgcycle {
namespace {

constexpr uint64_t kFinetuneStream = 1;
constexpr uint64_t kCycleStream = 2;
constexpr uint64_t kDropoutStream = 3;
constexpr uint64_t kHoldoutStream = 4;

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "-";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseDouble(const std::string &s) {
  if (s == "-") return std::numeric_limits<double>::quiet_NaN();
  size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw TrainingError("bad number in log: " + s);
  return v;
}

// Task-token surface plus the generated string, kept verbatim even when it
// already starts with a task token.
std::string SyntheticSource(const TaskToken &token, const std::string &generated) {
  return std::string(token.surface) + " " + generated;
}

void CheckFiniteLoss(double loss, const std::string &where) {
  if (!std::isfinite(loss)) {
    throw TrainingError("non-finite loss " + FormatDouble(loss) + " at " + where);
  }
}

class Stopwatch {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Splits example indices into (train, held-out).
std::pair<std::vector<ParallelExample>, std::vector<ParallelExample>> HoldOut(
    const std::vector<ParallelExample> &examples, double fraction, uint64_t seed) {
  const size_t n = examples.size();
  size_t held = 0;
  if (fraction > 0.0 && n >= 2) {
    held = static_cast<size_t>(std::llround(fraction * n));
    held = std::clamp<size_t>(held, 1, n - 1);
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(DeriveSeed(seed, kHoldoutStream));
  rng.Shuffle(order);
  std::vector<bool> is_held(n, false);
  for (size_t i = 0; i < held; ++i) is_held[order[i]] = true;
  std::pair<std::vector<ParallelExample>, std::vector<ParallelExample>> out;
  for (size_t i = 0; i < n; ++i) {
    (is_held[i] ? out.second : out.first).push_back(examples[i]);
  }
  return out;
}

// Gradient accumulation over groups of minibatches with mean-of-means
// scaling.
class Accumulator {
 public:
  Accumulator(const ModelConfig &config, Optimizer *optimizer, size_t group)
      : grads_(ModelParams::Zeros(config)), optimizer_(optimizer), group_(group) {}

  // Scale for the next minibatch given how many remain in the epoch.
  double NextScale(size_t remaining_in_epoch) {
    if (pending_ == 0) current_group_ = std::min(group_, remaining_in_epoch);
    return 1.0 / static_cast<double>(current_group_);
  }

  ModelParams *grads() { return &grads_; }

  // Counts a finished minibatch; returns true when an update was applied.
  bool Commit(ModelParams *params) {
    if (++pending_ < current_group_) return false;
    optimizer_->Step(params, grads_);
    grads_.SetZero();
    pending_ = 0;
    return true;
  }

 private:
  ModelParams grads_;
  Optimizer *optimizer_;
  size_t group_;
  size_t current_group_ = 1;
  size_t pending_ = 0;
};

std::vector<TrainingPair> Slice(const std::vector<TrainingPair> &pairs, size_t begin,
                                size_t count) {
  const size_t end = std::min(pairs.size(), begin + count);
  return {pairs.begin() + static_cast<std::ptrdiff_t>(std::min(begin, end)),
          pairs.begin() + static_cast<std::ptrdiff_t>(end)};
}

template <typename T>
std::vector<T> SliceOf(const std::vector<T> &items, size_t begin, size_t count) {
  const size_t b = std::min(begin, items.size());
  const size_t e = std::min(items.size(), begin + count);
  return {items.begin() + static_cast<std::ptrdiff_t>(b),
          items.begin() + static_cast<std::ptrdiff_t>(e)};
}

size_t CeilDiv(size_t a, size_t b) { return (a + b - 1) / b; }

}  // namespace

void TrainConfig::Validate() const {
  if (batch_size == 0 || accumulation_steps == 0 || max_epochs_finetune == 0 ||
      max_epochs_cycle == 0 || patience == 0 || synthetic_per_iteration == 0 ||
      max_len < 2) {
    throw TrainingError("train config counts must be positive");
  }
  if (!(lr_finetune > 0.0) || !(lr_cycle > 0.0)) {
    throw TrainingError("learning rates must be positive");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw TrainingError("validation_fraction must be in [0, 1)");
  }
}

bool EarlyStopping::Record(double value) {
  history_.push_back(value);
  if (best_epoch_ == 0 || value < best_value_) {
    best_value_ = value;
    best_epoch_ = history_.size();
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

void TrainLog::Extend(const TrainLog &other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

std::string TrainLog::ToTsv() const {
  std::string out = "phase\tstep\tepoch\ttrain_loss\tcycle_loss\tval_loss\twall_seconds\n";
  for (const auto &r : rows_) {
    out += r.phase + "\t" + std::to_string(r.step) + "\t" + std::to_string(r.epoch) +
           "\t" + FormatDouble(r.train_loss) + "\t" + FormatDouble(r.cycle_loss) + "\t" +
           FormatDouble(r.val_loss) + "\t" + FormatDouble(r.wall_seconds) + "\n";
  }
  return out;
}

TrainLog TrainLog::FromTsv(const std::string &tsv) {
  TrainLog log;
  std::istringstream in(tsv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f = Split(line, '\t');
    if (f.size() != 7) throw TrainingError("bad log line: " + line);
    log.Append({f[0], std::stoul(f[1]), std::stoul(f[2]), ParseDouble(f[3]),
                ParseDouble(f[4]), ParseDouble(f[5]), ParseDouble(f[6])});
  }
  return log;
}

void TrainLog::Save(const std::string &path) const { WriteFile(path, ToTsv()); }

TrainingPair GraphToTextPair(const KnowledgeGraph &graph, const std::string &text) {
  return {PrefixTask(kGenerateText, LinearizeGraph(graph)), text};
}

TrainingPair TextToGraphPair(const std::string &text, const KnowledgeGraph &graph) {
  return {PrefixTask(kGenerateGraph, text), LinearizeGraph(graph)};
}

std::vector<TrainingPair> SupervisedPairs(const std::vector<ParallelExample> &examples) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(2 * examples.size());
  for (const auto &e : examples) {
    pairs.push_back(GraphToTextPair(e.graph, e.text));
    pairs.push_back(TextToGraphPair(e.text, e.graph));
  }
  return pairs;
}

Seq2SeqBatch EncodePairs(const Vocabulary &vocab, const std::vector<TrainingPair> &pairs,
                         size_t max_len) {
  std::vector<TokenSequence> sources, targets;
  for (const auto &p : pairs) {
    sources.push_back(Encode(vocab, p.source, max_len));
    targets.push_back(Encode(vocab, p.target, max_len));
  }
  return MakeSeq2SeqBatch(sources, targets);
}

double MeanLoss(const ModelParams &params, const Vocabulary &vocab,
                const std::vector<TrainingPair> &pairs, size_t batch_size,
                size_t max_len) {
  if (pairs.empty()) throw TrainingError("mean loss of an empty set");
  double sum = 0.0;
  size_t batches = 0;
  for (size_t begin = 0; begin < pairs.size(); begin += batch_size) {
    sum += EvaluateLoss(params, EncodePairs(vocab, Slice(pairs, begin, batch_size), max_len));
    ++batches;
  }
  return sum / static_cast<double>(batches);
}

double TeacherForcedAccuracy(const ModelParams &params, const Vocabulary &vocab,
                             const std::vector<TrainingPair> &pairs, size_t max_len) {
  size_t correct = 0, total = 0;
  for (const auto &pair : pairs) {
    Seq2SeqBatch batch = EncodePairs(vocab, {pair}, max_len);
    Logits logits = Forward(params, batch.src, batch.tgt_in);
    const auto &target = batch.tgt_out.rows[0];
    for (size_t t = 0; t < target.size(); ++t) {
      if (target[t] == kPadId) continue;
      Eigen::Index best = 0;
      logits[0].row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      correct += best == target[t];
      ++total;
    }
  }
  if (total == 0) throw TrainingError("accuracy over zero target tokens");
  return static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult Finetune(const ModelParams &init, const Vocabulary &vocab,
                     const ParallelCorpus &parallel, const TrainConfig &config) {
  config.Validate();
  const std::vector<ParallelExample> examples = parallel.WithSplit(SplitTag::kTrain);
  if (examples.empty()) throw TrainingError("fine-tuning needs train examples");
  auto [train, held] = HoldOut(examples, config.validation_fraction, config.seed);
  const std::vector<TrainingPair> held_pairs = SupervisedPairs(held);

  ModelParams params = init;
  TrainResult result{init, {}, 0, 0.0, 0};
  auto optimizer = MakeOptimizer(config.optimizer, config.lr_finetune);
  Accumulator acc(params.config, optimizer.get(), config.accumulation_steps);
  Rng shuffle_rng(DeriveSeed(config.seed, kFinetuneStream));
  Rng dropout_rng(DeriveSeed(config.seed, kDropoutStream, kFinetuneStream));
  EarlyStopping stopping(config.patience);
  Stopwatch clock;
  bool capped = false;

  for (size_t epoch = 1; epoch <= config.max_epochs_finetune && !capped; ++epoch) {
    std::vector<ParallelExample> order = train;
    shuffle_rng.Shuffle(order);
    const std::vector<TrainingPair> pairs = SupervisedPairs(order);
    const size_t num_batches = CeilDiv(pairs.size(), config.batch_size);
    double loss_sum = 0.0;
    size_t batches_run = 0;
    for (size_t b = 0; b < num_batches; ++b) {
      Seq2SeqBatch batch = EncodePairs(
          vocab, Slice(pairs, b * config.batch_size, config.batch_size), config.max_len);
      const double scale = acc.NextScale(num_batches - b);
      const double loss =
          AccumulateGradients(params, batch, scale, acc.grads(), {&dropout_rng});
      CheckFiniteLoss(loss, "fine-tune epoch " + std::to_string(epoch));
      loss_sum += loss;
      ++batches_run;
      if (acc.Commit(&params)) {
        ++result.optimizer_steps;
        if (config.max_optimizer_steps != 0 &&
            result.optimizer_steps >= config.max_optimizer_steps) {
          capped = true;
          break;
        }
      }
    }
    const double train_loss = loss_sum / static_cast<double>(batches_run);
    const double monitored =
        held_pairs.empty()
            ? train_loss
            : MeanLoss(params, vocab, held_pairs, config.batch_size, config.max_len);
    CheckFiniteLoss(monitored, "validation");
    result.log.Append({"finetune", 0, epoch, train_loss,
                       std::numeric_limits<double>::quiet_NaN(), monitored,
                       clock.Seconds()});
    if (stopping.Record(monitored)) result.params = params;
    if (stopping.ShouldStop()) break;
  }
  result.best_epoch = stopping.best_epoch();
  result.best_loss = stopping.best_value();
  return result;
}

GenerateFn ModelGenerator(const ModelParams &params, const Vocabulary &vocab,
                          const DecodeConfig &decode, size_t max_len) {
  return [&params, &vocab, decode, max_len](const std::string &source) {
    return Decode(vocab, Generate(params, Encode(vocab, source, max_len), decode));
  };
}

std::vector<TrainingPair> CycleGraphToTextPairs(const std::vector<std::string> &texts,
                                                const GenerateFn &generate) {
  std::vector<TrainingPair> pairs;
  for (const auto &t : texts) {
    const std::string g_hat = generate(PrefixTask(kGenerateGraph, t));
    pairs.push_back({SyntheticSource(kGenerateText, g_hat), t});
  }
  return pairs;
}

std::vector<TrainingPair> CycleTextToGraphPairs(const std::vector<std::string> &graphs,
                                                const GenerateFn &generate) {
  std::vector<TrainingPair> pairs;
  for (const auto &g : graphs) {
    const std::string t_hat = generate(PrefixTask(kGenerateText, g));
    pairs.push_back({SyntheticSource(kGenerateGraph, t_hat), g});
  }
  return pairs;
}

CycleLosses CycleStepLosses(const ModelParams &params, const Vocabulary &vocab,
                            const std::vector<std::string> &texts,
                            const std::vector<std::string> &graphs,
                            const GenerateFn &generate, size_t max_len) {
  if (texts.empty() || graphs.empty()) throw TrainingError("empty cycle batch");
  CycleLosses losses;
  losses.g2t = EvaluateLoss(
      params, EncodePairs(vocab, CycleGraphToTextPairs(texts, generate), max_len));
  losses.t2g = EvaluateLoss(
      params, EncodePairs(vocab, CycleTextToGraphPairs(graphs, generate), max_len));
  return losses;
}

CycleLosses AccumulateCycleGradients(const ModelParams &params, const Vocabulary &vocab,
                                     const std::vector<std::string> &texts,
                                     const std::vector<std::string> &graphs,
                                     const GenerateFn &generate, double scale,
                                     ModelParams *grads, const ForwardOptions &options,
                                     size_t max_len) {
  CycleLosses losses;
  if (!texts.empty()) {
    losses.g2t = AccumulateGradients(
        params, EncodePairs(vocab, CycleGraphToTextPairs(texts, generate), max_len), scale,
        grads, options);
  }
  if (!graphs.empty()) {
    losses.t2g = AccumulateGradients(
        params, EncodePairs(vocab, CycleTextToGraphPairs(graphs, generate), max_len), scale,
        grads, options);
  }
  return losses;
}

CycleResult CycleTrain(const ModelParams &init, const Vocabulary &vocab,
                       const UnlabeledCorpus &text_pool,
                       const UnlabeledCorpus &graph_pool,
                       const ParallelCorpus &supervised, const TrainConfig &config,
                       const DecodeConfig &decode, const IterationCallback &on_iteration) {
  config.Validate();
  decode.Validate();
  CycleResult result{init, {}, {}};
  if (config.cycle_steps == 0) return result;
  if (text_pool.kind() != PoolKind::kText || graph_pool.kind() != PoolKind::kGraphs) {
    throw TrainingError("cycle training needs a text pool and a graph pool");
  }
  if (text_pool.size() < config.batch_size || graph_pool.size() < config.batch_size) {
    throw TrainingError("pools hold fewer items than one batch (" +
                        std::to_string(text_pool.size()) + " texts, " +
                        std::to_string(graph_pool.size()) + " graphs, batch " +
                        std::to_string(config.batch_size) + ")");
  }
  auto [sup_train, sup_held] = HoldOut(supervised.WithSplit(SplitTag::kTrain),
                                       config.validation_fraction, config.seed);
  const std::vector<TrainingPair> sup_pairs = SupervisedPairs(sup_train);
  const std::vector<TrainingPair> held_pairs = SupervisedPairs(sup_held);

  ModelParams params = init;
  Stopwatch clock;
  for (size_t it = 0; it < config.cycle_steps; ++it) {
    const uint64_t iter_seed = DeriveSeed(config.seed, kCycleStream, it);
    const auto text_idx = DrawIterationIndices(
        text_pool.size(), config.synthetic_per_iteration, it, config.seed);
    const auto graph_idx = DrawIterationIndices(
        graph_pool.size(), config.synthetic_per_iteration, it,
        DeriveSeed(config.seed, kCycleStream));
    result.state.text_draws.push_back(text_idx);
    result.state.graph_draws.push_back(graph_idx);
    std::vector<std::string> texts, graphs;
    for (size_t i : text_idx) texts.push_back(text_pool.items()[i]);
    for (size_t i : graph_idx) graphs.push_back(graph_pool.items()[i]);

    auto optimizer = MakeOptimizer(config.optimizer, config.lr_cycle);
    Accumulator acc(params.config, optimizer.get(), config.accumulation_steps);
    Rng shuffle_rng(iter_seed);
    Rng dropout_rng(DeriveSeed(iter_seed, kDropoutStream));
    EarlyStopping stopping(config.patience);
    GenerateFn generate = ModelGenerator(params, vocab, decode, config.max_len);
    ModelParams best = params;
    std::vector<double> cycle_history;
    size_t steps = 0;
    bool capped = false;

    for (size_t epoch = 1; epoch <= config.max_epochs_cycle && !capped; ++epoch) {
      shuffle_rng.Shuffle(texts);
      shuffle_rng.Shuffle(graphs);
      std::vector<TrainingPair> sup_order = sup_pairs;
      shuffle_rng.Shuffle(sup_order);
      const size_t num_batches =
          CeilDiv(std::max(texts.size(), graphs.size()), config.batch_size);
      double total_sum = 0.0, cycle_sum = 0.0;
      size_t batches_run = 0;
      for (size_t b = 0; b < num_batches; ++b) {
        const auto text_batch = SliceOf(texts, b * config.batch_size, config.batch_size);
        const auto graph_batch = SliceOf(graphs, b * config.batch_size, config.batch_size);
        const double scale = acc.NextScale(num_batches - b);
        const double cycle_loss =
            AccumulateCycleGradients(params, vocab, text_batch, graph_batch, generate, scale,
                                     acc.grads(), {&dropout_rng}, config.max_len)
                .total();
        double total = cycle_loss;
        if (!sup_order.empty()) {
          std::vector<TrainingPair> sup_batch;
          for (size_t k = 0; k < config.batch_size; ++k) {
            sup_batch.push_back(sup_order[(b * config.batch_size + k) % sup_order.size()]);
          }
          total += AccumulateGradients(params, EncodePairs(vocab, sup_batch, config.max_len),
                                       scale, acc.grads(), {&dropout_rng});
        }
        CheckFiniteLoss(total, "cycle iteration " + std::to_string(it + 1));
        total_sum += total;
        cycle_sum += cycle_loss;
        ++batches_run;
        if (acc.Commit(&params)) {
          ++steps;
          if (config.max_optimizer_steps != 0 && steps >= config.max_optimizer_steps) {
            capped = true;
            break;
          }
        }
      }
      const double n = static_cast<double>(batches_run);
      const double cycle_mean = cycle_sum / n;
      const double monitored =
          held_pairs.empty()
              ? cycle_mean
              : MeanLoss(params, vocab, held_pairs, config.batch_size, config.max_len);
      CheckFiniteLoss(monitored, "cycle validation");
      cycle_history.push_back(cycle_mean);
      result.log.Append({"cycle", it + 1, epoch, total_sum / n, cycle_mean, monitored,
                         clock.Seconds()});
      if (stopping.Record(monitored)) best = params;
      if (stopping.ShouldStop()) break;
    }
    params = best;
    result.state.cycle_loss_history.push_back(std::move(cycle_history));
    result.state.best_epochs.push_back(stopping.best_epoch());
    result.state.step_index = it + 1;
    spdlog::info("cycle iteration {}: best epoch {} (monitored {:.6f})", it + 1,
                 stopping.best_epoch(), stopping.best_value());
    if (on_iteration) on_iteration(it, params);
  }
  result.params = params;
  return result;
}

}  // namespace kgcycle
