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

// Test-only oracles for the model: central finite differences and a greedy
// decoder that recomputes the full teacher-forced forward pass every step.

#ifndef KGCYCLE_TESTS_MODEL_ORACLES_H_
#define KGCYCLE_TESTS_MODEL_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kgcycle/beam_search.h"
#include "kgcycle/model.h"

namespace kgcycle::testing_util {

inline constexpr double kFiniteDifferenceStep = 1e-4;
// Denominator floor for the elementwise relative error, so that entries
// whose true gradient is ~0 are compared on an absolute scale.
inline constexpr double kRelativeErrorFloor = 1e-3;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  size_t checked = 0;
};

// Compares the analytic gradient of NllLoss against central differences
// for every element of every tensor.
inline GradientCheckResult CheckGradients(const ModelParams &params,
                                          const Seq2SeqBatch &batch) {
  LossAndGradients analytic =
      Backward(params, batch.src, batch.tgt_in, batch.tgt_out);
  std::vector<const Matrix *> grads;
  analytic.gradients.ForEachTensor(
      [&](const std::string &, const Matrix &t) { grads.push_back(&t); });

  GradientCheckResult result;
  ModelParams probe = params;
  size_t index = 0;
  probe.ForEachTensor([&](const std::string &name, Matrix &t) {
    const Matrix &g = *grads[index++];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double original = t.data()[i];
      t.data()[i] = original + kFiniteDifferenceStep;
      const double plus = NllLoss(Forward(probe, batch.src, batch.tgt_in), batch.tgt_out);
      t.data()[i] = original - kFiniteDifferenceStep;
      const double minus = NllLoss(Forward(probe, batch.src, batch.tgt_in), batch.tgt_out);
      t.data()[i] = original;
      const double numeric = (plus - minus) / (2.0 * kFiniteDifferenceStep);
      const double a = g.data()[i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  });
  return result;
}

// Greedy decoding by repeated full forward passes; PAD, BOS and the task
// tokens are never emitted.
inline std::vector<TokenId> GreedyDecode(const ModelParams &params,
                                         const std::vector<TokenId> &src,
                                         size_t max_new_tokens) {
  Batch src_batch{{src}};
  std::vector<TokenId> prefix = {kBosId};
  std::vector<TokenId> out;
  for (size_t step = 0; step < max_new_tokens; ++step) {
    Logits logits = Forward(params, src_batch, Batch{{prefix}});
    const Matrix &rows = logits[0];
    const Eigen::Index last = rows.rows() - 1;
    TokenId best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index v = 0; v < rows.cols(); ++v) {
      if (IsBlockedOutputId(static_cast<TokenId>(v))) continue;
      if (rows(last, v) > best_value) {
        best_value = rows(last, v);
        best = static_cast<TokenId>(v);
      }
    }
    out.push_back(best);
    if (best == kEosId) break;
    prefix.push_back(best);
  }
  return out;
}

// Random small config and parameters with nonzero biases and gains.
inline ModelParams RandomSmallModel(Rng &rng, size_t vocab_size) {
  ModelConfig config;
  const size_t heads = 1 + rng.UniformInt(2);
  config.n_heads = heads;
  config.d_model = heads * (2 + rng.UniformInt(3));
  config.n_layers_enc = 1 + rng.UniformInt(2);
  config.n_layers_dec = 1 + rng.UniformInt(2);
  config.d_ff = 4 + rng.UniformInt(9);
  config.vocab_size = vocab_size;
  config.max_len = 16;
  config.dropout_rate = 0.0;
  ModelParams params = ModelParams::Initialize(config, rng.Next());
  params.ForEachTensor([&](const std::string &, Matrix &t) {
    if (t.rows() == 1) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += 0.2 * rng.Normal();
    }
  });
  return params;
}

inline TokenSequence RandomContent(Rng &rng, size_t vocab_size, size_t min_len,
                                   size_t max_len) {
  const size_t n = min_len + rng.UniformInt(max_len - min_len + 1);
  std::vector<TokenId> ids;
  for (size_t i = 0; i < n; ++i) {
    ids.push_back(static_cast<TokenId>(3 + rng.UniformInt(vocab_size - 3)));
  }
  ids.push_back(kEosId);
  return TokenSequence(std::move(ids));
}

inline Seq2SeqBatch RandomBatch(Rng &rng, size_t vocab_size, size_t batch_size) {
  std::vector<TokenSequence> src, tgt;
  for (size_t b = 0; b < batch_size; ++b) {
    src.push_back(RandomContent(rng, vocab_size, 1, 5));
    tgt.push_back(RandomContent(rng, vocab_size, 1, 4));
  }
  return MakeSeq2SeqBatch(src, tgt);
}

}  // namespace kgcycle::testing_util

#endif  // KGCYCLE_TESTS_MODEL_ORACLES_H_
