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

// Encoder-decoder transformer shared by both translation directions.
//
// Layout: pre-norm residual blocks, GELU feed-forward, sinusoidal positions,
// single embedding matrix shared by encoder input, decoder input and the
// output projection (logits = h * E^T). Inputs are scaled by sqrt(d_model).
//
// Parameter count for vocabulary V, width d, feed-forward width f and
// L_e / L_d layers:
//
//   V*d + L_e*(4d^2 + 9d + 2df + f) + L_d*(8d^2 + 15d + 2df + f) + 4d
//
// See ParameterCount().

#ifndef KGCYCLE_MODEL_H_
#define KGCYCLE_MODEL_H_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kgcycle/tokenizer.h"
#include "kgcycle/util.h"

namespace kgcycle {

class ModelError : public Error {
 public:
  using Error::Error;
};

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ModelConfig {
  size_t d_model = 128;
  size_t n_heads = 4;
  size_t n_layers_enc = 2;
  size_t n_layers_dec = 2;
  size_t d_ff = 256;
  size_t vocab_size = 0;
  size_t max_len = kDefaultMaxLen;
  double dropout_rate = 0.1;

  void Validate() const;
  bool operator==(const ModelConfig &) const = default;
};

size_t ParameterCount(const ModelConfig &config);

struct LayerNormParams {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
};

// Weights are [in, out]; biases are 1 x out.
struct AttentionParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FeedForwardParams {
  Matrix w1, b1, w2, b2;
};

struct EncoderLayerParams {
  LayerNormParams attn_norm;
  AttentionParams self_attn;
  LayerNormParams ff_norm;
  FeedForwardParams ff;
};

struct DecoderLayerParams {
  LayerNormParams self_norm;
  AttentionParams self_attn;
  LayerNormParams cross_norm;
  AttentionParams cross_attn;
  LayerNormParams ff_norm;
  FeedForwardParams ff;
};

// All learnable tensors of the model. The same type doubles as a gradient
// container.
struct ModelParams {
  ModelConfig config;
  Matrix embedding;  // V x d
  std::vector<EncoderLayerParams> encoder;
  LayerNormParams encoder_norm;
  std::vector<DecoderLayerParams> decoder;
  LayerNormParams decoder_norm;

  // Every tensor allocated and set to zero.
  static ModelParams Zeros(const ModelConfig &config);
  // Scaled normal weights, zero biases and unit norm gains.
  static ModelParams Initialize(const ModelConfig &config, uint64_t seed);

  // Calls fn(name, tensor) for every tensor in a fixed order.
  template <typename Fn>
  void ForEachTensor(Fn &&fn) {
    Visit(*this, fn);
  }
  template <typename Fn>
  void ForEachTensor(Fn &&fn) const {
    Visit(*this, fn);
  }

  size_t Count() const;
  bool AllFinite() const;
  void SetZero();
  // this += scale * other; shapes must agree.
  void AddScaled(const ModelParams &other, double scale);

 private:
  template <typename Self, typename Fn>
  static void Visit(Self &self, Fn &fn);
};

// Rectangular token batch; shorter rows are PAD-filled at the end.
struct Batch {
  std::vector<std::vector<TokenId>> rows;

  size_t batch_size() const { return rows.size(); }
  size_t length() const { return rows.empty() ? 0 : rows.front().size(); }
};

Batch MakeBatch(const std::vector<TokenSequence> &sequences);

// Source batch plus the teacher-forcing pair built from target sequences:
// tgt_in = BOS followed by the target without its last id, tgt_out = target.
struct Seq2SeqBatch {
  Batch src;
  Batch tgt_in;
  Batch tgt_out;
};

Seq2SeqBatch MakeSeq2SeqBatch(const std::vector<TokenSequence> &sources,
                              const std::vector<TokenSequence> &targets);

// Per example [tgt_len, vocab_size] logits.
using Logits = std::vector<Matrix>;

struct ForwardOptions {
  // Dropout is applied only when an rng is supplied and the rate is > 0.
  Rng *dropout_rng = nullptr;
};

// Teacher-forced logits. Decoder self-attention is causal; source PAD
// positions are excluded from attention.
Logits Forward(const ModelParams &params, const Batch &src, const Batch &tgt_in,
               const ForwardOptions &options = {});

// Mean negative log-likelihood over non-PAD target positions.
double NllLoss(const Logits &logits, const Batch &tgt_out);

// Adds scale * d(NllLoss)/d(params) to *grads and returns the loss.
double AccumulateGradients(const ModelParams &params, const Seq2SeqBatch &batch,
                           double scale, ModelParams *grads,
                           const ForwardOptions &options = {});

struct LossAndGradients {
  double loss = 0.0;
  ModelParams gradients;
};

LossAndGradients Backward(const ModelParams &params, const Batch &src,
                          const Batch &tgt_in, const Batch &tgt_out,
                          const ForwardOptions &options = {});

// Loss without gradients, dropout off.
double EvaluateLoss(const ModelParams &params, const Seq2SeqBatch &batch);

// Row-wise log-softmax.
Matrix LogSoftmaxRows(const Matrix &logits);

// Step-wise decoder with cached keys and values, used by beam search. It
// computes the same function as Forward with dropout off.
class IncrementalDecoder {
 public:
  struct State {
    std::vector<Matrix> keys;    // per layer, capacity rows x d
    std::vector<Matrix> values;  // per layer
    size_t length = 0;
  };

  IncrementalDecoder(const ModelParams &params, const std::vector<TokenId> &src,
                     size_t capacity);

  State Start() const;

  // Feeds token at position state->length and returns next-token logits.
  RowVector Step(State *state, TokenId token) const;

 private:
  const ModelParams &params_;
  size_t capacity_;
  std::vector<Matrix> cross_keys_;
  std::vector<Matrix> cross_values_;
};

template <typename Self, typename Fn>
void ModelParams::Visit(Self &self, Fn &fn) {
  auto norm = [&](const std::string &prefix, auto &p) {
    fn(prefix + ".gain", p.gain);
    fn(prefix + ".bias", p.bias);
  };
  auto attention = [&](const std::string &prefix, auto &p) {
    fn(prefix + ".wq", p.wq);
    fn(prefix + ".bq", p.bq);
    fn(prefix + ".wk", p.wk);
    fn(prefix + ".bk", p.bk);
    fn(prefix + ".wv", p.wv);
    fn(prefix + ".bv", p.bv);
    fn(prefix + ".wo", p.wo);
    fn(prefix + ".bo", p.bo);
  };
  auto feed_forward = [&](const std::string &prefix, auto &p) {
    fn(prefix + ".w1", p.w1);
    fn(prefix + ".b1", p.b1);
    fn(prefix + ".w2", p.w2);
    fn(prefix + ".b2", p.b2);
  };
  fn(std::string("embedding"), self.embedding);
  for (size_t i = 0; i < self.encoder.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i);
    auto &layer = self.encoder[i];
    norm(prefix + ".attn_norm", layer.attn_norm);
    attention(prefix + ".self_attn", layer.self_attn);
    norm(prefix + ".ff_norm", layer.ff_norm);
    feed_forward(prefix + ".ff", layer.ff);
  }
  norm("encoder_norm", self.encoder_norm);
  for (size_t i = 0; i < self.decoder.size(); ++i) {
    const std::string prefix = "decoder." + std::to_string(i);
    auto &layer = self.decoder[i];
    norm(prefix + ".self_norm", layer.self_norm);
    attention(prefix + ".self_attn", layer.self_attn);
    norm(prefix + ".cross_norm", layer.cross_norm);
    attention(prefix + ".cross_attn", layer.cross_attn);
    norm(prefix + ".ff_norm", layer.ff_norm);
    feed_forward(prefix + ".ff", layer.ff);
  }
  norm("decoder_norm", self.decoder_norm);
}

}  // namespace kgcycle

#endif  // KGCYCLE_MODEL_H_
