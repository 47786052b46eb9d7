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

#include "kgcycle/model.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace kgcycle {

void ModelConfig::Validate() const {
  if (d_model == 0 || n_heads == 0 || n_layers_enc == 0 || n_layers_dec == 0 ||
      d_ff == 0 || vocab_size == 0 || max_len == 0) {
    throw ModelError("model config: all sizes must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw ModelError("model config: d_model must be divisible by n_heads");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ModelError("model config: dropout_rate must be in [0, 1)");
  }
}

size_t ParameterCount(const ModelConfig &c) {
  const size_t d = c.d_model;
  const size_t f = c.d_ff;
  const size_t encoder_layer = 4 * d * d + 9 * d + 2 * d * f + f;
  const size_t decoder_layer = 8 * d * d + 15 * d + 2 * d * f + f;
  return c.vocab_size * d + c.n_layers_enc * encoder_layer +
         c.n_layers_dec * decoder_layer + 4 * d;
}

// ---------------------------------------------------------------------------
// Parameter containers.

namespace {

LayerNormParams ZeroNorm(size_t d) {
  return {Matrix::Zero(1, d), Matrix::Zero(1, d)};
}

AttentionParams ZeroAttention(size_t d) {
  AttentionParams p;
  for (Matrix *w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = Matrix::Zero(d, d);
  for (Matrix *b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = Matrix::Zero(1, d);
  return p;
}

FeedForwardParams ZeroFeedForward(size_t d, size_t f) {
  return {Matrix::Zero(d, f), Matrix::Zero(1, f), Matrix::Zero(f, d),
          Matrix::Zero(1, d)};
}

}  // namespace

ModelParams ModelParams::Zeros(const ModelConfig &config) {
  config.Validate();
  const size_t d = config.d_model;
  const size_t f = config.d_ff;
  ModelParams p;
  p.config = config;
  p.embedding = Matrix::Zero(config.vocab_size, d);
  p.encoder.resize(config.n_layers_enc);
  for (auto &layer : p.encoder) {
    layer.attn_norm = ZeroNorm(d);
    layer.self_attn = ZeroAttention(d);
    layer.ff_norm = ZeroNorm(d);
    layer.ff = ZeroFeedForward(d, f);
  }
  p.encoder_norm = ZeroNorm(d);
  p.decoder.resize(config.n_layers_dec);
  for (auto &layer : p.decoder) {
    layer.self_norm = ZeroNorm(d);
    layer.self_attn = ZeroAttention(d);
    layer.cross_norm = ZeroNorm(d);
    layer.cross_attn = ZeroAttention(d);
    layer.ff_norm = ZeroNorm(d);
    layer.ff = ZeroFeedForward(d, f);
  }
  p.decoder_norm = ZeroNorm(d);
  return p;
}

ModelParams ModelParams::Initialize(const ModelConfig &config, uint64_t seed) {
  ModelParams p = Zeros(config);
  Rng rng(seed);
  p.ForEachTensor([&](const std::string &name, Matrix &t) {
    if (name.ends_with(".gain")) {
      t.setOnes();
    } else if (t.rows() == 1) {
      // Biases start at zero.
    } else {
      // Embedding rows: std d^-1/2 so that sqrt(d)-scaled inputs are unit
      // scale. Projections: std fan_in^-1/2.
      const double fan_in = name == "embedding"
                                ? static_cast<double>(config.d_model)
                                : static_cast<double>(t.rows());
      const double stddev = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data()[i] = rng.Normal() * stddev;
      }
    }
  });
  return p;
}

size_t ModelParams::Count() const {
  size_t n = 0;
  ForEachTensor([&](const std::string &, const Matrix &t) { n += t.size(); });
  return n;
}

bool ModelParams::AllFinite() const {
  bool finite = true;
  ForEachTensor([&](const std::string &, const Matrix &t) {
    if (finite && !t.allFinite()) finite = false;
  });
  return finite;
}

void ModelParams::SetZero() {
  ForEachTensor([](const std::string &, Matrix &t) { t.setZero(); });
}

void ModelParams::AddScaled(const ModelParams &other, double scale) {
  std::vector<const Matrix *> sources;
  other.ForEachTensor(
      [&](const std::string &, const Matrix &t) { sources.push_back(&t); });
  size_t i = 0;
  ForEachTensor([&](const std::string &name, Matrix &t) {
    if (i >= sources.size() || sources[i]->rows() != t.rows() ||
        sources[i]->cols() != t.cols()) {
      throw ModelError("AddScaled: shape mismatch at " + name);
    }
    t.noalias() += scale * *sources[i];
    ++i;
  });
}

// ---------------------------------------------------------------------------
// Batching.

Batch MakeBatch(const std::vector<TokenSequence> &sequences) {
  Batch batch;
  size_t length = 0;
  for (const auto &s : sequences) length = std::max(length, s.size());
  batch.rows.reserve(sequences.size());
  for (const auto &s : sequences) {
    std::vector<TokenId> row = s.ids();
    row.resize(length, kPadId);
    batch.rows.push_back(std::move(row));
  }
  return batch;
}

Seq2SeqBatch MakeSeq2SeqBatch(const std::vector<TokenSequence> &sources,
                              const std::vector<TokenSequence> &targets) {
  if (sources.size() != targets.size()) {
    throw ModelError("MakeSeq2SeqBatch: source/target count mismatch");
  }
  std::vector<TokenSequence> inputs;
  inputs.reserve(targets.size());
  for (const auto &t : targets) {
    if (t.empty()) throw ModelError("MakeSeq2SeqBatch: empty target");
    std::vector<TokenId> in;
    in.reserve(t.size());
    in.push_back(kBosId);
    in.insert(in.end(), t.ids().begin(), t.ids().end() - 1);
    // tgt_in never carries EOS; a shifted EOS becomes trailing fill.
    while (!in.empty() && (in.back() == kPadId || in.back() == kEosId)) {
      in.pop_back();
    }
    inputs.emplace_back(std::move(in));
  }
  Seq2SeqBatch batch;
  batch.src = MakeBatch(sources);
  batch.tgt_out = MakeBatch(targets);
  batch.tgt_in = MakeBatch(inputs);
  // Pad tgt_in to the tgt_out length.
  for (auto &row : batch.tgt_in.rows) row.resize(batch.tgt_out.length(), kPadId);
  return batch;
}

// ---------------------------------------------------------------------------
// Layers. Each forward fills a cache consumed by the matching backward.

namespace {

constexpr double kLayerNormEps = 1e-6;

void AddBias(Matrix &x, const Matrix &bias) { x.rowwise() += bias.row(0); }

void PositionEncoding(Matrix &x, size_t offset) {
  const Eigen::Index d = x.cols();
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double pos = static_cast<double>(offset + t);
    for (Eigen::Index i = 0; i < d; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      x(t, i) += std::sin(pos * freq);
      if (i + 1 < d) x(t, i + 1) += std::cos(pos * freq);
    }
  }
}

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix LayerNormForward(const LayerNormParams &p, const Matrix &x,
                        LayerNormCache *cache) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Matrix xhat(n, x.cols());
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    auto centered = x.row(i).array() - mean;
    const double var = centered.square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * inv_std(i);
  }
  Matrix y = xhat;
  y.array().rowwise() *= p.gain.row(0).array();
  AddBias(y, p.bias);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNormBackward(const LayerNormParams &p, const LayerNormCache &cache,
                         const Matrix &dy, LayerNormParams *grad) {
  grad->gain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grad->bias.row(0) += dy.colwise().sum();
  Matrix dxhat = dy;
  dxhat.array().rowwise() *= p.gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double sum = dxhat.row(i).sum();
    const double dot = dxhat.row(i).dot(cache.xhat.row(i));
    dx.row(i) = (cache.inv_std(i) / d) *
                (d * dxhat.row(i).array() - sum -
                 cache.xhat.row(i).array() * dot)
                    .matrix();
  }
  return dx;
}

struct AttentionCache {
  Matrix xq, xkv, q, k, v, context;
  std::vector<Matrix> probs;
};

// In-place softmax over the first `limit` entries of each row; the rest are
// zeroed. limit(i) = i + 1 for causal attention.
void MaskedSoftmaxRows(Matrix &s, bool causal) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index limit = causal ? std::min<Eigen::Index>(i + 1, s.cols())
                                      : s.cols();
    auto row = s.row(i).head(limit);
    const double max = row.maxCoeff();
    row = (row.array() - max).exp().matrix();
    row /= row.sum();
    if (limit < s.cols()) s.row(i).tail(s.cols() - limit).setZero();
  }
}

Matrix AttentionForward(const AttentionParams &p, const Matrix &xq,
                        const Matrix &xkv, size_t n_heads, bool causal,
                        AttentionCache *cache) {
  const Eigen::Index d = xq.cols();
  const Eigen::Index dk = d / static_cast<Eigen::Index>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix q = xq * p.wq;
  AddBias(q, p.bq);
  Matrix k = xkv * p.wk;
  AddBias(k, p.bk);
  Matrix v = xkv * p.wv;
  AddBias(v, p.bv);
  Matrix context(xq.rows(), d);
  std::vector<Matrix> probs(n_heads);
  for (size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c = static_cast<Eigen::Index>(h) * dk;
    Matrix s = scale * (q.middleCols(c, dk) * k.middleCols(c, dk).transpose());
    MaskedSoftmaxRows(s, causal);
    context.middleCols(c, dk).noalias() = s * v.middleCols(c, dk);
    probs[h] = std::move(s);
  }
  Matrix out = context * p.wo;
  AddBias(out, p.bo);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
    cache->probs = std::move(probs);
  }
  return out;
}

void AttentionBackward(const AttentionParams &p, const AttentionCache &cache,
                       const Matrix &dout, size_t n_heads, AttentionParams *grad,
                       Matrix *dxq, Matrix *dxkv) {
  const Eigen::Index d = cache.xq.cols();
  const Eigen::Index dk = d / static_cast<Eigen::Index>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  grad->wo.noalias() += cache.context.transpose() * dout;
  grad->bo.row(0) += dout.colwise().sum();
  Matrix dcontext = dout * p.wo.transpose();
  Matrix dq(cache.q.rows(), d);
  Matrix dk_all(cache.k.rows(), d);
  Matrix dv(cache.v.rows(), d);
  for (size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c = static_cast<Eigen::Index>(h) * dk;
    const Matrix &probs = cache.probs[h];
    auto dctx_h = dcontext.middleCols(c, dk);
    dv.middleCols(c, dk).noalias() = probs.transpose() * dctx_h;
    Matrix dp = dctx_h * cache.v.middleCols(c, dk).transpose();
    Matrix ds(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const double dot = dp.row(i).dot(probs.row(i));
      ds.row(i) = (probs.row(i).array() * (dp.row(i).array() - dot)).matrix();
    }
    ds *= scale;
    dq.middleCols(c, dk).noalias() = ds * cache.k.middleCols(c, dk);
    dk_all.middleCols(c, dk).noalias() =
        ds.transpose() * cache.q.middleCols(c, dk);
  }
  grad->wq.noalias() += cache.xq.transpose() * dq;
  grad->bq.row(0) += dq.colwise().sum();
  grad->wk.noalias() += cache.xkv.transpose() * dk_all;
  grad->bk.row(0) += dk_all.colwise().sum();
  grad->wv.noalias() += cache.xkv.transpose() * dv;
  grad->bv.row(0) += dv.colwise().sum();
  *dxq = dq * p.wq.transpose();
  *dxkv = dk_all * p.wk.transpose();
  dxkv->noalias() += dv * p.wv.transpose();
}

double Gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); }

double GeluGrad(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
  const double pdf =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + z * pdf;
}

struct FeedForwardCache {
  Matrix x, pre, hidden;
};

Matrix FeedForwardForward(const FeedForwardParams &p, const Matrix &x,
                          FeedForwardCache *cache) {
  Matrix pre = x * p.w1;
  AddBias(pre, p.b1);
  Matrix hidden = pre.unaryExpr(&Gelu);
  Matrix out = hidden * p.w2;
  AddBias(out, p.b2);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Matrix FeedForwardBackward(const FeedForwardParams &p,
                           const FeedForwardCache &cache, const Matrix &dout,
                           FeedForwardParams *grad) {
  grad->w2.noalias() += cache.hidden.transpose() * dout;
  grad->b2.row(0) += dout.colwise().sum();
  Matrix dpre = dout * p.w2.transpose();
  dpre.array() *= cache.pre.unaryExpr(&GeluGrad).array();
  grad->w1.noalias() += cache.x.transpose() * dpre;
  grad->b1.row(0) += dpre.colwise().sum();
  return dpre * p.w1.transpose();
}

// Inverted dropout; an empty mask means identity.
Matrix DropoutMask(Eigen::Index rows, Eigen::Index cols, double rate,
                   Rng *rng) {
  if (rng == nullptr || rate <= 0.0) return Matrix();
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->Uniform() < rate ? 0.0 : keep;
  }
  return mask;
}

void ApplyMask(Matrix &x, const Matrix &mask) {
  if (mask.size() > 0) x.array() *= mask.array();
}

Matrix Embed(const ModelParams &params, const std::vector<TokenId> &ids,
             size_t offset) {
  const Eigen::Index d = static_cast<Eigen::Index>(params.config.d_model);
  const double scale = std::sqrt(static_cast<double>(d));
  Matrix x(static_cast<Eigen::Index>(ids.size()), d);
  for (size_t t = 0; t < ids.size(); ++t) {
    x.row(static_cast<Eigen::Index>(t)) = scale * params.embedding.row(ids[t]);
  }
  PositionEncoding(x, offset);
  return x;
}

void CheckIds(const std::vector<TokenId> &ids, size_t vocab_size) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw ModelError("token id out of range: " + std::to_string(id));
    }
  }
}

// Source ids up to the first PAD; PAD must only be trailing fill.
std::vector<TokenId> ContentPrefix(const std::vector<TokenId> &row) {
  size_t n = 0;
  while (n < row.size() && row[n] != kPadId) ++n;
  for (size_t i = n; i < row.size(); ++i) {
    if (row[i] != kPadId) throw ModelError("PAD before non-PAD in source row");
  }
  if (n == 0) throw ModelError("source row has no content tokens");
  return std::vector<TokenId>(row.begin(), row.begin() + n);
}

struct EncoderLayerCache {
  LayerNormCache attn_norm;
  AttentionCache attn;
  Matrix attn_mask;
  LayerNormCache ff_norm;
  FeedForwardCache ff;
  Matrix ff_mask;
};

struct DecoderLayerCache {
  LayerNormCache self_norm;
  AttentionCache self_attn;
  Matrix self_mask;
  LayerNormCache cross_norm;
  AttentionCache cross_attn;
  Matrix cross_mask;
  LayerNormCache ff_norm;
  FeedForwardCache ff;
  Matrix ff_mask;
};

struct ExampleCache {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
  Matrix src_embed_mask;
  Matrix tgt_embed_mask;
  std::vector<EncoderLayerCache> encoder;
  LayerNormCache encoder_norm;
  Matrix memory;
  std::vector<DecoderLayerCache> decoder;
  LayerNormCache decoder_norm;
  Matrix hidden;  // decoder_norm output
};

// Teacher-forced logits for one example.
Matrix ForwardExample(const ModelParams &params, const std::vector<TokenId> &src,
                      const std::vector<TokenId> &tgt, Rng *rng,
                      ExampleCache *cache) {
  const auto &config = params.config;
  const double rate = config.dropout_rate;
  cache->src = src;
  cache->tgt = tgt;

  Matrix x = Embed(params, src, 0);
  cache->src_embed_mask = DropoutMask(x.rows(), x.cols(), rate, rng);
  ApplyMask(x, cache->src_embed_mask);
  cache->encoder.resize(params.encoder.size());
  for (size_t l = 0; l < params.encoder.size(); ++l) {
    const auto &layer = params.encoder[l];
    auto &c = cache->encoder[l];
    Matrix n = LayerNormForward(layer.attn_norm, x, &c.attn_norm);
    Matrix a = AttentionForward(layer.self_attn, n, n, config.n_heads, false,
                                &c.attn);
    c.attn_mask = DropoutMask(a.rows(), a.cols(), rate, rng);
    ApplyMask(a, c.attn_mask);
    x += a;
    n = LayerNormForward(layer.ff_norm, x, &c.ff_norm);
    Matrix f = FeedForwardForward(layer.ff, n, &c.ff);
    c.ff_mask = DropoutMask(f.rows(), f.cols(), rate, rng);
    ApplyMask(f, c.ff_mask);
    x += f;
  }
  cache->memory = LayerNormForward(params.encoder_norm, x, &cache->encoder_norm);
  const Matrix &memory = cache->memory;

  Matrix y = Embed(params, tgt, 0);
  cache->tgt_embed_mask = DropoutMask(y.rows(), y.cols(), rate, rng);
  ApplyMask(y, cache->tgt_embed_mask);
  cache->decoder.resize(params.decoder.size());
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    const auto &layer = params.decoder[l];
    auto &c = cache->decoder[l];
    Matrix n = LayerNormForward(layer.self_norm, y, &c.self_norm);
    Matrix a = AttentionForward(layer.self_attn, n, n, config.n_heads, true,
                                &c.self_attn);
    c.self_mask = DropoutMask(a.rows(), a.cols(), rate, rng);
    ApplyMask(a, c.self_mask);
    y += a;
    n = LayerNormForward(layer.cross_norm, y, &c.cross_norm);
    a = AttentionForward(layer.cross_attn, n, memory, config.n_heads, false,
                         &c.cross_attn);
    c.cross_mask = DropoutMask(a.rows(), a.cols(), rate, rng);
    ApplyMask(a, c.cross_mask);
    y += a;
    n = LayerNormForward(layer.ff_norm, y, &c.ff_norm);
    Matrix f = FeedForwardForward(layer.ff, n, &c.ff);
    c.ff_mask = DropoutMask(f.rows(), f.cols(), rate, rng);
    ApplyMask(f, c.ff_mask);
    y += f;
  }
  cache->hidden = LayerNormForward(params.decoder_norm, y, &cache->decoder_norm);
  return cache->hidden * params.embedding.transpose();
}

void BackwardExample(const ModelParams &params, const ExampleCache &cache,
                     const Matrix &dlogits, ModelParams *grads) {
  const auto &config = params.config;
  const double scale = std::sqrt(static_cast<double>(config.d_model));

  grads->embedding.noalias() += dlogits.transpose() * cache.hidden;
  Matrix dy = LayerNormBackward(params.decoder_norm, cache.decoder_norm,
                                dlogits * params.embedding, &grads->decoder_norm);
  Matrix dmemory = Matrix::Zero(cache.memory.rows(), cache.memory.cols());
  for (size_t l = params.decoder.size(); l-- > 0;) {
    const auto &layer = params.decoder[l];
    const auto &c = cache.decoder[l];
    auto &g = grads->decoder[l];

    Matrix df = dy;
    ApplyMask(df, c.ff_mask);
    Matrix dn = FeedForwardBackward(layer.ff, c.ff, df, &g.ff);
    dy += LayerNormBackward(layer.ff_norm, c.ff_norm, dn, &g.ff_norm);

    Matrix da = dy;
    ApplyMask(da, c.cross_mask);
    Matrix dq, dkv;
    AttentionBackward(layer.cross_attn, c.cross_attn, da, config.n_heads,
                      &g.cross_attn, &dq, &dkv);
    dmemory += dkv;
    dy += LayerNormBackward(layer.cross_norm, c.cross_norm, dq, &g.cross_norm);

    da = dy;
    ApplyMask(da, c.self_mask);
    AttentionBackward(layer.self_attn, c.self_attn, da, config.n_heads,
                      &g.self_attn, &dq, &dkv);
    dq += dkv;
    dy += LayerNormBackward(layer.self_norm, c.self_norm, dq, &g.self_norm);
  }
  ApplyMask(dy, cache.tgt_embed_mask);
  for (size_t t = 0; t < cache.tgt.size(); ++t) {
    grads->embedding.row(cache.tgt[t]) += scale * dy.row(static_cast<Eigen::Index>(t));
  }

  Matrix dx = LayerNormBackward(params.encoder_norm, cache.encoder_norm, dmemory,
                                &grads->encoder_norm);
  for (size_t l = params.encoder.size(); l-- > 0;) {
    const auto &layer = params.encoder[l];
    const auto &c = cache.encoder[l];
    auto &g = grads->encoder[l];

    Matrix df = dx;
    ApplyMask(df, c.ff_mask);
    Matrix dn = FeedForwardBackward(layer.ff, c.ff, df, &g.ff);
    dx += LayerNormBackward(layer.ff_norm, c.ff_norm, dn, &g.ff_norm);

    Matrix da = dx;
    ApplyMask(da, c.attn_mask);
    Matrix dq, dkv;
    AttentionBackward(layer.self_attn, c.attn, da, config.n_heads, &g.self_attn,
                      &dq, &dkv);
    dq += dkv;
    dx += LayerNormBackward(layer.attn_norm, c.attn_norm, dq, &g.attn_norm);
  }
  ApplyMask(dx, cache.src_embed_mask);
  for (size_t t = 0; t < cache.src.size(); ++t) {
    grads->embedding.row(cache.src[t]) += scale * dx.row(static_cast<Eigen::Index>(t));
  }
}

void CheckBatchShapes(const ModelParams &params, const Batch &src,
                      const Batch &tgt) {
  if (src.batch_size() != tgt.batch_size()) {
    throw ModelError("batch size mismatch between source and target");
  }
  if (src.batch_size() == 0) throw ModelError("empty batch");
  for (const Batch *b : {&src, &tgt}) {
    for (const auto &row : b->rows) {
      if (row.size() != b->length()) throw ModelError("ragged batch");
      CheckIds(row, params.config.vocab_size);
    }
  }
  if (src.length() > params.config.max_len ||
      tgt.length() > params.config.max_len) {
    throw ModelError("sequence longer than max_len");
  }
  if (tgt.length() == 0) throw ModelError("empty target rows");
}

size_t CountTargets(const Batch &tgt_out) {
  size_t count = 0;
  for (const auto &row : tgt_out.rows) {
    for (TokenId id : row) count += id != kPadId;
  }
  return count;
}

}  // namespace

Matrix LogSoftmaxRows(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    const double lse =
        max + std::log((logits.row(i).array() - max).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Logits Forward(const ModelParams &params, const Batch &src, const Batch &tgt_in,
               const ForwardOptions &options) {
  CheckBatchShapes(params, src, tgt_in);
  Logits logits;
  logits.reserve(src.batch_size());
  for (size_t b = 0; b < src.batch_size(); ++b) {
    ExampleCache cache;
    logits.push_back(ForwardExample(params, ContentPrefix(src.rows[b]),
                                    tgt_in.rows[b], options.dropout_rng,
                                    &cache));
  }
  return logits;
}

double NllLoss(const Logits &logits, const Batch &tgt_out) {
  if (logits.size() != tgt_out.batch_size()) {
    throw ModelError("NllLoss: batch size mismatch");
  }
  double total = 0.0;
  size_t count = 0;
  for (size_t b = 0; b < logits.size(); ++b) {
    const auto &row = tgt_out.rows[b];
    if (static_cast<size_t>(logits[b].rows()) != row.size()) {
      throw ModelError("NllLoss: target length mismatch");
    }
    Matrix logp = LogSoftmaxRows(logits[b]);
    for (size_t t = 0; t < row.size(); ++t) {
      if (row[t] == kPadId) continue;
      if (row[t] < 0 || row[t] >= logp.cols()) {
        throw ModelError("NllLoss: target id out of range");
      }
      total -= logp(static_cast<Eigen::Index>(t), row[t]);
      ++count;
    }
  }
  if (count == 0) throw ModelError("NllLoss: all target positions are PAD");
  return total / static_cast<double>(count);
}

double AccumulateGradients(const ModelParams &params, const Seq2SeqBatch &batch,
                           double scale, ModelParams *grads,
                           const ForwardOptions &options) {
  CheckBatchShapes(params, batch.src, batch.tgt_in);
  if (batch.tgt_out.batch_size() != batch.tgt_in.batch_size() ||
      batch.tgt_out.length() != batch.tgt_in.length()) {
    throw ModelError("tgt_in / tgt_out shape mismatch");
  }
  const size_t count = CountTargets(batch.tgt_out);
  if (count == 0) throw ModelError("all target positions are PAD");
  const double inv_count = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (size_t b = 0; b < batch.src.batch_size(); ++b) {
    ExampleCache cache;
    Matrix logits = ForwardExample(params, ContentPrefix(batch.src.rows[b]),
                                   batch.tgt_in.rows[b], options.dropout_rng,
                                   &cache);
    Matrix dlogits = LogSoftmaxRows(logits);
    const auto &target = batch.tgt_out.rows[b];
    for (Eigen::Index t = 0; t < dlogits.rows(); ++t) {
      const TokenId id = target[t];
      if (id == kPadId) {
        dlogits.row(t).setZero();
        continue;
      }
      CheckIds({id}, params.config.vocab_size);
      total -= dlogits(t, id);
      dlogits.row(t) = dlogits.row(t).array().exp();
      dlogits(t, id) -= 1.0;
      dlogits.row(t) *= scale * inv_count;
    }
    BackwardExample(params, cache, dlogits, grads);
  }
  return total * inv_count;
}

LossAndGradients Backward(const ModelParams &params, const Batch &src,
                          const Batch &tgt_in, const Batch &tgt_out,
                          const ForwardOptions &options) {
  LossAndGradients result;
  result.gradients = ModelParams::Zeros(params.config);
  result.loss = AccumulateGradients(params, {src, tgt_in, tgt_out}, 1.0,
                                    &result.gradients, options);
  return result;
}

double EvaluateLoss(const ModelParams &params, const Seq2SeqBatch &batch) {
  return NllLoss(Forward(params, batch.src, batch.tgt_in), batch.tgt_out);
}

// ---------------------------------------------------------------------------
// Incremental decoding.

IncrementalDecoder::IncrementalDecoder(const ModelParams &params,
                                       const std::vector<TokenId> &src,
                                       size_t capacity)
    : params_(params), capacity_(capacity) {
  CheckIds(src, params.config.vocab_size);
  const std::vector<TokenId> content = ContentPrefix(src);
  if (content.size() > params.config.max_len) {
    throw ModelError("source longer than max_len");
  }
  // Encoder pass without dropout.
  Matrix x = Embed(params, content, 0);
  for (const auto &layer : params.encoder) {
    Matrix n = LayerNormForward(layer.attn_norm, x, nullptr);
    x += AttentionForward(layer.self_attn, n, n, params.config.n_heads, false,
                          nullptr);
    n = LayerNormForward(layer.ff_norm, x, nullptr);
    x += FeedForwardForward(layer.ff, n, nullptr);
  }
  Matrix memory = LayerNormForward(params.encoder_norm, x, nullptr);
  for (const auto &layer : params.decoder) {
    Matrix k = memory * layer.cross_attn.wk;
    AddBias(k, layer.cross_attn.bk);
    Matrix v = memory * layer.cross_attn.wv;
    AddBias(v, layer.cross_attn.bv);
    cross_keys_.push_back(std::move(k));
    cross_values_.push_back(std::move(v));
  }
}

IncrementalDecoder::State IncrementalDecoder::Start() const {
  State state;
  const Eigen::Index d = static_cast<Eigen::Index>(params_.config.d_model);
  for (size_t l = 0; l < params_.decoder.size(); ++l) {
    state.keys.push_back(Matrix::Zero(static_cast<Eigen::Index>(capacity_), d));
    state.values.push_back(Matrix::Zero(static_cast<Eigen::Index>(capacity_), d));
  }
  return state;
}

namespace {

// Single-query attention over the first n rows of keys/values.
RowVector AttendOne(const RowVector &q, const Matrix &keys, const Matrix &values,
                    Eigen::Index n, size_t n_heads) {
  const Eigen::Index d = q.cols();
  const Eigen::Index dk = d / static_cast<Eigen::Index>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  RowVector context(d);
  for (size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c = static_cast<Eigen::Index>(h) * dk;
    Eigen::VectorXd s =
        scale * (keys.topRows(n).middleCols(c, dk) * q.middleCols(c, dk).transpose());
    const double max = s.maxCoeff();
    s = (s.array() - max).exp().matrix();
    s /= s.sum();
    context.middleCols(c, dk) = s.transpose() * values.topRows(n).middleCols(c, dk);
  }
  return context;
}

}  // namespace

RowVector IncrementalDecoder::Step(State *state, TokenId token) const {
  if (state->length >= capacity_) throw ModelError("decoder capacity exceeded");
  CheckIds({token}, params_.config.vocab_size);
  const size_t n_heads = params_.config.n_heads;
  Matrix y = Embed(params_, {token}, state->length);
  const Eigen::Index pos = static_cast<Eigen::Index>(state->length);
  for (size_t l = 0; l < params_.decoder.size(); ++l) {
    const auto &layer = params_.decoder[l];
    Matrix n = LayerNormForward(layer.self_norm, y, nullptr);
    RowVector q = n * layer.self_attn.wq + layer.self_attn.bq;
    state->keys[l].row(pos) = n * layer.self_attn.wk + layer.self_attn.bk;
    state->values[l].row(pos) = n * layer.self_attn.wv + layer.self_attn.bv;
    RowVector context =
        AttendOne(q, state->keys[l], state->values[l], pos + 1, n_heads);
    y += context * layer.self_attn.wo + layer.self_attn.bo;

    n = LayerNormForward(layer.cross_norm, y, nullptr);
    q = n * layer.cross_attn.wq + layer.cross_attn.bq;
    context = AttendOne(q, cross_keys_[l], cross_values_[l],
                        cross_keys_[l].rows(), n_heads);
    y += context * layer.cross_attn.wo + layer.cross_attn.bo;

    n = LayerNormForward(layer.ff_norm, y, nullptr);
    y += FeedForwardForward(layer.ff, n, nullptr);
  }
  ++state->length;
  Matrix h = LayerNormForward(params_.decoder_norm, y, nullptr);
  return h * params_.embedding.transpose();
}

}  // namespace kgcycle
