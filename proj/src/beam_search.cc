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

#include "kgcycle/beam_search.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace kgcycle {

void DecodeConfig::Validate() const {
  if (beam_width < 1) throw ModelError("decode config: beam_width must be >= 1");
  if (max_new_tokens < 1) {
    throw ModelError("decode config: max_new_tokens must be >= 1");
  }
  if (!(repetition_penalty > 0.0) || !(length_penalty > 0.0)) {
    throw ModelError("decode config: penalties must be > 0");
  }
}

bool IsBlockedOutputId(TokenId id) {
  // Reserved ids 7 and 8 are the task-token surfaces.
  return id == kPadId || id == kBosId || id == 7 || id == 8;
}

void ApplyRepetitionPenalty(RowVector &logits,
                            const std::vector<TokenId> &history,
                            double penalty) {
  if (penalty == 1.0) return;
  std::unordered_set<TokenId> seen(history.begin(), history.end());
  for (TokenId id : seen) {
    double &logit = logits(id);
    logit = logit > 0.0 ? logit / penalty : logit * penalty;
  }
}

namespace {

struct Hypothesis {
  std::vector<TokenId> tokens;
  double logprob = 0.0;
  IncrementalDecoder::State state;
  RowVector next_logits;
};

struct Candidate {
  size_t beam;
  TokenId token;
  double logprob;
  size_t order;
};

struct Finished {
  std::vector<TokenId> tokens;
  double score;
};

double NormalizedScore(double logprob, size_t length, double length_penalty) {
  return logprob / std::pow(static_cast<double>(length), length_penalty);
}

}  // namespace

TokenSequence Generate(const ModelParams &params, const TokenSequence &src,
                       const DecodeConfig &config) {
  config.Validate();
  IncrementalDecoder decoder(params, src.ids(), config.max_new_tokens);
  const size_t vocab = params.config.vocab_size;
  const double neg_inf = -std::numeric_limits<double>::infinity();

  std::vector<Hypothesis> live(1);
  live[0].state = decoder.Start();
  live[0].next_logits = decoder.Step(&live[0].state, kBosId);
  std::vector<Finished> finished;

  for (size_t step = 0; step < config.max_new_tokens; ++step) {
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * vocab);
    for (size_t b = 0; b < live.size(); ++b) {
      RowVector logits = live[b].next_logits;
      ApplyRepetitionPenalty(logits, live[b].tokens, config.repetition_penalty);
      for (size_t v = 0; v < vocab; ++v) {
        if (IsBlockedOutputId(static_cast<TokenId>(v))) logits(v) = neg_inf;
      }
      const double max = logits.maxCoeff();
      const double lse = max + std::log((logits.array() - max).exp().sum());
      for (size_t v = 0; v < vocab; ++v) {
        if (logits(v) == neg_inf) continue;
        candidates.push_back({b, static_cast<TokenId>(v),
                              live[b].logprob + logits(v) - lse,
                              candidates.size()});
      }
    }
    const size_t keep = std::min(candidates.size(), 2 * config.beam_width);
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(),
                      [](const Candidate &a, const Candidate &b) {
                        if (a.logprob != b.logprob) return a.logprob > b.logprob;
                        return a.order < b.order;
                      });

    std::vector<Hypothesis> next;
    for (size_t rank = 0; rank < keep && next.size() < config.beam_width;
         ++rank) {
      const Candidate &c = candidates[rank];
      std::vector<TokenId> tokens = live[c.beam].tokens;
      tokens.push_back(c.token);
      if (c.token == kEosId) {
        if (rank >= config.beam_width) continue;
        finished.push_back(
            {tokens, NormalizedScore(c.logprob, tokens.size(),
                                     config.length_penalty)});
        std::stable_sort(finished.begin(), finished.end(),
                         [](const Finished &a, const Finished &b) {
                           return a.score > b.score;
                         });
        if (finished.size() > config.beam_width) finished.pop_back();
        continue;
      }
      Hypothesis h;
      h.tokens = std::move(tokens);
      h.logprob = c.logprob;
      h.state = live[c.beam].state;
      next.push_back(std::move(h));
    }

    if (finished.size() >= config.beam_width) {
      if (config.early_stopping || next.empty()) break;
      const double best_live =
          NormalizedScore(next.front().logprob, next.front().tokens.size(),
                          config.length_penalty);
      if (finished.back().score >= best_live) break;
    }
    if (next.empty()) break;
    if (step + 1 < config.max_new_tokens) {
      for (auto &h : next) h.next_logits = decoder.Step(&h.state, h.tokens.back());
    }
    live = std::move(next);
  }

  if (!finished.empty()) return TokenSequence(finished.front().tokens);
  const Hypothesis *best = nullptr;
  double best_score = neg_inf;
  for (const auto &h : live) {
    const double score =
        NormalizedScore(h.logprob, h.tokens.size(), config.length_penalty);
    if (best == nullptr || score > best_score) {
      best = &h;
      best_score = score;
    }
  }
  return TokenSequence(best->tokens);
}

}  // namespace kgcycle
