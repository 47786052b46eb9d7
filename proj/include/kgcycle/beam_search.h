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

#ifndef KGCYCLE_BEAM_SEARCH_H_
#define KGCYCLE_BEAM_SEARCH_H_

#include <vector>

#include "kgcycle/model.h"
#include "kgcycle/tokenizer.h"

namespace kgcycle {

struct DecodeConfig {
  size_t beam_width = 4;
  size_t max_new_tokens = 64;
  double repetition_penalty = 2.5;
  double length_penalty = 1.0;
  bool early_stopping = true;

  void Validate() const;
  bool operator==(const DecodeConfig &) const = default;
};

// Ids the decoder may never emit: PAD, BOS and both task tokens.
bool IsBlockedOutputId(TokenId id);

// Applies the repetition penalty in place: a logit of a token already in
// `history` is divided by the penalty when positive and multiplied by it
// otherwise.
void ApplyRepetitionPenalty(RowVector &logits,
                            const std::vector<TokenId> &history,
                            double penalty);

// Beam search. Hypotheses are expanded in beam order then token order and
// ranked with a stable sort, so on equal scores the first expanded wins.
// Finished hypotheses are ranked by sum(log p) / len^length_penalty, where
// len counts generated ids including EOS. Returns the generated ids without
// BOS; the sequence ends in EOS unless max_new_tokens was reached first.
TokenSequence Generate(const ModelParams &params, const TokenSequence &src,
                       const DecodeConfig &config);

}  // namespace kgcycle

#endif  // KGCYCLE_BEAM_SEARCH_H_
