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

// Word-level vocabulary. Ids 0-3 are PAD, BOS, EOS and UNK; ids 4-8 are the
// three graph delimiters and the two task-token surfaces, which always
// encode to a single id each even though the surfaces contain a space.

#ifndef KGCYCLE_TOKENIZER_H_
#define KGCYCLE_TOKENIZER_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgcycle/util.h"

namespace kgcycle {

class TokenizerError : public Error {
 public:
  using Error::Error;
};

using TokenId = int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr size_t kNumReserved = 9;
inline constexpr size_t kDefaultMaxLen = 64;

// Token ids with at most one EOS (final) and PAD only as trailing fill.
class TokenSequence {
 public:
  TokenSequence() = default;
  // Throws TokenizerError if the EOS/PAD invariants are violated.
  explicit TokenSequence(std::vector<TokenId> ids);

  const std::vector<TokenId> &ids() const { return ids_; }
  size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool operator==(const TokenSequence &) const = default;

 private:
  std::vector<TokenId> ids_;
};

class Vocabulary {
 public:
  // Builds from the full id-ordered piece list; the first kNumReserved
  // pieces must be the reserved entries.
  explicit Vocabulary(std::vector<std::string> id_to_piece);

  size_t size() const { return id_to_piece_.size(); }
  const std::string &Piece(TokenId id) const;
  // kUnkId when absent.
  TokenId Id(std::string_view piece) const;
  bool Contains(std::string_view piece) const;
  const std::vector<std::string> &pieces() const { return id_to_piece_; }

  // Line-per-piece text form; line number is the id.
  std::string Serialize() const;
  static Vocabulary Deserialize(std::string_view text);
  void Save(const std::string &path) const;
  static Vocabulary Load(const std::string &path);

  // SHA-256 of the serialized form.
  std::string Hash() const;

  bool operator==(const Vocabulary &other) const {
    return id_to_piece_ == other.id_to_piece_;
  }

 private:
  std::vector<std::string> id_to_piece_;
  std::unordered_map<std::string, TokenId> piece_to_id_;
};

// The nine reserved pieces in id order.
const std::vector<std::string> &ReservedPieces();

// Splits on whitespace, keeping the task-token surfaces as single pieces.
std::vector<std::string> SplitPieces(std::string_view s);

// Counts pieces over the corpus and keeps the max_size most frequent ones
// (ties broken lexicographically) in addition to the reserved entries.
Vocabulary BuildVocab(const std::vector<std::string> &corpus, size_t max_size);

// Maps pieces to ids (UNK when unknown), appends EOS, and truncates to
// max_len keeping EOS as the last id.
TokenSequence Encode(const Vocabulary &vocab, std::string_view s,
                     size_t max_len = kDefaultMaxLen);

// Joins pieces with single spaces; PAD, BOS and EOS are dropped.
std::string Decode(const Vocabulary &vocab, const TokenSequence &tokens);
std::string Decode(const Vocabulary &vocab, const std::vector<TokenId> &ids);

}  // namespace kgcycle

#endif  // KGCYCLE_TOKENIZER_H_
