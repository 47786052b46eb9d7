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

#include "kgcycle/tokenizer.h"

#include <algorithm>
#include <map>

#include "kgcycle/graph_codec.h"

namespace kgcycle {

TokenSequence::TokenSequence(std::vector<TokenId> ids) : ids_(std::move(ids)) {
  size_t content_end = ids_.size();
  while (content_end > 0 && ids_[content_end - 1] == kPadId) --content_end;
  for (size_t i = 0; i < content_end; ++i) {
    if (ids_[i] == kPadId) {
      throw TokenizerError("PAD before non-PAD token at position " +
                           std::to_string(i));
    }
    if (ids_[i] == kEosId && i + 1 != content_end) {
      throw TokenizerError("EOS before the final position at " +
                           std::to_string(i));
    }
  }
}

const std::vector<std::string> &ReservedPieces() {
  static const std::vector<std::string> kReserved = {
      "<pad>",
      "<s>",
      "</s>",
      "<unk>",
      std::string(kSubjectMarker),
      std::string(kPredicateMarker),
      std::string(kObjectMarker),
      std::string(kGenerateText.surface),
      std::string(kGenerateGraph.surface)};
  return kReserved;
}

Vocabulary::Vocabulary(std::vector<std::string> id_to_piece)
    : id_to_piece_(std::move(id_to_piece)) {
  const auto &reserved = ReservedPieces();
  if (id_to_piece_.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), id_to_piece_.begin())) {
    throw TokenizerError("vocabulary must start with the reserved pieces");
  }
  for (size_t i = 0; i < id_to_piece_.size(); ++i) {
    const auto &piece = id_to_piece_[i];
    if (piece.empty() || piece.find('\n') != std::string::npos) {
      throw TokenizerError("invalid vocabulary piece at id " +
                           std::to_string(i));
    }
    if (!piece_to_id_.emplace(piece, static_cast<TokenId>(i)).second) {
      throw TokenizerError("duplicate vocabulary piece: " + piece);
    }
  }
}

const std::string &Vocabulary::Piece(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_piece_.size()) {
    throw TokenizerError("token id out of range: " + std::to_string(id));
  }
  return id_to_piece_[id];
}

TokenId Vocabulary::Id(std::string_view piece) const {
  auto it = piece_to_id_.find(std::string(piece));
  return it == piece_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::Contains(std::string_view piece) const {
  return piece_to_id_.count(std::string(piece)) > 0;
}

std::string Vocabulary::Serialize() const {
  std::string out;
  for (const auto &piece : id_to_piece_) {
    out += piece;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::Deserialize(std::string_view text) {
  std::vector<std::string> pieces = Split(text, '\n');
  if (!pieces.empty() && pieces.back().empty()) pieces.pop_back();
  return Vocabulary(std::move(pieces));
}

void Vocabulary::Save(const std::string &path) const {
  WriteFile(path, Serialize());
}

Vocabulary Vocabulary::Load(const std::string &path) {
  return Deserialize(ReadFile(path));
}

std::string Vocabulary::Hash() const { return Sha256Hex(Serialize()); }

std::vector<std::string> SplitPieces(std::string_view s) {
  std::vector<std::string> words = SplitWhitespace(s);
  std::vector<std::string> pieces;
  pieces.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "generate" && i + 1 < words.size() &&
        (words[i + 1] == "text:" || words[i + 1] == "graph:")) {
      pieces.push_back(words[i] + " " + words[i + 1]);
      ++i;
    } else {
      pieces.push_back(std::move(words[i]));
    }
  }
  return pieces;
}

Vocabulary BuildVocab(const std::vector<std::string> &corpus,
                      size_t max_size) {
  if (corpus.empty()) throw TokenizerError("cannot build vocab: empty corpus");
  if (max_size < 8) throw TokenizerError("vocab max_size must be >= 8");
  const auto &reserved = ReservedPieces();
  std::map<std::string, size_t> counts;
  for (const auto &line : corpus) {
    for (auto &piece : SplitPieces(line)) ++counts[piece];
  }
  std::vector<std::pair<std::string, size_t>> ranked;
  for (auto &[piece, count] : counts) {
    if (std::find(reserved.begin(), reserved.end(), piece) != reserved.end()) {
      continue;
    }
    ranked.emplace_back(piece, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> pieces = reserved;
  for (auto &[piece, count] : ranked) pieces.push_back(piece);
  return Vocabulary(std::move(pieces));
}

TokenSequence Encode(const Vocabulary &vocab, std::string_view s,
                     size_t max_len) {
  if (max_len < 2) throw TokenizerError("encode: max_len must be >= 2");
  std::vector<TokenId> ids;
  for (const auto &piece : SplitPieces(s)) ids.push_back(vocab.Id(piece));
  if (ids.size() > max_len - 1) ids.resize(max_len - 1);
  ids.push_back(kEosId);
  return TokenSequence(std::move(ids));
}

std::string Decode(const Vocabulary &vocab, const TokenSequence &tokens) {
  std::string out;
  for (TokenId id : tokens.ids()) {
    const std::string &piece = vocab.Piece(id);
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (!out.empty()) out += ' ';
    out += piece;
  }
  return out;
}

std::string Decode(const Vocabulary &vocab, const std::vector<TokenId> &ids) {
  return Decode(vocab, TokenSequence(ids));
}

}  // namespace kgcycle
