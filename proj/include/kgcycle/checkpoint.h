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

// Checkpoint container:
//
//   bytes 0-7   magic "KGCYCKPT"
//   bytes 8-11  format version (uint32, little endian)
//   bytes 12-19 header length N (uint64, little endian)
//   N bytes     JSON header: model config, vocabulary hash and the ordered
//               tensor table (name, rows, cols)
//   rest        tensor data as little-endian IEEE-754 doubles, row major,
//               in table order

#ifndef KGCYCLE_CHECKPOINT_H_
#define KGCYCLE_CHECKPOINT_H_

#include <string>

#include "kgcycle/model.h"

namespace kgcycle {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::string vocab_hash;
};

std::string SerializeCheckpoint(const ModelParams &params,
                                const std::string &vocab_hash);
Checkpoint DeserializeCheckpoint(const std::string &bytes);

void SaveCheckpoint(const std::string &path, const ModelParams &params,
                    const std::string &vocab_hash);
Checkpoint LoadCheckpoint(const std::string &path);

}  // namespace kgcycle

#endif  // KGCYCLE_CHECKPOINT_H_
