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

#include "kgcycle/checkpoint.h"

#include <bit>
#include <cstring>

#include "json.hpp"

namespace kgcycle {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'C', 'Y', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void AppendRaw(std::string &out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T ReadRaw(const std::string &in, size_t &offset) {
  if (offset + sizeof(T) > in.size()) throw ModelError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

nlohmann::json ConfigToJson(const ModelConfig &c) {
  return {{"d_model", c.d_model},           {"n_heads", c.n_heads},
          {"n_layers_enc", c.n_layers_enc}, {"n_layers_dec", c.n_layers_dec},
          {"d_ff", c.d_ff},                 {"vocab_size", c.vocab_size},
          {"max_len", c.max_len},           {"dropout_rate", c.dropout_rate}};
}

ModelConfig ConfigFromJson(const nlohmann::json &j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<size_t>();
  c.n_heads = j.at("n_heads").get<size_t>();
  c.n_layers_enc = j.at("n_layers_enc").get<size_t>();
  c.n_layers_dec = j.at("n_layers_dec").get<size_t>();
  c.d_ff = j.at("d_ff").get<size_t>();
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.max_len = j.at("max_len").get<size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

}  // namespace

std::string SerializeCheckpoint(const ModelParams &params,
                                const std::string &vocab_hash) {
  nlohmann::json header;
  header["config"] = ConfigToJson(params.config);
  header["vocab_hash"] = vocab_hash;
  header["tensors"] = nlohmann::json::array();
  params.ForEachTensor([&](const std::string &name, const Matrix &t) {
    header["tensors"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  AppendRaw<uint32_t>(out, kCheckpointVersion);
  AppendRaw<uint64_t>(out, header_text.size());
  out += header_text;
  params.ForEachTensor([&](const std::string &, const Matrix &t) {
    out.append(reinterpret_cast<const char *>(t.data()),
               static_cast<size_t>(t.size()) * sizeof(double));
  });
  return out;
}

Checkpoint DeserializeCheckpoint(const std::string &bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ModelError("not a checkpoint file (bad magic)");
  }
  size_t offset = sizeof(kMagic);
  const auto version = ReadRaw<uint32_t>(bytes, offset);
  if (version != kCheckpointVersion) {
    throw ModelError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_size = ReadRaw<uint64_t>(bytes, offset);
  if (offset + header_size > bytes.size()) throw ModelError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(offset, header_size));
  } catch (const nlohmann::json::exception &e) {
    throw ModelError(std::string("checkpoint header: ") + e.what());
  }
  offset += header_size;

  Checkpoint checkpoint;
  checkpoint.vocab_hash = header.at("vocab_hash").get<std::string>();
  checkpoint.params = ModelParams::Zeros(ConfigFromJson(header.at("config")));
  const auto &table = header.at("tensors");
  size_t index = 0;
  checkpoint.params.ForEachTensor([&](const std::string &name, Matrix &t) {
    if (index >= table.size()) throw ModelError("checkpoint missing tensors");
    const auto &entry = table[index++];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("rows").get<Eigen::Index>() != t.rows() ||
        entry.at("cols").get<Eigen::Index>() != t.cols()) {
      throw ModelError("checkpoint tensor table mismatch at " + name);
    }
    const size_t n = static_cast<size_t>(t.size()) * sizeof(double);
    if (offset + n > bytes.size()) throw ModelError("checkpoint truncated");
    std::memcpy(t.data(), bytes.data() + offset, n);
    offset += n;
  });
  if (index != table.size() || offset != bytes.size()) {
    throw ModelError("checkpoint has trailing data");
  }
  return checkpoint;
}

void SaveCheckpoint(const std::string &path, const ModelParams &params,
                    const std::string &vocab_hash) {
  WriteFile(path, SerializeCheckpoint(params, vocab_hash));
}

Checkpoint LoadCheckpoint(const std::string &path) {
  return DeserializeCheckpoint(ReadFile(path));
}

}  // namespace kgcycle
