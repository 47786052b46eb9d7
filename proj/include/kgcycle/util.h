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

#ifndef KGCYCLE_UTIL_H_
#define KGCYCLE_UTIL_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kgcycle {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Random source with platform-independent derived distributions. The
// standard distributions are implementation-defined, so uniform and normal
// variates are derived here from the raw mt19937_64 stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be positive.
  uint64_t UniformInt(uint64_t bound);

  // Uniform double in [0, 1) with 53 bits of mantissa.
  double Uniform();

  // Standard normal variate (Box-Muller, one value per call).
  double Normal();

  // Fisher-Yates shuffle.
  template <typename T>
  void Shuffle(std::vector<T> &items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = UniformInt(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Mixes a base seed with stream identifiers into an independent seed.
uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b = 0);

// Hex-encoded SHA-256 digest.
std::string Sha256Hex(std::string_view data);
std::string Sha256HexOfFile(const std::string &path);

std::string ReadFile(const std::string &path);
void WriteFile(const std::string &path, std::string_view contents);
std::vector<std::string> ReadLines(const std::string &path);
void WriteLines(const std::string &path, const std::vector<std::string> &lines);

// String helpers.
std::string Trim(std::string_view s);
std::string CollapseWhitespace(std::string_view s);
std::string AsciiLower(std::string_view s);
std::vector<std::string> SplitWhitespace(std::string_view s);
std::vector<std::string> Split(std::string_view s, char sep);
std::string Join(const std::vector<std::string> &parts, std::string_view sep);
bool IsBlank(std::string_view s);

// Case-folded, whitespace-collapsed, trimmed form used for matching and
// deduplication.
std::string NormalizeForMatch(std::string_view s);

}  // namespace kgcycle

#endif  // KGCYCLE_UTIL_H_
