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

// First-order update rules over ModelParams.

#ifndef KGCYCLE_OPTIMIZER_H_
#define KGCYCLE_OPTIMIZER_H_

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "kgcycle/model.h"

namespace kgcycle {

enum class OptimizerKind { kSgd, kAdam };

std::string_view OptimizerName(OptimizerKind kind);
std::optional<OptimizerKind> ParseOptimizerKind(std::string_view name);

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  // Applies one update from `grads`. Throws ModelError if any parameter
  // becomes non-finite.
  virtual void Step(ModelParams *params, const ModelParams &grads) = 0;

  size_t steps() const { return steps_; }

 protected:
  size_t steps_ = 0;
};

// params -= lr * grads.
class SgdOptimizer : public Optimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void Step(ModelParams *params, const ModelParams &grads) override;

 private:
  double lr_;
};

// Adam with bias correction.
class AdamOptimizer : public Optimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  void Step(ModelParams *params, const ModelParams &grads) override;

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::optional<ModelParams> m_;
  std::optional<ModelParams> v_;
};

std::unique_ptr<Optimizer> MakeOptimizer(OptimizerKind kind, double lr);

}  // namespace kgcycle

#endif  // KGCYCLE_OPTIMIZER_H_
