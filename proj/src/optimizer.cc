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

#include "kgcycle/optimizer.h"

#include <cmath>
#include <vector>

namespace kgcycle {
namespace {

std::vector<Matrix *> Tensors(ModelParams &p) {
  std::vector<Matrix *> out;
  p.ForEachTensor([&](const std::string &, Matrix &t) { out.push_back(&t); });
  return out;
}

std::vector<const Matrix *> Tensors(const ModelParams &p) {
  std::vector<const Matrix *> out;
  p.ForEachTensor([&](const std::string &, const Matrix &t) { out.push_back(&t); });
  return out;
}

void CheckFinite(const ModelParams &params, size_t step) {
  if (!params.AllFinite()) {
    throw ModelError("non-finite parameter after optimizer step " +
                     std::to_string(step));
  }
}

}  // namespace

std::string_view OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

std::optional<OptimizerKind> ParseOptimizerKind(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  return std::nullopt;
}

void SgdOptimizer::Step(ModelParams *params, const ModelParams &grads) {
  params->AddScaled(grads, -lr_);
  ++steps_;
  CheckFinite(*params, steps_);
}

void AdamOptimizer::Step(ModelParams *params, const ModelParams &grads) {
  if (!m_) {
    m_ = ModelParams::Zeros(params->config);
    v_ = ModelParams::Zeros(params->config);
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  auto p = Tensors(*params);
  auto g = Tensors(grads);
  auto m = Tensors(*m_);
  auto v = Tensors(*v_);
  if (g.size() != p.size()) throw ModelError("gradient/parameter layout mismatch");
  for (size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = beta1_ * m[i]->array() + (1.0 - beta1_) * g[i]->array();
    v[i]->array() = beta2_ * v[i]->array() + (1.0 - beta2_) * g[i]->array().square();
    p[i]->array() -=
        lr_ * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + epsilon_);
  }
  CheckFinite(*params, steps_);
}

std::unique_ptr<Optimizer> MakeOptimizer(OptimizerKind kind, double lr) {
  if (!(lr > 0.0)) throw ModelError("learning rate must be positive");
  if (kind == OptimizerKind::kAdam) return std::make_unique<AdamOptimizer>(lr);
  return std::make_unique<SgdOptimizer>(lr);
}

}  // namespace kgcycle
