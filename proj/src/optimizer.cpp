// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "robustprune/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "robustprune/errors.hpp"

namespace robustprune {

double cosine_learning_rate(double base_lr, std::size_t total_steps, std::size_t step) {
  if (total_steps == 0) throw ConfigError("cosine schedule needs total_steps > 0");
  if (step > total_steps) {
    throw ConfigError("cosine schedule evaluated at step " + std::to_string(step) + " > " +
                      std::to_string(total_steps));
  }
  // Endpoints are pinned so lr(0) == base_lr and lr(T) == 0 hold exactly.
  if (step == 0) return base_lr;
  if (step == total_steps) return 0.0;
  const double phase =
      std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(phase));
}

CosineSgd::CosineSgd(double base_lr, std::size_t total_steps, double momentum, double weight_decay)
    : base_lr_(base_lr), momentum_(momentum), weight_decay_(weight_decay), total_steps_(total_steps) {
  if (total_steps == 0) throw ConfigError("optimizer needs total_steps > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(base_lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

void CosineSgd::step(std::span<Tensor* const> params) {
  if (current_step_ >= total_steps_) {
    throw ConfigError("optimizer stepped past total_steps=" + std::to_string(total_steps_));
  }
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Tensor* p : params) velocity_.emplace_back(p->numel(), 0.0);
  }
  if (velocity_.size() != params.size()) {
    throw ConfigError("optimizer parameter list changed between steps");
  }
  const double lr = current_lr();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<double>& v = velocity_[k];
    if (v.size() != p.numel()) throw ConfigError("optimizer parameter resized between steps");
    const auto g = p.grad();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      v[i] = momentum_ * v[i] + g[i] + weight_decay_ * p[i];
      p[i] -= lr * v[i];
    }
  }
  ++current_step_;
}

}  // namespace robustprune
