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

#ifndef ROBUSTPRUNE_OPTIMIZER_HPP_
#define ROBUSTPRUNE_OPTIMIZER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "robustprune/tensor.hpp"

namespace robustprune {

// lr(t) = base_lr * 0.5 * (1 + cos(pi * t / total_steps)).
double cosine_learning_rate(double base_lr, std::size_t total_steps, std::size_t step);

// SGD with heavy-ball momentum and a cosine-annealed learning rate.
//
//   v <- momentum * v + (g + weight_decay * p)
//   p <- p - lr(t) * v
//
// Velocity buffers are created lazily on the first step and stay aligned with
// the parameter list passed to that step.
class CosineSgd {
 public:
  CosineSgd(double base_lr, std::size_t total_steps, double momentum = 0.9,
            double weight_decay = 0.0);

  double base_lr() const { return base_lr_; }
  double momentum() const { return momentum_; }
  std::size_t total_steps() const { return total_steps_; }
  std::size_t current_step() const { return current_step_; }
  double current_lr() const { return cosine_learning_rate(base_lr_, total_steps_, current_step_); }

  // Applies one update using each tensor's gradient slot. Throws ConfigError
  // once current_step() == total_steps().
  void step(std::span<Tensor* const> params);

 private:
  double base_lr_;
  double momentum_;
  double weight_decay_;
  std::size_t total_steps_;
  std::size_t current_step_ = 0;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace robustprune

#endif  // ROBUSTPRUNE_OPTIMIZER_HPP_
