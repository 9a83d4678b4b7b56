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

#ifndef ROBUSTPRUNE_GRADIENTS_HPP_
#define ROBUSTPRUNE_GRADIENTS_HPP_

#include <variant>
#include <vector>

#include "robustprune/network.hpp"
#include "robustprune/tensor.hpp"

namespace robustprune {

enum class LossKind { kCrossEntropy, kSquaredError };

// Class labels for cross-entropy, or a dense target for squared error.
using Targets = std::variant<std::vector<int>, Tensor>;

struct LossAndGradients {
  double loss = 0.0;
  // Aligned with Network::parameters(): w0, b0, w1, b1, ...
  std::vector<Tensor> gradients;
};

// Pure: the network is not modified.
LossAndGradients forward_backward(const Network& net, const Tensor& input, const Targets& targets,
                                  LossKind kind);

// Loss only, with parameters as constants.
double evaluate_loss(const Network& net, const Tensor& input, const Targets& targets,
                     LossKind kind);

// max over parameters of |analytic - central difference| / max(1, |analytic|).
// Limited to networks with at most 10^4 parameters.
double finite_diff_check(const Network& net, const Tensor& input, const Targets& targets,
                         LossKind kind, double h);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_GRADIENTS_HPP_
