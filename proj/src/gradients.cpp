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

#include "robustprune/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robustprune/errors.hpp"

namespace robustprune {

namespace {

constexpr std::size_t kMaxFiniteDiffParameters = 10000;

ad::Var loss_node(ad::Var out, const Targets& targets, LossKind kind) {
  if (kind == LossKind::kCrossEntropy) {
    const auto* labels = std::get_if<std::vector<int>>(&targets);
    if (!labels) throw ConfigError("cross-entropy needs class labels");
    return ad::cross_entropy(out, *labels);
  }
  const auto* dense = std::get_if<Tensor>(&targets);
  if (!dense) throw ConfigError("squared error needs a dense target tensor");
  return ad::squared_error(out, *dense);
}

// Binds private copies of the parameters as gradient-requiring leaves.
class CopiedWeights final : public WeightSource {
 public:
  explicit CopiedWeights(const Network& net) {
    for (const Layer& l : net.layers()) {
      weights_.push_back(l.weight);
      biases_.push_back(l.bias);
    }
  }
  ad::Var weight(ad::Graph& g, const Network&, std::size_t layer) const override {
    return g.parameter(weights_[layer]);
  }
  ad::Var bias(ad::Graph& g, const Network&, std::size_t layer) const override {
    return g.parameter(biases_[layer]);
  }
  std::vector<Tensor> take_gradients(const Network& net) {
    std::vector<Tensor> out;
    for (std::size_t i : net.parametric_layers()) {
      for (Tensor* t : {&weights_[i], &biases_[i]}) {
        const auto g = t->grad();
        out.emplace_back(t->shape(), std::vector<double>(g.begin(), g.end()));
      }
    }
    return out;
  }

 private:
  mutable std::vector<Tensor> weights_;
  mutable std::vector<Tensor> biases_;
};

}  // namespace

LossAndGradients forward_backward(const Network& net, const Tensor& input, const Targets& targets,
                                  LossKind kind) {
  CopiedWeights source(net);
  ad::Graph g;
  const ad::Var out = net.forward(g, g.constant_ref(input), source);
  const ad::Var loss = loss_node(out, targets, kind);
  g.backward(loss);
  return {loss.value()[0], source.take_gradients(net)};
}

double evaluate_loss(const Network& net, const Tensor& input, const Targets& targets,
                     LossKind kind) {
  ad::Graph g;
  const ad::Var out = net.forward(g, g.constant_ref(input), FrozenWeights{});
  return loss_node(out, targets, kind).value()[0];
}

double finite_diff_check(const Network& net, const Tensor& input, const Targets& targets,
                         LossKind kind, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  if (net.parameter_count() > kMaxFiniteDiffParameters) {
    throw ConfigError("finite_diff_check supports at most " +
                      std::to_string(kMaxFiniteDiffParameters) + " parameters, network has " +
                      std::to_string(net.parameter_count()));
  }
  const LossAndGradients analytic = forward_backward(net, input, targets, kind);
  Network probe = net;
  std::vector<Tensor*> params = probe.parameters();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = evaluate_loss(probe, input, targets, kind);
      p[i] = saved - h;
      const double down = evaluate_loss(probe, input, targets, kind);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic.gradients[k][i];
      worst = std::max(worst, std::fabs(exact - numeric) / std::max(1.0, std::fabs(exact)));
    }
  }
  return worst;
}

}  // namespace robustprune
