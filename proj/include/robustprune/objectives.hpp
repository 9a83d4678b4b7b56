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

// Training objectives: benign cross-entropy, PGD adversarial training,
// interval-bound (IBP) verifiable training and Gaussian-noise stability
// training. Every *_loss function runs forward and backward; gradients land
// in whichever leaves the WeightSource exposes (parameters or scores).

#ifndef ROBUSTPRUNE_OBJECTIVES_HPP_
#define ROBUSTPRUNE_OBJECTIVES_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "robustprune/dataset.hpp"
#include "robustprune/network.hpp"

namespace robustprune {

// l-infinity PGD settings, in pixel units.
struct AttackConfig {
  double epsilon = 0.0;
  std::size_t steps = 10;
  // Defaults to 2.5 * epsilon / steps.
  std::optional<double> step_size;
  std::size_t restarts = 1;
  bool random_start = false;

  double effective_step_size() const;
  void validate() const;
};

// Returns one adversarial input per row of x. Each step moves by
// step_size * sign(d loss / d x) and projects onto the epsilon ball
// intersected with [0, 1]. Per example, the iterate with the largest loss
// over all steps and restarts is returned (the starting point included).
// Random starts for example i, restart r come from derive_seed(seed, {ids[i],
// r}); ids default to row positions.
Tensor pgd_attack(const Network& net, const WeightSource& weights, const Tensor& x,
                  std::span<const int> y, const AttackConfig& cfg, std::uint64_t seed,
                  std::span<const std::size_t> ids = {});

// Per-example cross-entropy.
std::vector<double> per_example_loss(const Tensor& logits, std::span<const int> y);

// Two-phase adversarial loss: attack a frozen copy of the current effective
// weights, then differentiate the cross-entropy on the attacked batch.
double adversarial_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                        const AttackConfig& cfg, std::uint64_t seed);

struct Interval {
  Tensor lower;
  Tensor upper;
};

Interval ibp_propagate(const Network& net, const WeightSource& weights, const Tensor& x,
                       double epsilon);
Interval ibp_propagate_box(const Network& net, const WeightSource& weights, const Tensor& lower,
                           const Tensor& upper);

// Linear ramp from 0 to `target` over `ramp_epochs`, constant afterwards.
struct EpsilonSchedule {
  double target = 0.0;
  double ramp_epochs = 0.0;
  double at(double epoch) const;
};

// Cross-entropy over worst-case logits: the label logit takes its lower
// bound, all others their upper bound.
double ibp_robust_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                       double epsilon);

// Cross-entropy on x + sigma * N(0, I), noise drawn per example from
// derive_seed(seed, {ids[i]}). Noisy inputs are not clipped.
double stability_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                      double sigma, std::uint64_t seed);

double benign_loss(const Network& net, const WeightSource& weights, const Batch& batch);

enum class ObjectiveKind { kBenign, kAdversarial, kIbp, kSmoothing };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);

struct Objective {
  ObjectiveKind kind = ObjectiveKind::kBenign;
  AttackConfig attack;
  EpsilonSchedule ibp;
  double sigma = 0.25;
};

// Dispatches to the loss for `objective`. `epoch` is fractional training
// progress (drives the IBP schedule); `seed` feeds attacks and noise.
double objective_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                      const Objective& objective, double epoch, std::uint64_t seed);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_OBJECTIVES_HPP_
