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

// Training loops for the three pipeline stages. Each stage gets a fresh
// CosineSgd; nothing carries over between stages.

#ifndef ROBUSTPRUNE_TRAINING_HPP_
#define ROBUSTPRUNE_TRAINING_HPP_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustprune/dataset.hpp"
#include "robustprune/network.hpp"
#include "robustprune/objectives.hpp"
#include "robustprune/pruning.hpp"

namespace robustprune {

// Absolute wall-clock limit checked between optimizer steps.
class Deadline {
 public:
  Deadline() = default;
  explicit Deadline(std::chrono::steady_clock::time_point end) : end_(end) {}
  static Deadline after(std::chrono::duration<double> budget);

  bool expired() const { return end_ && std::chrono::steady_clock::now() >= *end_; }
  // Throws TimeLimitError naming `where` once expired.
  void check(const std::string& where) const;

 private:
  std::optional<std::chrono::steady_clock::time_point> end_;
};

struct StageOptions {
  std::string stage = "train";
  Objective objective;
  std::size_t epochs = 1;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  double data_fraction = 1.0;
  // Shuffling and subset selection.
  std::uint64_t data_seed = 0;
  // Attack starts and noise; mixed with (epoch, step) for every minibatch.
  std::uint64_t noise_seed = 0;
  // Optional fixed batch scored before training and after every epoch.
  std::optional<Batch> held_batch;
  Deadline deadline;
};

struct EpochRecord {
  std::size_t epoch = 0;
  // Mean minibatch objective.
  double loss = 0.0;
  // Mean over minibatches of the l2 norm of the optimized gradient.
  double grad_norm = 0.0;
  std::optional<double> held_loss;
};

struct StageLog {
  std::string stage;
  std::size_t steps = 0;
  double seconds = 0.0;
  // Held-batch loss before the first step.
  std::optional<double> initial_held_loss;
  std::vector<EpochRecord> epochs;
};

struct StepInfo {
  const std::string& stage;
  std::size_t epoch;
  std::size_t step;
  double loss;
};
using StepObserver = std::function<void(const StepInfo&)>;

// Trains every parameter of `net`. With a mask, the masked weights are
// zeroed first, receive no gradient and are re-clamped to 0 after each step.
StageLog train_network(Network& net, const Dataset& train, const StageOptions& opt,
                       const PruneMask* mask = nullptr, const StepObserver& observer = {});

// Optimizes only the scores through the straight-through top-k forward pass.
// The network's parameters are never written. epochs == 0 returns at once.
StageLog prune_optimize(const Network& net, ImportanceScores& scores, double ratio,
                        const Dataset& train, const StageOptions& opt,
                        const MaskObserver& mask_observer = {},
                        const StepObserver& observer = {});

// Alternates lwm_mask at each ratio of a strictly increasing schedule with a
// finetune segment of `segment.epochs`. Returns the final mask.
PruneMask multi_step_lwm(Network& net, const std::vector<double>& schedule, const Dataset& train,
                         const StageOptions& segment, std::vector<StageLog>* logs = nullptr);

// Loss of `objective` on one batch without touching any gradient slot.
double held_out_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                     const Objective& objective, double epoch, std::uint64_t seed);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_TRAINING_HPP_
