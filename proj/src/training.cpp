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

#include "robustprune/training.hpp"

#include <cmath>
#include <string>

#include "robustprune/errors.hpp"
#include "robustprune/optimizer.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

Deadline Deadline::after(std::chrono::duration<double> budget) {
  return Deadline(std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(budget));
}

void Deadline::check(const std::string& where) const {
  if (expired()) throw TimeLimitError("time limit reached during " + where);
}

double held_out_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                     const Objective& objective, double epoch, std::uint64_t seed) {
  const SubstitutedWeights frozen(weights.effective_weights(net));
  return objective_loss(net, frozen, batch, objective, epoch, seed);
}

namespace {

void validate(const StageOptions& opt) {
  if (opt.batch_size == 0) throw ConfigError(opt.stage + ": batch size must be positive");
  if (!(opt.lr >= 0.0)) throw ConfigError(opt.stage + ": learning rate must be >= 0");
  if (opt.objective.kind == ObjectiveKind::kAdversarial) opt.objective.attack.validate();
}

// Shared minibatch loop. `params` are the tensors the optimizer updates;
// `after_step` runs after every update.
StageLog run_stage(const Network& net, const WeightSource& source, std::vector<Tensor*> params,
                   const Dataset& train, const StageOptions& opt,
                   const std::function<void()>& after_step, const StepObserver& observer) {
  validate(opt);
  const auto start = std::chrono::steady_clock::now();
  StageLog log;
  log.stage = opt.stage;
  const std::uint64_t held_seed = derive_seed(opt.noise_seed, {tag(StreamTag::kEval)});
  const auto held = [&](double epoch) -> std::optional<double> {
    if (!opt.held_batch) return std::nullopt;
    return held_out_loss(net, source, *opt.held_batch, opt.objective, epoch, held_seed);
  };
  log.initial_held_loss = held(0.0);
  if (opt.epochs == 0) return log;

  const BatchPlan plan(train, opt.batch_size, opt.data_seed, opt.data_fraction);
  const std::size_t per_epoch = plan.batches_per_epoch();
  CosineSgd sgd(opt.lr, opt.epochs * per_epoch, opt.momentum, opt.weight_decay);

  for (std::size_t e = 0; e < opt.epochs; ++e) {
    const std::vector<std::vector<std::size_t>> batches = plan.epoch(e);
    EpochRecord rec;
    rec.epoch = e;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      opt.deadline.check(opt.stage + " epoch " + std::to_string(e));
      for (Tensor* p : params) p->zero_grad();
      const Batch batch = plan.materialize(batches[k]);
      const double progress = static_cast<double>(e) + static_cast<double>(k) / per_epoch;
      double loss = 0.0;
      try {
        loss = objective_loss(net, source, batch, opt.objective, progress,
                              derive_seed(opt.noise_seed, {e, k}));
      } catch (const NumericalError& err) {
        throw DivergenceError(opt.stage, log.steps, err.what());
      }
      if (!std::isfinite(loss)) throw DivergenceError(opt.stage, log.steps, "non-finite loss");
      double sq = 0.0;
      for (Tensor* p : params) {
        for (double g : p->grad()) sq += g * g;
      }
      if (!std::isfinite(sq)) throw DivergenceError(opt.stage, log.steps, "non-finite gradient");
      sgd.step(params);
      if (after_step) after_step();
      rec.loss += loss;
      rec.grad_norm += std::sqrt(sq);
      if (observer) observer(StepInfo{opt.stage, e, log.steps, loss});
      ++log.steps;
    }
    rec.loss /= static_cast<double>(batches.size());
    rec.grad_norm /= static_cast<double>(batches.size());
    rec.held_loss = held(static_cast<double>(e + 1));
    log.epochs.push_back(rec);
  }
  for (Tensor* p : params) p->drop_grad();
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

}  // namespace

StageLog train_network(Network& net, const Dataset& train, const StageOptions& opt,
                       const PruneMask* mask, const StepObserver& observer) {
  if (!mask) {
    const TrainableWeights source(net);
    return run_stage(net, source, net.parameters(), train, opt, {}, observer);
  }
  apply_mask(net, *mask);
  const MaskedWeights source(net, *mask);
  return run_stage(net, source, net.parameters(), train, opt, [&] { apply_mask(net, *mask); },
                   observer);
}

StageLog prune_optimize(const Network& net, ImportanceScores& scores, double ratio,
                        const Dataset& train, const StageOptions& opt,
                        const MaskObserver& mask_observer, const StepObserver& observer) {
  const ScoreMaskedWeights source(scores, ratio, mask_observer);
  return run_stage(net, source, scores.tensors(), train, opt, {}, observer);
}

PruneMask multi_step_lwm(Network& net, const std::vector<double>& schedule, const Dataset& train,
                         const StageOptions& segment, std::vector<StageLog>* logs) {
  if (schedule.empty()) throw ConfigError("multi-step schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    validate_ratio(schedule[i]);
    if (i > 0 && !(schedule[i] > schedule[i - 1])) {
      throw ConfigError("multi-step schedule must be strictly increasing");
    }
  }
  PruneMask mask;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    mask = lwm_mask(net, schedule[i]);
    StageOptions opt = segment;
    opt.stage = segment.stage + "-" + std::to_string(i);
    opt.noise_seed = derive_seed(segment.noise_seed, {i});
    StageLog log = train_network(net, train, opt, &mask);
    if (logs) logs->push_back(std::move(log));
  }
  return mask;
}

}  // namespace robustprune
