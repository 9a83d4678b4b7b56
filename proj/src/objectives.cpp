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

#include "robustprune/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "robustprune/errors.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

namespace {

std::vector<std::size_t> default_ids(std::span<const std::size_t> ids, std::size_t batch) {
  if (!ids.empty()) {
    if (ids.size() != batch) throw ShapeError("example id count differs from batch size");
    return {ids.begin(), ids.end()};
  }
  std::vector<std::size_t> out(batch);
  for (std::size_t i = 0; i < batch; ++i) out[i] = i;
  return out;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double AttackConfig::effective_step_size() const {
  return step_size ? *step_size : 2.5 * epsilon / static_cast<double>(steps);
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be >= 0");
  if (epsilon > 1.0) throw ConfigError("attack epsilon must be <= 1");
  if (steps == 0) throw ConfigError("attack steps must be positive");
  if (restarts == 0) throw ConfigError("attack restarts must be positive");
  if (step_size && !(*step_size > 0.0)) throw ConfigError("attack step size must be positive");
  if (!step_size && epsilon > 0.0 && !(effective_step_size() > 0.0)) {
    throw ConfigError("attack step size must be positive");
  }
}

std::vector<double> per_example_loss(const Tensor& logits, std::span<const int> y) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<double> out(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* row = logits.data() + n * classes;
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - peak);
    out[n] = std::log(denom) + peak - row[y[n]];
  }
  return out;
}

Tensor pgd_attack(const Network& net, const WeightSource& weights, const Tensor& x,
                  std::span<const int> y, const AttackConfig& cfg, std::uint64_t seed,
                  std::span<const std::size_t> ids) {
  cfg.validate();
  net.check_input(x.shape());
  const std::size_t batch = x.dim(0);
  const std::size_t per = x.numel() / batch;
  if (y.size() != batch) throw ShapeError("pgd_attack: label count differs from batch size");
  if (cfg.epsilon == 0.0) return x;

  const std::vector<std::size_t> stream = default_ids(ids, batch);
  const double eps = cfg.epsilon;
  const double alpha = cfg.effective_step_size();
  const std::size_t restarts = cfg.random_start ? cfg.restarts : 1;

  Tensor best = x;
  std::vector<double> best_loss(batch, -std::numeric_limits<double>::infinity());

  for (std::size_t r = 0; r < restarts; ++r) {
    Tensor cur = x;
    if (cfg.random_start) {
      std::uniform_real_distribution<double> dist(-eps, eps);
      for (std::size_t n = 0; n < batch; ++n) {
        Rng rng = make_rng(seed, {tag(StreamTag::kAttack), stream[n], r});
        for (std::size_t j = 0; j < per; ++j) {
          const std::size_t i = n * per + j;
          cur[i] = std::clamp(x[i] + dist(rng), 0.0, 1.0);
        }
      }
    }
    for (std::size_t t = 0;; ++t) {
      ad::Graph g;
      const ad::Var xv = g.variable(cur);
      const ad::Var logits = net.forward(g, xv, weights);
      const std::vector<double> losses = per_example_loss(logits.value(), y);
      for (std::size_t n = 0; n < batch; ++n) {
        if (losses[n] > best_loss[n]) {
          best_loss[n] = losses[n];
          std::copy_n(cur.data() + n * per, per, best.data() + n * per);
        }
      }
      if (t == cfg.steps) break;
      // Summed loss keeps per-example gradients unscaled.
      g.backward(ad::scale(ad::cross_entropy(logits, y), static_cast<double>(batch)));
      const auto grad = xv.grad();
      for (std::size_t i = 0; i < cur.numel(); ++i) {
        const double moved = cur[i] + alpha * sign(grad[i]);
        cur[i] = std::clamp(std::clamp(moved, x[i] - eps, x[i] + eps), 0.0, 1.0);
      }
    }
  }
  return best;
}

double adversarial_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                        const AttackConfig& cfg, std::uint64_t seed) {
  const SubstitutedWeights frozen(weights.effective_weights(net));
  const Tensor x_adv = pgd_attack(net, frozen, batch.x, batch.y, cfg, seed, batch.ids);
  ad::Graph g;
  const ad::Var loss = ad::cross_entropy(net.forward(g, g.constant_ref(x_adv), weights), batch.y);
  g.backward(loss);
  return loss.value()[0];
}

Interval ibp_propagate_box(const Network& net, const WeightSource& weights, const Tensor& lower,
                           const Tensor& upper) {
  if (lower.shape() != upper.shape()) throw ShapeError("interval bounds differ in shape");
  for (std::size_t i = 0; i < lower.numel(); ++i) {
    if (!(lower[i] <= upper[i])) throw ConfigError("interval lower bound exceeds upper bound");
  }
  ad::Graph g;
  const auto [lo, hi] = net.forward_interval(g, g.constant_ref(lower), g.constant_ref(upper), weights);
  return {lo.value(), hi.value()};
}

Interval ibp_propagate(const Network& net, const WeightSource& weights, const Tensor& x,
                       double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("interval epsilon must be >= 0");
  Tensor lower = x, upper = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    lower[i] = x[i] - epsilon;
    upper[i] = x[i] + epsilon;
  }
  return ibp_propagate_box(net, weights, lower, upper);
}

double EpsilonSchedule::at(double epoch) const {
  if (!(target >= 0.0)) throw ConfigError("epsilon target must be >= 0");
  if (ramp_epochs <= 0.0) return target;
  return target * std::clamp(epoch / ramp_epochs, 0.0, 1.0);
}

double ibp_robust_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                       double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("interval epsilon must be >= 0");
  Tensor lower = batch.x, upper = batch.x;
  for (std::size_t i = 0; i < lower.numel(); ++i) {
    lower[i] -= epsilon;
    upper[i] += epsilon;
  }
  ad::Graph g;
  const auto [lo, hi] = net.forward_interval(g, g.constant(std::move(lower)),
                                             g.constant(std::move(upper)), weights);
  const ad::Var loss = ad::cross_entropy(ad::select_by_label(lo, hi, batch.y), batch.y);
  g.backward(loss);
  return loss.value()[0];
}

double stability_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                      double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ConfigError("noise sigma must be positive");
  const std::size_t n = batch.x.dim(0);
  const std::size_t per = batch.x.numel() / n;
  const std::vector<std::size_t> stream = default_ids(batch.ids, n);
  Tensor noisy = batch.x;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = make_rng(seed, {tag(StreamTag::kNoise), stream[k]});
    std::normal_distribution<double> dist(0.0, sigma);
    for (std::size_t j = 0; j < per; ++j) noisy[k * per + j] += dist(rng);
  }
  ad::Graph g;
  const ad::Var loss =
      ad::cross_entropy(net.forward(g, g.constant(std::move(noisy)), weights), batch.y);
  g.backward(loss);
  return loss.value()[0];
}

double benign_loss(const Network& net, const WeightSource& weights, const Batch& batch) {
  ad::Graph g;
  const ad::Var loss = ad::cross_entropy(net.forward(g, g.constant_ref(batch.x), weights), batch.y);
  g.backward(loss);
  return loss.value()[0];
}

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kBenign:
      return "benign";
    case ObjectiveKind::kAdversarial:
      return "adversarial";
    case ObjectiveKind::kIbp:
      return "ibp";
    case ObjectiveKind::kSmoothing:
      return "smoothing";
  }
  return "unknown";
}

ObjectiveKind parse_objective(std::string_view name) {
  for (ObjectiveKind k : {ObjectiveKind::kBenign, ObjectiveKind::kAdversarial, ObjectiveKind::kIbp,
                          ObjectiveKind::kSmoothing}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown objective '" + std::string(name) +
                    "'; valid: benign, adversarial, ibp, smoothing");
}

double objective_loss(const Network& net, const WeightSource& weights, const Batch& batch,
                      const Objective& objective, double epoch, std::uint64_t seed) {
  switch (objective.kind) {
    case ObjectiveKind::kBenign:
      return benign_loss(net, weights, batch);
    case ObjectiveKind::kAdversarial:
      return adversarial_loss(net, weights, batch, objective.attack, seed);
    case ObjectiveKind::kIbp:
      return ibp_robust_loss(net, weights, batch, objective.ibp.at(epoch));
    case ObjectiveKind::kSmoothing:
      return stability_loss(net, weights, batch, objective.sigma, seed);
  }
  throw ConfigError("unknown objective kind");
}

}  // namespace robustprune
