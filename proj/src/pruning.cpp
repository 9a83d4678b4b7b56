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

#include "robustprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "robustprune/errors.hpp"

namespace robustprune {

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// Broadcasts one entry per filter over [filters, ...] weights.
Tensor broadcast_filters(std::span<const double> per_filter, const Shape& weight_shape) {
  Tensor out(weight_shape);
  const std::size_t per = out.numel() / per_filter.size();
  for (std::size_t f = 0; f < per_filter.size(); ++f) {
    std::fill_n(out.data() + f * per, per, per_filter[f]);
  }
  return out;
}

std::vector<double> filter_l1(const Tensor& w) {
  const std::size_t filters = w.dim(0), per = w.numel() / filters;
  std::vector<double> out(filters, 0.0);
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t j = 0; j < per; ++j) out[f] += std::fabs(w[f * per + j]);
  }
  return out;
}

}  // namespace

std::string_view to_string(Granularity g) {
  return g == Granularity::kWeight ? "weight" : "filter";
}

Granularity parse_granularity(std::string_view name) {
  if (name == "weight") return Granularity::kWeight;
  if (name == "filter") return Granularity::kFilter;
  throw ConfigError("unknown granularity '" + std::string(name) + "'; valid: weight, filter");
}

void validate_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio < 100.0)) {
    throw ConfigError("pruning ratio must lie in [0, 100), got " + std::to_string(ratio));
  }
}

std::size_t kept_count(std::size_t n, double ratio) {
  validate_ratio(ratio);
  if (n == 0) throw ConfigError("cannot prune an empty layer");
  const double x = (100.0 - ratio) * static_cast<double>(n) / 100.0;
  // The epsilon absorbs representation error in ratios such as 99.9 so that
  // exact halves round up as intended.
  const auto k = static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

std::vector<double> top_k_mask(std::span<const double> values, double ratio) {
  const std::size_t n = values.size();
  const std::size_t k = kept_count(n, ratio);
  std::vector<double> mask(n, 0.0);
  if (k == n) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return mask;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Strict total order: larger magnitude first, then lower index.
  const auto before = [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(values[a]), mb = std::fabs(values[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                   before);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1.0;
  return mask;
}

std::vector<Tensor*> ImportanceScores::tensors() {
  std::vector<Tensor*> out;
  for (Tensor& t : layers) {
    if (!t.empty()) out.push_back(&t);
  }
  return out;
}

std::size_t PruneMask::kept(std::size_t layer) const {
  if (!covers(layer)) return 0;
  std::size_t n = 0;
  for (double v : layers[layer].values()) n += v != 0.0;
  return n;
}

std::size_t PruneMask::kept_total() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) n += kept(i);
  return n;
}

std::size_t PruneMask::size_total() const {
  std::size_t n = 0;
  for (const Tensor& t : layers) n += t.numel();
  return n;
}

std::vector<std::size_t> pruned_layers(const Network& net, Granularity granularity) {
  std::vector<std::size_t> out;
  for (std::size_t i : net.prunable_layers()) {
    if (granularity == Granularity::kWeight || net.layers()[i].kind == LayerKind::kConv) {
      out.push_back(i);
    }
  }
  if (out.empty()) {
    throw ConfigError(granularity == Granularity::kFilter
                          ? "filter pruning needs at least one prunable conv layer"
                          : "network has no prunable layers");
  }
  return out;
}

PruneMask lwm_mask(const Network& net, double ratio) {
  validate_ratio(ratio);
  PruneMask m;
  m.ratio = ratio;
  m.layers.resize(net.layers().size());
  for (std::size_t i : pruned_layers(net, Granularity::kWeight)) {
    const Tensor& w = net.layers()[i].weight;
    m.layers[i] = Tensor(w.shape(), top_k_mask(w.values(), ratio));
  }
  return m;
}

ImportanceScores scaled_init(const Network& net, double scaling_k) {
  if (!(scaling_k > 0.0)) throw ConfigError("scaling_k must be positive");
  ImportanceScores s;
  s.layers.resize(net.layers().size());
  for (std::size_t i : pruned_layers(net, Granularity::kWeight)) {
    const Layer& l = net.layers()[i];
    const double peak = max_abs(l.weight.values());
    if (peak == 0.0) {
      throw ConfigError(l.describe(i) + ": all weights are zero, scaled init is undefined");
    }
    const double scale = std::sqrt(scaling_k / static_cast<double>(l.fan_in)) / peak;
    Tensor t(l.weight.shape());
    for (std::size_t j = 0; j < t.numel(); ++j) t[j] = scale * l.weight[j];
    s.layers[i] = std::move(t);
  }
  return s;
}

std::string_view to_string(ScoreInit kind) {
  switch (kind) {
    case ScoreInit::kScaled:
      return "scaled";
    case ScoreInit::kXavierNormal:
      return "xavier-normal";
    case ScoreInit::kXavierUniform:
      return "xavier-uniform";
    case ScoreInit::kKaimingNormal:
      return "kaiming-normal";
    case ScoreInit::kKaimingUniform:
      return "kaiming-uniform";
  }
  return "unknown";
}

ScoreInit parse_score_init(std::string_view name) {
  for (ScoreInit k : {ScoreInit::kScaled, ScoreInit::kXavierNormal, ScoreInit::kXavierUniform,
                      ScoreInit::kKaimingNormal, ScoreInit::kKaimingUniform}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown score init '" + std::string(name) +
                    "'; valid: scaled, xavier-normal, xavier-uniform, kaiming-normal, "
                    "kaiming-uniform");
}

ImportanceScores random_score_init(const Network& net, ScoreInit kind, Rng& rng) {
  if (kind == ScoreInit::kScaled) throw ConfigError("scaled init is not a random init");
  ImportanceScores s;
  s.layers.resize(net.layers().size());
  for (std::size_t i : pruned_layers(net, Granularity::kWeight)) {
    const Layer& l = net.layers()[i];
    const auto fan_in = static_cast<double>(l.fan_in);
    const auto fan_sum = fan_in + static_cast<double>(l.fan_out);
    Tensor t(l.weight.shape());
    const auto fill = [&](auto dist) {
      for (double& v : t.values()) v = dist(rng);
    };
    switch (kind) {
      case ScoreInit::kXavierUniform: {
        const double b = std::sqrt(6.0 / fan_sum);
        fill(std::uniform_real_distribution<double>(-b, b));
        break;
      }
      case ScoreInit::kXavierNormal:
        fill(std::normal_distribution<double>(0.0, std::sqrt(2.0 / fan_sum)));
        break;
      case ScoreInit::kKaimingUniform: {
        const double b = std::sqrt(6.0 / fan_in);
        fill(std::uniform_real_distribution<double>(-b, b));
        break;
      }
      case ScoreInit::kKaimingNormal:
        fill(std::normal_distribution<double>(0.0, std::sqrt(2.0 / fan_in)));
        break;
      case ScoreInit::kScaled:
        break;
    }
    s.layers[i] = std::move(t);
  }
  return s;
}

ImportanceScores init_scores(const Network& net, ScoreInit kind, double scaling_k,
                             std::uint64_t seed) {
  if (kind == ScoreInit::kScaled) return scaled_init(net, scaling_k);
  Rng rng = make_rng(seed, {tag(StreamTag::kScores)});
  return random_score_init(net, kind, rng);
}

Tensor layer_mask(const Network& net, const ImportanceScores& scores, std::size_t layer,
                  double ratio) {
  const Tensor& w = net.layers().at(layer).weight;
  if (!scores.scored(layer)) {
    throw ConfigError(net.layers()[layer].describe(layer) + ": no importance scores");
  }
  const Tensor& s = scores.layers[layer];
  if (scores.granularity == Granularity::kWeight) {
    if (s.shape() != w.shape()) {
      throw ShapeError(net.layers()[layer].describe(layer) + ": scores " +
                       shape_to_string(s.shape()) + " do not match weight " +
                       shape_to_string(w.shape()));
    }
    return Tensor(w.shape(), top_k_mask(s.values(), ratio));
  }
  if (s.numel() != w.dim(0)) {
    throw ShapeError(net.layers()[layer].describe(layer) + ": expected one score per filter");
  }
  return broadcast_filters(top_k_mask(s.values(), ratio), w.shape());
}

PruneMask finalize_mask(const Network& net, const ImportanceScores& scores, double ratio) {
  validate_ratio(ratio);
  PruneMask m;
  m.ratio = ratio;
  m.granularity = scores.granularity;
  m.layers.resize(net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (scores.scored(i)) m.layers[i] = layer_mask(net, scores, i, ratio);
  }
  return m;
}

ImportanceScores structured_scaled_init(const Network& net, double scaling_k) {
  if (!(scaling_k > 0.0)) throw ConfigError("scaling_k must be positive");
  ImportanceScores s;
  s.granularity = Granularity::kFilter;
  s.layers.resize(net.layers().size());
  for (std::size_t i : pruned_layers(net, Granularity::kFilter)) {
    const Layer& l = net.layers()[i];
    const std::vector<double> norms = filter_l1(l.weight);
    const double peak = max_abs(norms);
    if (peak == 0.0) {
      throw ConfigError(l.describe(i) + ": all weights are zero, scaled init is undefined");
    }
    const double scale = std::sqrt(scaling_k / static_cast<double>(l.fan_in)) / peak;
    Tensor t({norms.size()});
    for (std::size_t f = 0; f < norms.size(); ++f) t[f] = scale * norms[f];
    s.layers[i] = std::move(t);
  }
  return s;
}

PruneMask structured_lwm_mask(const Network& net, double ratio) {
  validate_ratio(ratio);
  PruneMask m;
  m.ratio = ratio;
  m.granularity = Granularity::kFilter;
  m.layers.resize(net.layers().size());
  for (std::size_t i : pruned_layers(net, Granularity::kFilter)) {
    const Tensor& w = net.layers()[i].weight;
    m.layers[i] = broadcast_filters(top_k_mask(filter_l1(w), ratio), w.shape());
  }
  return m;
}

void apply_mask(Network& net, const PruneMask& mask) {
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (!mask.covers(i)) continue;
    Tensor& w = net.layers()[i].weight;
    if (w.shape() != mask.layers[i].shape()) {
      throw ShapeError(net.layers()[i].describe(i) + ": mask " +
                       shape_to_string(mask.layers[i].shape()) + " does not match weight " +
                       shape_to_string(w.shape()));
    }
    for (std::size_t j = 0; j < w.numel(); ++j) {
      if (mask.layers[i][j] == 0.0) w[j] = 0.0;
    }
  }
}

ScoreMaskedWeights::ScoreMaskedWeights(ImportanceScores& scores, double ratio,
                                       MaskObserver observer)
    : scores_(&scores), ratio_(ratio), observer_(std::move(observer)) {
  validate_ratio(ratio);
}

ad::Var ScoreMaskedWeights::weight(ad::Graph& g, const Network& net, std::size_t layer) const {
  const Tensor& theta = net.layers()[layer].weight;
  if (!scores_->scored(layer)) return g.constant_ref(theta);
  Tensor& s = scores_->layers[layer];
  if (scores_->granularity == Granularity::kWeight) {
    const Tensor mask = layer_mask(net, *scores_, layer, ratio_);
    if (observer_) observer_(layer, mask);
    return ad::straight_through(g.constant_ref(theta), g.parameter(s), mask);
  }
  const Tensor filter_mask({s.numel()}, top_k_mask(s.values(), ratio_));
  if (observer_) observer_(layer, broadcast_filters(filter_mask.values(), theta.shape()));
  return ad::straight_through_filters(g.constant_ref(theta), g.parameter(s), filter_mask);
}

ad::Var ScoreMaskedWeights::bias(ad::Graph& g, const Network& net, std::size_t layer) const {
  return g.constant_ref(net.layers()[layer].bias);
}

MaskedWeights::MaskedWeights(Network& net, const PruneMask& mask) : net_(&net), mask_(&mask) {}

ad::Var MaskedWeights::weight(ad::Graph& g, const Network&, std::size_t layer) const {
  Tensor& theta = net_->layers()[layer].weight;
  if (!mask_->covers(layer)) return g.parameter(theta);
  return ad::masked(g.parameter(theta), mask_->layers[layer]);
}

ad::Var MaskedWeights::bias(ad::Graph& g, const Network&, std::size_t layer) const {
  return g.parameter(net_->layers()[layer].bias);
}

QuantizationReport quantize_weights(Network& net, int bits) {
  if (bits < 2 || bits > 16) {
    throw ConfigError("quantization bits must lie in [2, 16], got " + std::to_string(bits));
  }
  QuantizationReport r;
  r.bits = bits;
  r.step.assign(net.layers().size(), 0.0);
  r.max_error.assign(net.layers().size(), 0.0);
  const double levels = std::ldexp(1.0, bits - 1) - 1.0;
  for (std::size_t i : net.parametric_layers()) {
    Tensor& w = net.layers()[i].weight;
    const double peak = max_abs(w.values());
    if (peak == 0.0) continue;
    const double step = peak / levels;
    double worst = 0.0;
    for (double& v : w.values()) {
      // std::round rounds halves away from zero. Scaling by levels / peak
      // rather than dividing by step keeps exact halves exact.
      const double q = std::round(v * levels / peak) * step;
      worst = std::max(worst, std::fabs(q - v));
      v = q;
    }
    r.step[i] = step;
    r.max_error[i] = worst;
  }
  return r;
}

}  // namespace robustprune
