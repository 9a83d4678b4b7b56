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

// Importance scores, top-k masks and the weight sources that apply them.
//
// Every mask in this file is built by the same rule: per prunable layer keep
// kept_count(n, p) entries of largest magnitude, breaking ties by keeping the
// lower flat index. Masks are stored at weight granularity; filter masks are
// broadcast over each filter's weights.

#ifndef ROBUSTPRUNE_PRUNING_HPP_
#define ROBUSTPRUNE_PRUNING_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "robustprune/network.hpp"
#include "robustprune/rng.hpp"
#include "robustprune/tensor.hpp"

namespace robustprune {

enum class Granularity { kWeight, kFilter };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view name);

// Rejects ratios outside [0, 100).
void validate_ratio(double ratio);

// max(1, round_half_up((100 - ratio) * n / 100)).
std::size_t kept_count(std::size_t n, double ratio);

// 0/1 vector keeping the kept_count(n, ratio) largest |values|; ties keep the
// lower index.
std::vector<double> top_k_mask(std::span<const double> values, double ratio);

struct ImportanceScores {
  Granularity granularity = Granularity::kWeight;
  // Indexed by network layer. Weight granularity: shaped like the layer's
  // weight. Filter granularity: [filters]. Empty for unscored layers.
  std::vector<Tensor> layers;

  bool scored(std::size_t layer) const { return layer < layers.size() && !layers[layer].empty(); }
  std::vector<Tensor*> tensors();
};

struct PruneMask {
  double ratio = 0.0;
  Granularity granularity = Granularity::kWeight;
  // Indexed by network layer, shaped like the weight; empty for layers that
  // are not pruned.
  std::vector<Tensor> layers;

  bool covers(std::size_t layer) const { return layer < layers.size() && !layers[layer].empty(); }
  // Ones in one layer's mask.
  std::size_t kept(std::size_t layer) const;
  // Totals over covered layers.
  std::size_t kept_total() const;
  std::size_t size_total() const;
};

// Layers a mask of the given granularity acts on: every prunable layer for
// weights, prunable conv layers for filters. Throws ConfigError when empty.
std::vector<std::size_t> pruned_layers(const Network& net, Granularity granularity);

// Least-weight-magnitude mask.
PruneMask lwm_mask(const Network& net, double ratio);

// s_i = sqrt(k / fan_in) * theta_i / max|theta| per prunable layer.
ImportanceScores scaled_init(const Network& net, double scaling_k);

enum class ScoreInit { kScaled, kXavierNormal, kXavierUniform, kKaimingNormal, kKaimingUniform };

std::string_view to_string(ScoreInit kind);
ScoreInit parse_score_init(std::string_view name);

// xavier-uniform U(+-sqrt(6/(fan_in+fan_out))), xavier-normal
// N(0, 2/(fan_in+fan_out)), kaiming-uniform U(+-sqrt(6/fan_in)),
// kaiming-normal N(0, 2/fan_in). kScaled is rejected here.
ImportanceScores random_score_init(const Network& net, ScoreInit kind, Rng& rng);

// Dispatches to scaled_init or random_score_init.
ImportanceScores init_scores(const Network& net, ScoreInit kind, double scaling_k,
                             std::uint64_t seed);

// Mask of one scored layer at the scores' granularity, broadcast to the
// weight's shape.
Tensor layer_mask(const Network& net, const ImportanceScores& scores, std::size_t layer,
                  double ratio);

// Top-k over |s| per layer: the same mask the straight-through forward pass
// uses at these scores.
PruneMask finalize_mask(const Network& net, const ImportanceScores& scores, double ratio);

// Filter granularity: one score per conv filter, sqrt(k / fan_in) times the
// filter's l1 norm over the layer's largest filter l1 norm. Dense layers are
// left unscored (and unpruned).
ImportanceScores structured_scaled_init(const Network& net, double scaling_k);

// Filter-granularity magnitude baseline: keeps the filters of largest l1 norm.
PruneMask structured_lwm_mask(const Network& net, double ratio);

// Zeroes every weight the mask removes.
void apply_mask(Network& net, const PruneMask& mask);

// Called with (layer, mask) each time a mask is derived from scores.
using MaskObserver = std::function<void(std::size_t layer, const Tensor& mask)>;

// Forward source for score optimization: w = theta * m(top-k |s|), with
// theta held constant, s exposed as gradient-receiving leaves and the
// straight-through rule dL/ds = theta * dL/dw. Masks are recomputed on every
// call. Unscored layers use theta as a constant.
class ScoreMaskedWeights final : public WeightSource {
 public:
  ScoreMaskedWeights(ImportanceScores& scores, double ratio, MaskObserver observer = {});
  ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const override;
  ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const override;

 private:
  ImportanceScores* scores_;
  double ratio_;
  MaskObserver observer_;
};

// Training source with a fixed mask: w = theta * m with the gradient zeroed
// under the mask. Layers the mask does not cover train normally.
class MaskedWeights final : public WeightSource {
 public:
  MaskedWeights(Network& net, const PruneMask& mask);
  ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const override;
  ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const override;

 private:
  Network* net_;
  const PruneMask* mask_;
};

struct QuantizationReport {
  int bits = 8;
  // Indexed by network layer; 0 for parameter-free or all-zero layers.
  std::vector<double> step;
  std::vector<double> max_error;
};

// Symmetric uniform quantization of every weight tensor (biases untouched):
// step = max|theta| / (2^(bits-1) - 1), q = round_half_away(theta / step) *
// step. All-zero tensors are left as they are. bits must lie in [2, 16].
QuantizationReport quantize_weights(Network& net, int bits);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_PRUNING_HPP_
