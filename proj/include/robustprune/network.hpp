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

#ifndef ROBUSTPRUNE_NETWORK_HPP_
#define ROBUSTPRUNE_NETWORK_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robustprune/autodiff.hpp"
#include "robustprune/rng.hpp"
#include "robustprune/tensor.hpp"

namespace robustprune {

enum class LayerKind { kDense, kConv, kRelu, kFlatten };

std::string_view to_string(LayerKind kind);

struct Layer {
  LayerKind kind = LayerKind::kRelu;
  // Dense: [out, in]. Conv: [filters, channels, k, k]. Empty otherwise.
  Tensor weight;
  Tensor bias;
  ad::ConvGeometry conv;
  // Masks apply to `weight` only; biases are never pruned.
  bool prunable = false;
  // Dense: input features. Conv: channels * k * k.
  std::size_t fan_in = 0;
  // Dense: output features. Conv: filters * k * k.
  std::size_t fan_out = 0;
  // Per-example shapes (no batch dimension).
  Shape input_shape;
  Shape output_shape;

  bool has_parameters() const { return kind == LayerKind::kDense || kind == LayerKind::kConv; }
  std::string describe(std::size_t index) const;
};

class Network;

// Supplies the weight and bias nodes a forward pass multiplies with. The
// implementation decides what is differentiable: raw parameters, constants,
// masked parameters, or straight-through score products.
class WeightSource {
 public:
  virtual ~WeightSource() = default;
  virtual ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const = 0;
  virtual ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const = 0;

  // Materialized weight tensors, indexed by layer (empty for parameter-free
  // layers). Used to run attacks against a frozen copy of the current model.
  std::vector<Tensor> effective_weights(const Network& net) const;
};

// Gradients flow into each layer's weight/bias gradient slots.
class TrainableWeights final : public WeightSource {
 public:
  explicit TrainableWeights(Network& net) : net_(&net) {}
  ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const override;
  ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const override;

 private:
  Network* net_;
};

// Parameters enter the graph as constants.
class FrozenWeights final : public WeightSource {
 public:
  ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const override;
  ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const override;
};

// Constant weights substituted per layer; biases come from the network.
class SubstitutedWeights final : public WeightSource {
 public:
  explicit SubstitutedWeights(std::vector<Tensor> weights) : weights_(std::move(weights)) {}
  ad::Var weight(ad::Graph& g, const Network& net, std::size_t layer) const override;
  ad::Var bias(ad::Graph& g, const Network& net, std::size_t layer) const override;

 private:
  std::vector<Tensor> weights_;
};

// Ordered stack of dense / conv / relu / flatten layers with a declared
// per-example input shape.
class Network {
 public:
  Network(std::string architecture, Shape input_shape);

  // Builder interface; each call appends a layer and validates that shapes
  // compose.
  Network& dense(std::size_t outputs);
  Network& conv(std::size_t filters, ad::ConvGeometry geometry);
  Network& relu();
  Network& flatten();

  // Kaiming-uniform weights U(+-sqrt(6 / fan_in)) and zero biases.
  void initialize(Rng& rng);

  const std::string& architecture() const { return architecture_; }
  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const;
  std::size_t num_classes() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::vector<std::size_t> parametric_layers() const;
  std::vector<std::size_t> prunable_layers() const;

  // Weight plus bias element counts over all layers.
  std::size_t parameter_count() const;
  // Weight element counts over prunable layers.
  std::size_t prunable_weight_count() const;

  // Weights and biases in layer order: w0, b0, w1, b1, ...
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void zero_grad();

  // Rejects inputs whose trailing dimensions differ from input_shape().
  void check_input(const Shape& batch_shape) const;

  ad::Var forward(ad::Graph& g, ad::Var x, const WeightSource& source) const;
  // Interval propagation with (center, radius) arithmetic through affine
  // layers and monotone clamping through relu. Returns (lower, upper).
  std::pair<ad::Var, ad::Var> forward_interval(ad::Graph& g, ad::Var lower, ad::Var upper,
                                               const WeightSource& source) const;

  Tensor logits(const Tensor& x) const;
  Tensor logits(const Tensor& x, const WeightSource& source) const;

 private:
  Network& append(Layer layer);

  std::string architecture_;
  Shape input_shape_;
  std::vector<Layer> layers_;
};

const std::vector<std::string>& architecture_names();

// One of cnn-small, cnn-large, vgg4, mlp-2x256; weights drawn from
// `weight_seed`.
Network build_architecture(std::string_view name, const Shape& input_shape,
                           std::size_t num_classes, std::uint64_t weight_seed = 0);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_NETWORK_HPP_
