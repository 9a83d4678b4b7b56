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

#include "robustprune/network.hpp"

#include <algorithm>
#include <cmath>

#include "robustprune/errors.hpp"

namespace robustprune {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense:
      return "dense";
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kRelu:
      return "relu";
    case LayerKind::kFlatten:
      return "flatten";
  }
  return "unknown";
}

std::string Layer::describe(std::size_t index) const {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(kind)) + ")";
}

// ---------------------------------------------------------------------------
// Weight sources

std::vector<Tensor> WeightSource::effective_weights(const Network& net) const {
  std::vector<Tensor> out(net.layers().size());
  ad::Graph g;
  for (std::size_t i : net.parametric_layers()) out[i] = weight(g, net, i).value();
  return out;
}

ad::Var TrainableWeights::weight(ad::Graph& g, const Network&, std::size_t layer) const {
  return g.parameter(net_->layers()[layer].weight);
}

ad::Var TrainableWeights::bias(ad::Graph& g, const Network&, std::size_t layer) const {
  return g.parameter(net_->layers()[layer].bias);
}

ad::Var FrozenWeights::weight(ad::Graph& g, const Network& net, std::size_t layer) const {
  return g.constant_ref(net.layers()[layer].weight);
}

ad::Var FrozenWeights::bias(ad::Graph& g, const Network& net, std::size_t layer) const {
  return g.constant_ref(net.layers()[layer].bias);
}

ad::Var SubstitutedWeights::weight(ad::Graph& g, const Network& net, std::size_t layer) const {
  if (layer >= weights_.size() || weights_[layer].shape() != net.layers()[layer].weight.shape()) {
    throw ShapeError(net.layers()[layer].describe(layer) + ": substituted weight has wrong shape");
  }
  return g.constant_ref(weights_[layer]);
}

ad::Var SubstitutedWeights::bias(ad::Graph& g, const Network& net, std::size_t layer) const {
  return g.constant_ref(net.layers()[layer].bias);
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::string architecture, Shape input_shape)
    : architecture_(std::move(architecture)), input_shape_(std::move(input_shape)) {
  if (input_shape_.empty()) throw ShapeError("network input shape must be non-empty");
  for (std::size_t d : input_shape_) {
    if (d == 0) throw ShapeError("network input dimensions must be positive");
  }
}

Shape Network::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().output_shape;
}

std::size_t Network::num_classes() const {
  const Shape s = output_shape();
  if (s.size() != 1) throw ShapeError("network output is not a class vector");
  return s[0];
}

Network& Network::append(Layer layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Network& Network::dense(std::size_t outputs) {
  const Shape in = output_shape();
  const std::size_t index = layers_.size();
  if (in.size() != 1) {
    throw ShapeError("layer " + std::to_string(index) + " (dense): needs a flat input, got " +
                     shape_to_string(in) + "; add flatten() first");
  }
  if (outputs == 0) throw ShapeError("layer " + std::to_string(index) + " (dense): zero outputs");
  Layer l;
  l.kind = LayerKind::kDense;
  l.weight = Tensor({outputs, in[0]});
  l.bias = Tensor({outputs});
  l.prunable = true;
  l.fan_in = in[0];
  l.fan_out = outputs;
  l.input_shape = in;
  l.output_shape = {outputs};
  return append(std::move(l));
}

Network& Network::conv(std::size_t filters, ad::ConvGeometry geometry) {
  const Shape in = output_shape();
  const std::size_t index = layers_.size();
  if (in.size() != 3) {
    throw ShapeError("layer " + std::to_string(index) + " (conv): needs [C,H,W] input, got " +
                     shape_to_string(in));
  }
  if (filters == 0) throw ShapeError("layer " + std::to_string(index) + " (conv): zero filters");
  const std::size_t k = geometry.kernel;
  Layer l;
  l.kind = LayerKind::kConv;
  l.conv = geometry;
  try {
    l.output_shape = {filters, geometry.output_extent(in[1]), geometry.output_extent(in[2])};
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(index) + " (conv): " + e.what());
  }
  l.weight = Tensor({filters, in[0], k, k});
  l.bias = Tensor({filters});
  l.prunable = true;
  l.fan_in = in[0] * k * k;
  l.fan_out = filters * k * k;
  l.input_shape = in;
  return append(std::move(l));
}

Network& Network::relu() {
  Layer l;
  l.kind = LayerKind::kRelu;
  l.input_shape = output_shape();
  l.output_shape = l.input_shape;
  return append(std::move(l));
}

Network& Network::flatten() {
  Layer l;
  l.kind = LayerKind::kFlatten;
  l.input_shape = output_shape();
  l.output_shape = {shape_numel(l.input_shape)};
  return append(std::move(l));
}

void Network::initialize(Rng& rng) {
  for (Layer& l : layers_) {
    if (!l.has_parameters()) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : l.weight.values()) w = dist(rng);
    for (double& b : l.bias.values()) b = 0.0;
  }
}

std::vector<std::size_t> Network::parametric_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_parameters()) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Network::prunable_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_parameters() && layers_[i].prunable) out.push_back(i);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weight.numel() + l.bias.numel();
  return n;
}

std::size_t Network::prunable_weight_count() const {
  std::size_t n = 0;
  for (std::size_t i : prunable_layers()) n += layers_[i].weight.numel();
  return n;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers_) {
    if (!l.has_parameters()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const Layer& l : layers_) {
    if (!l.has_parameters()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

void Network::zero_grad() {
  for (Tensor* p : parameters()) p->drop_grad();
}

void Network::check_input(const Shape& batch_shape) const {
  const bool ok = batch_shape.size() == input_shape_.size() + 1 &&
                  std::equal(input_shape_.begin(), input_shape_.end(), batch_shape.begin() + 1);
  if (!ok) {
    throw ShapeError("layer 0 (" +
                     std::string(layers_.empty() ? "input" : to_string(layers_[0].kind)) +
                     "): expected batch of " + shape_to_string(input_shape_) + ", got " +
                     shape_to_string(batch_shape));
  }
}

ad::Var Network::forward(ad::Graph& g, ad::Var x, const WeightSource& source) const {
  check_input(x.shape());
  ad::Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    try {
      switch (l.kind) {
        case LayerKind::kDense:
          h = ad::linear(h, source.weight(g, *this, i), source.bias(g, *this, i));
          break;
        case LayerKind::kConv:
          h = ad::conv2d(h, source.weight(g, *this, i), source.bias(g, *this, i), l.conv);
          break;
        case LayerKind::kRelu:
          h = ad::relu(h);
          break;
        case LayerKind::kFlatten:
          h = ad::flatten(h);
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError(l.describe(i) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(l.describe(i) + ": " + e.what());
    }
  }
  return h;
}

std::pair<ad::Var, ad::Var> Network::forward_interval(ad::Graph& g, ad::Var lower, ad::Var upper,
                                                      const WeightSource& source) const {
  check_input(lower.shape());
  check_input(upper.shape());
  ad::Var lo = lower, hi = upper;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    try {
      switch (l.kind) {
        case LayerKind::kDense:
        case LayerKind::kConv: {
          const ad::Var w = source.weight(g, *this, i);
          const ad::Var b = source.bias(g, *this, i);
          const ad::Var center = ad::scale(ad::add(hi, lo), 0.5);
          const ad::Var radius = ad::scale(ad::sub(hi, lo), 0.5);
          const ad::Var abs_w = ad::abs(w);
          ad::Var c2, r2;
          if (l.kind == LayerKind::kDense) {
            c2 = ad::linear(center, w, b);
            r2 = ad::linear(radius, abs_w);
          } else {
            c2 = ad::conv2d(center, w, b, l.conv);
            r2 = ad::conv2d(radius, abs_w, std::nullopt, l.conv);
          }
          lo = ad::sub(c2, r2);
          hi = ad::add(c2, r2);
          break;
        }
        case LayerKind::kRelu:
          lo = ad::relu(lo);
          hi = ad::relu(hi);
          break;
        case LayerKind::kFlatten:
          lo = ad::flatten(lo);
          hi = ad::flatten(hi);
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError(l.describe(i) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(l.describe(i) + ": " + e.what());
    }
  }
  return {lo, hi};
}

Tensor Network::logits(const Tensor& x) const { return logits(x, FrozenWeights{}); }

Tensor Network::logits(const Tensor& x, const WeightSource& source) const {
  ad::Graph g;
  return forward(g, g.constant_ref(x), source).value();
}

// ---------------------------------------------------------------------------
// Architectures

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names{"cnn-small", "cnn-large", "vgg4", "mlp-2x256"};
  return names;
}

Network build_architecture(std::string_view name, const Shape& input_shape,
                           std::size_t num_classes, std::uint64_t weight_seed) {
  if (num_classes < 2) throw ConfigError("need at least two classes");
  Network net{std::string(name), input_shape};
  const ad::ConvGeometry k3s1{3, 1, 1};
  const ad::ConvGeometry k3s2{3, 2, 1};
  const ad::ConvGeometry k4s2{4, 2, 1};
  if (name == "cnn-small") {
    net.conv(16, k4s2).relu().conv(32, k4s2).relu().flatten();
    net.dense(100).relu().dense(num_classes);
  } else if (name == "cnn-large") {
    net.conv(32, k3s1).relu().conv(32, k4s2).relu().conv(64, k3s1).relu().conv(64, k4s2).relu();
    net.flatten().dense(512).relu().dense(512).relu().dense(num_classes);
  } else if (name == "vgg4") {
    net.conv(64, k3s2).relu().conv(64, k3s2).relu().conv(128, k3s2).relu().conv(128, k3s2).relu();
    net.flatten().dense(256).relu().dense(256).relu().dense(num_classes);
  } else if (name == "mlp-2x256") {
    net.flatten().dense(256).relu().dense(256).relu().dense(num_classes);
  } else {
    std::string valid;
    for (const auto& n : architecture_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown architecture '" + std::string(name) + "'; valid names: " + valid);
  }
  Rng rng = make_rng(weight_seed, {tag(StreamTag::kWeights)});
  net.initialize(rng);
  return net;
}

}  // namespace robustprune
