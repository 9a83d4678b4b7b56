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

#include <cmath>

#include "gtest/gtest.h"

#include "robustprune/errors.hpp"
#include "robustprune/network.hpp"

namespace robustprune {
namespace {

std::vector<std::size_t> widths(const Network& net) {
  std::vector<std::size_t> out;
  for (std::size_t i : net.parametric_layers()) out.push_back(net.layers()[i].weight.dim(0));
  return out;
}

TEST(ArchitectureTest, CnnSmallLayout) {
  const Network net = build_architecture("cnn-small", {1, 28, 28}, 10);
  EXPECT_EQ(widths(net), (std::vector<std::size_t>{16, 32, 100, 10}));
  EXPECT_EQ(net.layers()[0].kind, LayerKind::kConv);
  EXPECT_EQ(net.output_shape(), (Shape{10}));
}

// Table sizes: 0.21m, 0.46m and 2.46m on 32x32x3 inputs. The table prints
// two decimals, so anything within 0.01m of the printed value is accepted.
TEST(ArchitectureTest, ParameterCountsMatchTable) {
  const Shape cifar{3, 32, 32};
  EXPECT_NEAR(build_architecture("cnn-small", cifar, 10).parameter_count() / 1e6, 0.21, 0.01);
  EXPECT_NEAR(build_architecture("vgg4", cifar, 10).parameter_count() / 1e6, 0.46, 0.01);
  EXPECT_NEAR(build_architecture("cnn-large", cifar, 10).parameter_count() / 1e6, 2.46, 0.01);
}

TEST(ArchitectureTest, MlpCountIsArithmetic) {
  const Network net = build_architecture("mlp-2x256", {1, 28, 28}, 10);
  EXPECT_EQ(net.prunable_weight_count(), 784u * 256 + 256u * 256 + 256u * 10);
  EXPECT_EQ(net.parameter_count(), 784u * 256 + 256u * 256 + 256u * 10 + 256 + 256 + 10);
}

TEST(ArchitectureTest, UnknownNameListsChoices) {
  try {
    build_architecture("resnet", {1, 28, 28}, 10);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("mlp-2x256"), std::string::npos);
  }
}

TEST(ArchitectureTest, KaimingUniformBoundAndSeed) {
  const Network a = build_architecture("mlp-2x256", {1, 28, 28}, 10, 5);
  const Network b = build_architecture("mlp-2x256", {1, 28, 28}, 10, 5);
  const Network c = build_architecture("mlp-2x256", {1, 28, 28}, 10, 6);
  for (std::size_t i : a.parametric_layers()) {
    const Layer& l = a.layers()[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in));
    for (double v : l.weight.values()) EXPECT_LE(std::fabs(v), bound);
    EXPECT_EQ(l.weight, b.layers()[i].weight);
    EXPECT_FALSE(l.weight == c.layers()[i].weight);
    EXPECT_TRUE(l.prunable);
  }
}

}  // namespace
}  // namespace robustprune
