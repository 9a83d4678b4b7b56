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

// Small fixtures shared by the unit tests and the acceptance runner.

#ifndef ROBUSTPRUNE_TESTS_TEST_UTIL_HPP_
#define ROBUSTPRUNE_TESTS_TEST_UTIL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "robustprune/dataset.hpp"
#include "robustprune/network.hpp"
#include "robustprune/rng.hpp"
#include "robustprune/tensor.hpp"

namespace robustprune::testing {

inline Tensor uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (int& v : y) v = u(rng);
  return y;
}

// Dense relu network on [features] inputs.
inline Network random_mlp(std::size_t features, std::vector<std::size_t> widths,
                          std::uint64_t seed) {
  Network net("test-mlp", {features});
  for (std::size_t i = 0; i < widths.size(); ++i) {
    net.dense(widths[i]);
    if (i + 1 < widths.size()) net.relu();
  }
  Rng rng = make_rng(seed);
  net.initialize(rng);
  // Nonzero biases exercise the bias paths too.
  for (Layer& l : net.layers()) {
    if (!l.has_parameters()) continue;
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (double& b : l.bias.values()) b = u(rng);
  }
  return net;
}

// conv -> relu -> conv -> relu -> flatten -> dense on [channels, side, side].
inline Network random_convnet(std::size_t channels, std::size_t side, std::size_t classes,
                              std::uint64_t seed) {
  Network net("test-cnn", {channels, side, side});
  net.conv(3, {3, 1, 1}).relu().conv(4, {3, 2, 1}).relu().flatten().dense(classes);
  Rng rng = make_rng(seed);
  net.initialize(rng);
  for (Layer& l : net.layers()) {
    if (!l.has_parameters()) continue;
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (double& b : l.bias.values()) b = u(rng);
  }
  return net;
}

// Two separable blobs of images in [0, 1]: class c brightens row band c.
inline Dataset banded_dataset(std::size_t n, std::size_t classes, std::size_t side,
                              std::uint64_t seed) {
  Dataset d;
  d.num_classes = classes;
  d.images = Tensor({n, 1, side, side});
  d.labels.resize(n);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.3);
  const std::size_t band = side / classes;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    d.labels[i] = c;
    double* img = d.images.data() + i * side * side;
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t col = 0; col < side; ++col) {
        const bool on = r / band == static_cast<std::size_t>(c);
        img[r * side + col] = on ? 1.0 - noise(rng) : noise(rng);
      }
    }
  }
  return d;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("robustprune-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace robustprune::testing

#endif  // ROBUSTPRUNE_TESTS_TEST_UTIL_HPP_
