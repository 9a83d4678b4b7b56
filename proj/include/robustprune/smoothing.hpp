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

// Randomized-smoothing certification with Gaussian noise: Monte Carlo class
// selection, an exact one-sided Clopper-Pearson bound on the top-class
// probability and the l2 radius sigma * inverse_normal_cdf(p_lower).

#ifndef ROBUSTPRUNE_SMOOTHING_HPP_
#define ROBUSTPRUNE_SMOOTHING_HPP_

#include <cstddef>
#include <cstdint>

#include "robustprune/network.hpp"

namespace robustprune {

// P[Binomial(trials, p) >= successes], summed exactly in log space.
double binomial_upper_tail(std::size_t successes, std::size_t trials, double p);

// One-sided exact lower confidence bound: the p at which
// P[Binomial(trials, p) >= successes] == alpha, found by bisection.
double clopper_pearson_lower(std::size_t successes, std::size_t trials, double alpha);

double normal_cdf(double x);
// Bisection on normal_cdf to an absolute tolerance of 1e-12.
double inverse_normal_cdf(double p);

struct SmoothingConfig {
  // Standard deviation of the Gaussian noise.
  double sigma = 0.25;
  std::size_t n0 = 100;
  std::size_t n = 10000;
  double alpha = 1e-3;
  double l2_budget = 110.0 / 255.0;
  // Noisy copies classified per forward pass.
  std::size_t batch = 500;

  void validate() const;
};

struct Certificate {
  bool abstain = true;
  int predicted = -1;
  double p_lower = 0.0;
  double radius = 0.0;
  // radius >= l2_budget and not abstaining.
  bool certified = false;
};

// Turns a top-class lower bound into a certificate: abstain when
// p_lower <= 0.5, otherwise radius = sigma * inverse_normal_cdf(p_lower).
Certificate certificate_from_bound(int predicted, double p_lower, double sigma, double l2_budget);

// Certifies one example x of shape [C, H, W] (or [1, C, H, W]). The class is
// chosen from n0 noisy votes; its probability is bounded with n fresh votes.
Certificate smoothing_certify(const Network& net, const WeightSource& weights, const Tensor& x,
                              const SmoothingConfig& cfg, std::uint64_t seed);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_SMOOTHING_HPP_
