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

#include "robustprune/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "robustprune/errors.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

double binomial_upper_tail(std::size_t successes, std::size_t trials, double p) {
  if (successes > trials) throw ConfigError("successes exceed trials");
  if (successes == 0) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const auto n = static_cast<double>(trials);
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_n_fact = std::lgamma(n + 1.0);
  std::vector<double> terms;
  terms.reserve(trials - successes + 1);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = successes; i <= trials; ++i) {
    const auto k = static_cast<double>(i);
    const double t = log_n_fact - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * log_p +
                     (n - k) * log_q;
    terms.push_back(t);
    peak = std::max(peak, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return std::min(1.0, std::exp(peak) * acc);
}

double clopper_pearson_lower(std::size_t successes, std::size_t trials, double alpha) {
  if (trials == 0) throw ConfigError("clopper_pearson_lower needs trials > 0");
  if (successes > trials) throw ConfigError("successes exceed trials");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (successes == 0) return 0.0;
  // The tail is increasing in p; keep the invariant tail(lo) <= alpha < tail(hi).
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_upper_tail(successes, trials, mid) <= alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("inverse_normal_cdf needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void SmoothingConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("smoothing sigma must be positive");
  if (n0 == 0 || n == 0) throw ConfigError("smoothing sample counts must be positive");
  if (n0 > n) throw ConfigError("smoothing needs n0 <= n");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("smoothing alpha must lie in (0, 1)");
  if (!(l2_budget >= 0.0)) throw ConfigError("l2 budget must be >= 0");
  if (batch == 0) throw ConfigError("smoothing batch must be positive");
}

Certificate certificate_from_bound(int predicted, double p_lower, double sigma,
                                   double l2_budget) {
  Certificate c;
  c.predicted = predicted;
  c.p_lower = p_lower;
  if (!(p_lower > 0.5)) return c;
  c.abstain = false;
  c.radius = p_lower >= 1.0 ? std::numeric_limits<double>::infinity()
                            : sigma * inverse_normal_cdf(p_lower);
  c.certified = c.radius >= l2_budget;
  return c;
}

namespace {

// Class counts of `draws` noisy copies of x. Chunk k uses its own stream so
// the counts do not depend on anything but (seed, phase, draws, batch).
std::vector<std::size_t> noisy_votes(const Network& net, const WeightSource& weights,
                                     const Tensor& x, const SmoothingConfig& cfg,
                                     std::uint64_t seed, std::uint64_t phase, std::size_t draws) {
  const std::size_t per = x.numel();
  const std::size_t classes = net.num_classes();
  std::vector<std::size_t> counts(classes, 0);
  Shape shape{0};
  shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
  for (std::size_t start = 0, chunk = 0; start < draws; start += cfg.batch, ++chunk) {
    const std::size_t m = std::min(cfg.batch, draws - start);
    shape[0] = m;
    Tensor noisy(shape);
    Rng rng = make_rng(seed, {tag(StreamTag::kNoise), phase, chunk});
    std::normal_distribution<double> dist(0.0, cfg.sigma);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t j = 0; j < per; ++j) noisy[k * per + j] = x[j] + dist(rng);
    }
    const Tensor logits = net.logits(noisy, weights);
    for (std::size_t k = 0; k < m; ++k) {
      const double* row = logits.data() + k * classes;
      ++counts[static_cast<std::size_t>(std::max_element(row, row + classes) - row)];
    }
  }
  return counts;
}

}  // namespace

Certificate smoothing_certify(const Network& net, const WeightSource& weights, const Tensor& x,
                              const SmoothingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (x.numel() != shape_numel(net.input_shape())) {
    throw ShapeError("smoothing_certify: example of shape " + shape_to_string(x.shape()) +
                     " does not match network input " + shape_to_string(net.input_shape()));
  }
  const std::vector<std::size_t> selection = noisy_votes(net, weights, x, cfg, seed, 0, cfg.n0);
  const auto top = static_cast<int>(std::max_element(selection.begin(), selection.end()) -
                                    selection.begin());
  const std::vector<std::size_t> estimation = noisy_votes(net, weights, x, cfg, seed, 1, cfg.n);
  const double p_lower = clopper_pearson_lower(estimation[static_cast<std::size_t>(top)], cfg.n,
                                               cfg.alpha);
  return certificate_from_bound(top, p_lower, cfg.sigma, cfg.l2_budget);
}

}  // namespace robustprune
