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

#ifndef ROBUSTPRUNE_METRICS_HPP_
#define ROBUSTPRUNE_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "robustprune/dataset.hpp"
#include "robustprune/network.hpp"
#include "robustprune/objectives.hpp"
#include "robustprune/smoothing.hpp"

namespace robustprune {

enum class Metric { kBenign, kEra, kVraT, kVraS };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

struct EvalConfig {
  std::vector<Metric> metrics{Metric::kBenign};
  // Required for era.
  std::optional<AttackConfig> attack;
  // Required for vra_t.
  std::optional<double> ibp_epsilon;
  // Required for vra_s.
  std::optional<SmoothingConfig> smoothing;
  // Examples per evaluation chunk. Chunks are fixed regardless of the thread
  // count, so results do not depend on parallelism.
  std::size_t batch_size = 250;
  // 0 picks the hardware concurrency; 1 disables parallelism.
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  // Evaluate only the first `limit` examples (0 = all).
  std::size_t limit = 0;
  // Smoothing certification is far costlier; it covers only the first
  // `smoothing_limit` evaluated examples (0 = all).
  std::size_t smoothing_limit = 100;

  bool wants(Metric m) const;
  // Rejects requested metrics whose configuration is missing.
  void validate() const;
};

// Fractions in [0, 1]; unset when not requested.
struct Metrics {
  std::optional<double> benign;
  std::optional<double> era;
  std::optional<double> vra_t;
  std::optional<double> vra_s;
  std::size_t examples = 0;
  std::size_t smoothing_examples = 0;
};

// era counts an example when it is classified correctly both clean and at
// the PGD output. vra_t needs the label's lower bound to beat every other
// class's upper bound strictly. vra_s counts certified, correct, non-abstain
// examples. The weights are materialized once, so any source may be passed.
Metrics evaluate_metrics(const Network& net, const WeightSource& weights, const Dataset& data,
                         const EvalConfig& cfg);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_METRICS_HPP_
