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

#include "robustprune/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "robustprune/errors.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

namespace {

struct Counts {
  std::size_t benign = 0, era = 0, vra_t = 0, vra_s = 0, smoothed = 0;
};

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data() + r * classes;
    out[r] = static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return out;
}

Counts evaluate_chunk(const Network& net, const WeightSource& weights, const Dataset& data,
                      const EvalConfig& cfg, std::size_t begin, std::size_t end,
                      std::size_t smoothing_end) {
  Counts c;
  const Batch b = slice_batch(data, begin, end);
  const std::vector<int> clean = argmax_rows(net.logits(b.x, weights));
  for (std::size_t i = 0; i < clean.size(); ++i) c.benign += clean[i] == b.y[i];

  if (cfg.wants(Metric::kEra)) {
    const Tensor x_adv = pgd_attack(net, weights, b.x, b.y, *cfg.attack,
                                    derive_seed(cfg.seed, {tag(StreamTag::kEval)}), b.ids);
    const std::vector<int> adv = argmax_rows(net.logits(x_adv, weights));
    for (std::size_t i = 0; i < adv.size(); ++i) c.era += clean[i] == b.y[i] && adv[i] == b.y[i];
  }
  if (cfg.wants(Metric::kVraT)) {
    const Interval box = ibp_propagate(net, weights, b.x, *cfg.ibp_epsilon);
    const std::size_t classes = box.lower.dim(1);
    for (std::size_t i = 0; i < b.y.size(); ++i) {
      const auto y = static_cast<std::size_t>(b.y[i]);
      const double floor_y = box.lower[i * classes + y];
      bool verified = true;
      for (std::size_t k = 0; k < classes && verified; ++k) {
        if (k != y && !(floor_y > box.upper[i * classes + k])) verified = false;
      }
      c.vra_t += verified;
    }
  }
  if (cfg.wants(Metric::kVraS)) {
    const std::size_t per = shape_numel(data.example_shape());
    for (std::size_t i = begin; i < std::min(end, smoothing_end); ++i) {
      Tensor x(data.example_shape());
      std::copy_n(data.images.data() + i * per, per, x.data());
      const Certificate cert = smoothing_certify(
          net, weights, x, *cfg.smoothing, derive_seed(cfg.seed, {tag(StreamTag::kEval), i}));
      c.vra_s += cert.certified && cert.predicted == data.labels[i];
      ++c.smoothed;
    }
  }
  return c;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kBenign:
      return "benign";
    case Metric::kEra:
      return "era";
    case Metric::kVraT:
      return "vra_t";
    case Metric::kVraS:
      return "vra_s";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : {Metric::kBenign, Metric::kEra, Metric::kVraT, Metric::kVraS}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "'; valid: benign, era, vra_t, vra_s");
}

bool EvalConfig::wants(Metric m) const {
  return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
}

void EvalConfig::validate() const {
  if (batch_size == 0) throw ConfigError("evaluation batch size must be positive");
  if (wants(Metric::kEra)) {
    if (!attack) throw ConfigError("era requested without an attack configuration");
    attack->validate();
  }
  if (wants(Metric::kVraT)) {
    if (!ibp_epsilon) throw ConfigError("vra_t requested without an IBP epsilon");
    if (!(*ibp_epsilon >= 0.0)) throw ConfigError("IBP epsilon must be >= 0");
  }
  if (wants(Metric::kVraS)) {
    if (!smoothing) throw ConfigError("vra_s requested without a smoothing configuration");
    smoothing->validate();
  }
}

Metrics evaluate_metrics(const Network& net, const WeightSource& weights, const Dataset& data,
                         const EvalConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
  net.check_input(data.images.shape());
  // Constant weights make concurrent forward/backward passes race-free.
  const SubstitutedWeights frozen(weights.effective_weights(net));

  const std::size_t n = cfg.limit ? std::min(cfg.limit, data.size()) : data.size();
  const std::size_t smoothing_end = cfg.smoothing_limit ? std::min(cfg.smoothing_limit, n) : n;
  const std::size_t chunks = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<Counts> results(chunks);

  std::size_t threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < chunks;) {
      try {
        const std::size_t begin = k * cfg.batch_size;
        results[k] = evaluate_chunk(net, frozen, data, cfg, begin,
                                    std::min(n, begin + cfg.batch_size), smoothing_end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  Counts total;
  for (const Counts& c : results) {
    total.benign += c.benign;
    total.era += c.era;
    total.vra_t += c.vra_t;
    total.vra_s += c.vra_s;
    total.smoothed += c.smoothed;
  }
  Metrics m;
  m.examples = n;
  const auto frac = [](std::size_t k, std::size_t d) {
    return static_cast<double>(k) / static_cast<double>(d);
  };
  if (cfg.wants(Metric::kBenign)) m.benign = frac(total.benign, n);
  if (cfg.wants(Metric::kEra)) m.era = frac(total.era, n);
  if (cfg.wants(Metric::kVraT)) m.vra_t = frac(total.vra_t, n);
  if (cfg.wants(Metric::kVraS)) {
    m.smoothing_examples = total.smoothed;
    m.vra_s = frac(total.vra_s, total.smoothed);
  }
  return m;
}

}  // namespace robustprune
