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

// Pipeline configuration and its JSON form. The schema is versioned; unknown
// keys are rejected so typos do not silently fall back to defaults. See
// README.md for the full key tree.

#ifndef ROBUSTPRUNE_CONFIG_HPP_
#define ROBUSTPRUNE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "robustprune/metrics.hpp"
#include "robustprune/objectives.hpp"
#include "robustprune/pruning.hpp"
#include "robustprune/smoothing.hpp"

namespace robustprune {

inline constexpr int kConfigSchemaVersion = 1;

enum class Method { kHydra, kLwm, kScratch, kMultiStepLwm };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct DatasetConfig {
  std::string name = "mnist";
  // "idx" or "cifar".
  std::string format = "idx";
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::vector<std::string> train_batches;
  std::vector<std::string> test_batches;
  // Keep only the first N examples after loading (0 = all).
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

struct StageConfig {
  ObjectiveKind objective = ObjectiveKind::kAdversarial;
  std::size_t epochs = 0;
  double lr = 0.1;
};

struct PruneSettings {
  double ratio = 99.0;
  Granularity granularity = Granularity::kWeight;
  double scaling_k = 6.0;
  ScoreInit init = ScoreInit::kScaled;
  // Fraction of the training split the pruning step sees.
  double data_fraction = 1.0;
  // When false the final classifier layer is never pruned.
  bool prune_classifier = true;
  // Ratios for the multi-step LWM baseline; the last one must equal ratio.
  std::vector<double> schedule;
};

struct TrainingSettings {
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 0.0;
  AttackConfig attack{.epsilon = 0.1, .steps = 10, .step_size = std::nullopt};
  EpsilonSchedule ibp{.target = 0.1, .ramp_epochs = 0.0};
  double sigma = 0.25;
};

struct EvalSettings {
  // Empty: benign, era and the vra matching the finetune objective.
  std::vector<Metric> metrics;
  AttackConfig attack{
      .epsilon = 0.1, .steps = 50, .step_size = std::nullopt, .restarts = 10, .random_start = true};
  double ibp_epsilon = 0.1;
  SmoothingConfig smoothing;
  std::size_t limit = 0;
  std::size_t smoothing_limit = 100;
  std::size_t batch_size = 250;
  std::size_t threads = 1;
};

struct Seeds {
  std::uint64_t base = 0;
  std::optional<std::uint64_t> weights;
  std::optional<std::uint64_t> data;
  std::optional<std::uint64_t> attack;

  // Explicit value, or a stream derived from `base`.
  std::uint64_t weights_seed() const;
  std::uint64_t data_seed() const;
  std::uint64_t attack_seed() const;
};

struct PipelineConfig {
  int schema_version = kConfigSchemaVersion;
  std::string run_id = "run";
  std::string architecture = "mlp-2x256";
  Method method = Method::kHydra;
  DatasetConfig dataset;
  StageConfig pretrain{ObjectiveKind::kAdversarial, 10, 0.1};
  StageConfig prune{ObjectiveKind::kAdversarial, 20, 0.1};
  StageConfig finetune{ObjectiveKind::kAdversarial, 10, 0.01};
  PruneSettings pruning;
  TrainingSettings training;
  EvalSettings eval;
  Seeds seeds;
  std::string output_dir = "out";
  // 0 disables the wall-clock guard.
  double time_limit_seconds = 0.0;
  std::optional<int> quantize_bits;

  // "pretrain/prune/finetune" objective tags.
  std::string stage_objectives() const;
  // Metrics the final evaluation computes.
  EvalConfig eval_config(std::uint64_t seed) const;
  // Throws ConfigError on the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

// FNV-1a 64 of the canonical JSON, as 16 hex digits. output_dir and run_id
// are excluded so moved or renamed runs keep their digest.
std::string config_digest(const PipelineConfig& cfg);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_CONFIG_HPP_
