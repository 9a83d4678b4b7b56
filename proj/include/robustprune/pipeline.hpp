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

// End-to-end orchestration: pretrain -> score init -> score optimization ->
// mask -> finetune -> evaluation, with checkpoints between stages and
// parameter sweeps on top.

#ifndef ROBUSTPRUNE_PIPELINE_HPP_
#define ROBUSTPRUNE_PIPELINE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robustprune/checkpoint.hpp"
#include "robustprune/config.hpp"
#include "robustprune/dataset.hpp"
#include "robustprune/report.hpp"
#include "robustprune/training.hpp"

namespace robustprune {

enum class Stage { kPretrain, kPrune, kFinetune, kEval };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

struct DataBundle {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Loads the configured files, applies the example limits and carves the
// 90/10 train/validation split from the data seed.
DataBundle load_data(const PipelineConfig& cfg);

struct PipelineState {
  Network net{"empty", {1}};
  std::optional<ImportanceScores> scores;
  std::optional<PruneMask> mask;
  // Last completed stage.
  std::string stage;
};

PipelineState state_from_checkpoint(const Checkpoint& ckpt);

struct RunOptions {
  Stage first = Stage::kPretrain;
  Stage last = Stage::kEval;
  // Starting point when first != kPretrain.
  std::optional<PipelineState> initial;
  // Loaded from the config when null.
  const DataBundle* data = nullptr;
  bool write_checkpoints = true;
  bool write_report = true;
  // Shared wall-clock guard; built from time_limit_seconds when unset.
  std::optional<Deadline> deadline;
  // Filled with the state after the last stage when non-null.
  PipelineState* final_state = nullptr;
  // Checkpoint digest mismatches and similar notices.
  std::vector<std::string>* warnings = nullptr;
  StepObserver observer;
  MaskObserver mask_observer;
};

// Runs stages [first, last]. Checkpoints go to
// <output_dir>/checkpoints/<stage>.ckpt, the report to <output_dir>. On
// divergence or time limit a partial report is written and the error
// rethrown.
RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

// Applies one sweep value to a config: prune_epochs, data_fraction,
// scaling_k, ratio or init_kind.
void apply_sweep_value(PipelineConfig& cfg, std::string_view axis, const std::string& value);

// One full pipeline per (value, seed); pretraining is shared per seed. Cells
// write under <output_dir>/<axis>=<value>/seed-<seed>; the aggregated report
// goes to <output_dir>.
std::vector<RunResult> run_sweep(const PipelineConfig& base, std::string_view axis,
                                 const std::vector<std::string>& values,
                                 const std::vector<std::uint64_t>& seeds,
                                 const DataBundle* data = nullptr);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_PIPELINE_HPP_
