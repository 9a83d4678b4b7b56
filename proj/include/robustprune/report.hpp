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

#ifndef ROBUSTPRUNE_REPORT_HPP_
#define ROBUSTPRUNE_REPORT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustprune/metrics.hpp"
#include "robustprune/pruning.hpp"
#include "robustprune/training.hpp"

namespace robustprune {

struct LayerSparsity {
  std::size_t layer = 0;
  std::string kind;
  std::size_t kept = 0;
  std::size_t total = 0;
};

struct RunResult {
  std::string run_id;
  std::string architecture;
  std::string dataset;
  std::string method;
  double ratio = 0.0;
  std::string stage_objectives;
  std::uint64_t seed = 0;
  Metrics metrics;
  // Weights plus biases of the dense network.
  std::size_t params_total = 0;
  // params_total minus the weights the mask removes.
  std::size_t params_kept = 0;
  double wall_seconds = 0.0;
  // Per pruned layer; empty when no mask was built.
  std::vector<LayerSparsity> layers;
  // Percentage of pruned-layer weights removed.
  double achieved_sparsity = 0.0;
  std::vector<StageLog> logs;
  std::optional<QuantizationReport> quantization;
  // ok, time_limit or diverged; failed runs carry partial results.
  std::string status = "ok";
  std::string error;
  // Set for sweep cells.
  std::string sweep_axis;
  std::string sweep_value;
};

// The fixed column list, comma-separated.
std::string csv_header();
// Absent metrics are written as empty fields.
std::string csv_row(const RunResult& r);

nlohmann::json result_json(const RunResult& r);
// Per-epoch loss, gradient-norm and held-batch traces of every stage.
nlohmann::json trace_json(const RunResult& r);

// Writes report.csv, report.json and traces/<run_id>.json under `dir`.
// Rows are ordered by (run_id, seed).
void write_report(std::vector<RunResult> results, const std::filesystem::path& dir);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_REPORT_HPP_
