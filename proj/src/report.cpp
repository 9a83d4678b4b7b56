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

#include "robustprune/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "robustprune/errors.hpp"

namespace robustprune {

using nlohmann::json;

namespace {

std::string number(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string metric(const std::optional<double>& v) { return v ? number(*v) : ""; }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string csv_header() {
  return "run_id,architecture,dataset,p,stage_objectives,seed,benign_acc,era,vra_t,vra_s,"
         "params_total,params_kept,wall_seconds";
}

std::string csv_row(const RunResult& r) {
  std::string row;
  for (const std::string& f :
       {field(r.run_id), field(r.architecture), field(r.dataset), number(r.ratio, "%g"),
        field(r.stage_objectives), std::to_string(r.seed), metric(r.metrics.benign),
        metric(r.metrics.era), metric(r.metrics.vra_t), metric(r.metrics.vra_s),
        std::to_string(r.params_total), std::to_string(r.params_kept),
        number(r.wall_seconds, "%.3f")}) {
    if (!row.empty()) row += ',';
    row += f;
  }
  return row;
}

json result_json(const RunResult& r) {
  json layers = json::array();
  for (const LayerSparsity& l : r.layers) {
    layers.push_back({{"layer", l.layer}, {"kind", l.kind}, {"kept", l.kept}, {"total", l.total}});
  }
  json j = {
      {"run_id", r.run_id},
      {"architecture", r.architecture},
      {"dataset", r.dataset},
      {"method", r.method},
      {"p", r.ratio},
      {"stage_objectives", r.stage_objectives},
      {"seed", r.seed},
      {"benign_acc", opt(r.metrics.benign)},
      {"era", opt(r.metrics.era)},
      {"vra_t", opt(r.metrics.vra_t)},
      {"vra_s", opt(r.metrics.vra_s)},
      {"eval_examples", r.metrics.examples},
      {"smoothing_examples", r.metrics.smoothing_examples},
      {"params_total", r.params_total},
      {"params_kept", r.params_kept},
      {"wall_seconds", r.wall_seconds},
      {"achieved_sparsity", r.achieved_sparsity},
      {"layers", layers},
      {"status", r.status},
      {"error", r.error},
  };
  if (!r.sweep_axis.empty()) {
    j["sweep_axis"] = r.sweep_axis;
    j["sweep_value"] = r.sweep_value;
  }
  if (r.quantization) {
    j["quantization"] = {{"bits", r.quantization->bits},
                         {"step", r.quantization->step},
                         {"max_error", r.quantization->max_error}};
  }
  j["traces"] = trace_json(r);
  return j;
}

json trace_json(const RunResult& r) {
  json stages = json::array();
  for (const StageLog& s : r.logs) {
    json epochs = json::array();
    for (const EpochRecord& e : s.epochs) {
      epochs.push_back({{"epoch", e.epoch},
                        {"loss", e.loss},
                        {"grad_norm", e.grad_norm},
                        {"held_loss", opt(e.held_loss)}});
    }
    stages.push_back({{"stage", s.stage},
                      {"steps", s.steps},
                      {"seconds", s.seconds},
                      {"initial_held_loss", opt(s.initial_held_loss)},
                      {"epochs", epochs}});
  }
  return stages;
}

void write_report(std::vector<RunResult> results, const std::filesystem::path& dir) {
  std::stable_sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    return a.run_id != b.run_id ? a.run_id < b.run_id : a.seed < b.seed;
  });
  std::error_code ec;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());

  std::string csv = csv_header() + "\n";
  json rows = json::array();
  std::map<std::string, json> traces;
  for (const RunResult& r : results) {
    csv += csv_row(r) + "\n";
    rows.push_back(result_json(r));
    traces[r.run_id].push_back({{"seed", r.seed}, {"stages", trace_json(r)}});
  }
  write_text(dir / "report.csv", csv);
  write_text(dir / "report.json", json{{"runs", rows}}.dump(2) + "\n");
  for (const auto& [run_id, t] : traces) {
    write_text(dir / "traces" / (run_id + ".json"), json{{"run_id", run_id}, {"seeds", t}}.dump(2) + "\n");
  }
}

}  // namespace robustprune
