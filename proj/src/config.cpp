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

#include "robustprune/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "robustprune/errors.hpp"
#include "robustprune/network.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  // Parses a string field through `parse`.
  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    out = parse(s);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const char* key = nullptr) const {
    std::string w = path_.empty() ? "config" : path_;
    if (key) w += (path_.empty() ? ": " : ".") + std::string(key);
    return w;
  }
  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + sub(k.c_str()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json attack_json(const AttackConfig& a) {
  return {{"epsilon", a.epsilon},
          {"steps", a.steps},
          {"step_size", a.step_size ? json(*a.step_size) : json(nullptr)},
          {"restarts", a.restarts},
          {"random_start", a.random_start}};
}

void read_attack(const json* j, const std::string& path, AttackConfig& a) {
  if (!j) return;
  ObjectReader r(*j, path);
  r.get("epsilon", a.epsilon);
  r.get("steps", a.steps);
  r.get_optional("step_size", a.step_size);
  r.get("restarts", a.restarts);
  r.get("random_start", a.random_start);
  r.finish();
}

json stage_json(const StageConfig& s) {
  return {{"objective", to_string(s.objective)}, {"epochs", s.epochs}, {"lr", s.lr}};
}

void read_stage(const json* j, const std::string& path, StageConfig& s) {
  if (!j) return;
  ObjectReader r(*j, path);
  r.get_enum("objective", s.objective, parse_objective);
  r.get("epochs", s.epochs);
  r.get("lr", s.lr);
  r.finish();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kHydra:
      return "hydra";
    case Method::kLwm:
      return "lwm";
    case Method::kScratch:
      return "scratch";
    case Method::kMultiStepLwm:
      return "multi-step-lwm";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kHydra, Method::kLwm, Method::kScratch, Method::kMultiStepLwm}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "'; valid: hydra, lwm, scratch, multi-step-lwm");
}

std::uint64_t Seeds::weights_seed() const {
  return weights ? *weights : derive_seed(base, {tag(StreamTag::kWeights)});
}
std::uint64_t Seeds::data_seed() const {
  return data ? *data : derive_seed(base, {tag(StreamTag::kData)});
}
std::uint64_t Seeds::attack_seed() const {
  return attack ? *attack : derive_seed(base, {tag(StreamTag::kAttack)});
}

std::string PipelineConfig::stage_objectives() const {
  return std::string(to_string(pretrain.objective)) + "/" +
         std::string(to_string(prune.objective)) + "/" +
         std::string(to_string(finetune.objective));
}

EvalConfig PipelineConfig::eval_config(std::uint64_t seed) const {
  EvalConfig e;
  e.metrics = eval.metrics;
  if (e.metrics.empty()) {
    e.metrics = {Metric::kBenign, Metric::kEra};
    if (finetune.objective == ObjectiveKind::kIbp) e.metrics.push_back(Metric::kVraT);
    if (finetune.objective == ObjectiveKind::kSmoothing) e.metrics.push_back(Metric::kVraS);
  }
  e.attack = eval.attack;
  e.ibp_epsilon = eval.ibp_epsilon;
  e.smoothing = eval.smoothing;
  e.batch_size = eval.batch_size;
  e.threads = eval.threads;
  e.seed = seed;
  e.limit = eval.limit;
  e.smoothing_limit = eval.smoothing_limit;
  return e;
}

void PipelineConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version) +
                      " (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  if (run_id.empty()) throw ConfigError("run_id must be non-empty");
  const auto& names = architecture_names();
  if (std::find(names.begin(), names.end(), architecture) == names.end()) {
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown architecture '" + architecture + "'; valid: " + valid);
  }
  if (dataset.format != "idx" && dataset.format != "cifar") {
    throw ConfigError("dataset.format must be 'idx' or 'cifar'");
  }
  for (const auto* s : {&pretrain, &prune, &finetune}) {
    if (!(s->lr >= 0.0)) throw ConfigError("stage learning rates must be >= 0");
  }
  validate_ratio(pruning.ratio);
  if (!(pruning.scaling_k > 0.0)) throw ConfigError("prune.scaling_k must be positive");
  if (!(pruning.data_fraction > 0.0 && pruning.data_fraction <= 1.0)) {
    throw ConfigError("prune.data_fraction must lie in (0, 1]");
  }
  if (pruning.granularity == Granularity::kFilter && pruning.init != ScoreInit::kScaled) {
    throw ConfigError("filter pruning supports only the scaled score init");
  }
  if (method == Method::kMultiStepLwm) {
    if (pruning.schedule.empty()) throw ConfigError("multi-step-lwm needs prune.schedule");
    if (pruning.schedule.back() != pruning.ratio) {
      throw ConfigError("prune.schedule must end at prune.ratio");
    }
    if (pruning.granularity != Granularity::kWeight) {
      throw ConfigError("multi-step-lwm supports weight granularity only");
    }
  }
  if (training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
  if (!(training.momentum >= 0.0 && training.momentum < 1.0)) {
    throw ConfigError("training.momentum must lie in [0, 1)");
  }
  training.attack.validate();
  if (!(training.sigma > 0.0)) throw ConfigError("training.sigma must be positive");
  if (!(training.ibp.target >= 0.0)) throw ConfigError("training.ibp.epsilon must be >= 0");
  eval_config(0).validate();
  if (!(time_limit_seconds >= 0.0)) throw ConfigError("time_limit_seconds must be >= 0");
  if (quantize_bits && (*quantize_bits < 2 || *quantize_bits > 16)) {
    throw ConfigError("quantize_bits must lie in [2, 16]");
  }
}

json to_json(const PipelineConfig& c) {
  json metrics = json::array();
  for (Metric m : c.eval.metrics) metrics.push_back(to_string(m));
  const auto opt_seed = [](const std::optional<std::uint64_t>& s) {
    return s ? json(*s) : json(nullptr);
  };
  return {
      {"schema_version", c.schema_version},
      {"run_id", c.run_id},
      {"architecture", c.architecture},
      {"method", to_string(c.method)},
      {"dataset",
       {{"name", c.dataset.name},
        {"format", c.dataset.format},
        {"train_images", c.dataset.train_images},
        {"train_labels", c.dataset.train_labels},
        {"test_images", c.dataset.test_images},
        {"test_labels", c.dataset.test_labels},
        {"train_batches", c.dataset.train_batches},
        {"test_batches", c.dataset.test_batches},
        {"train_limit", c.dataset.train_limit},
        {"test_limit", c.dataset.test_limit}}},
      {"stages",
       {{"pretrain", stage_json(c.pretrain)},
        {"prune", stage_json(c.prune)},
        {"finetune", stage_json(c.finetune)}}},
      {"prune",
       {{"ratio", c.pruning.ratio},
        {"granularity", to_string(c.pruning.granularity)},
        {"scaling_k", c.pruning.scaling_k},
        {"init", to_string(c.pruning.init)},
        {"data_fraction", c.pruning.data_fraction},
        {"prune_classifier", c.pruning.prune_classifier},
        {"schedule", c.pruning.schedule}}},
      {"training",
       {{"batch_size", c.training.batch_size},
        {"momentum", c.training.momentum},
        {"weight_decay", c.training.weight_decay},
        {"attack", attack_json(c.training.attack)},
        {"ibp", {{"epsilon", c.training.ibp.target}, {"ramp_epochs", c.training.ibp.ramp_epochs}}},
        {"sigma", c.training.sigma}}},
      {"eval",
       {{"metrics", metrics},
        {"attack", attack_json(c.eval.attack)},
        {"ibp_epsilon", c.eval.ibp_epsilon},
        {"smoothing",
         {{"sigma", c.eval.smoothing.sigma},
          {"n0", c.eval.smoothing.n0},
          {"n", c.eval.smoothing.n},
          {"alpha", c.eval.smoothing.alpha},
          {"l2_budget", c.eval.smoothing.l2_budget},
          {"batch", c.eval.smoothing.batch}}},
        {"limit", c.eval.limit},
        {"smoothing_limit", c.eval.smoothing_limit},
        {"batch_size", c.eval.batch_size},
        {"threads", c.eval.threads}}},
      {"seeds",
       {{"base", c.seeds.base},
        {"weights", opt_seed(c.seeds.weights)},
        {"data", opt_seed(c.seeds.data)},
        {"attack", opt_seed(c.seeds.attack)}}},
      {"output_dir", c.output_dir},
      {"time_limit_seconds", c.time_limit_seconds},
      {"quantize_bits", c.quantize_bits ? json(*c.quantize_bits) : json(nullptr)},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  ObjectReader r(j, "");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  }
  r.get("run_id", c.run_id);
  r.get("architecture", c.architecture);
  r.get_enum("method", c.method, parse_method);
  if (const json* d = r.child("dataset")) {
    ObjectReader dr(*d, "dataset");
    dr.get("name", c.dataset.name);
    dr.get("format", c.dataset.format);
    dr.get("train_images", c.dataset.train_images);
    dr.get("train_labels", c.dataset.train_labels);
    dr.get("test_images", c.dataset.test_images);
    dr.get("test_labels", c.dataset.test_labels);
    dr.get("train_batches", c.dataset.train_batches);
    dr.get("test_batches", c.dataset.test_batches);
    dr.get("train_limit", c.dataset.train_limit);
    dr.get("test_limit", c.dataset.test_limit);
    dr.finish();
  }
  if (const json* s = r.child("stages")) {
    ObjectReader sr(*s, "stages");
    read_stage(sr.child("pretrain"), "stages.pretrain", c.pretrain);
    read_stage(sr.child("prune"), "stages.prune", c.prune);
    read_stage(sr.child("finetune"), "stages.finetune", c.finetune);
    sr.finish();
  }
  if (const json* p = r.child("prune")) {
    ObjectReader pr(*p, "prune");
    pr.get("ratio", c.pruning.ratio);
    pr.get_enum("granularity", c.pruning.granularity, parse_granularity);
    pr.get("scaling_k", c.pruning.scaling_k);
    pr.get_enum("init", c.pruning.init, parse_score_init);
    pr.get("data_fraction", c.pruning.data_fraction);
    pr.get("prune_classifier", c.pruning.prune_classifier);
    pr.get("schedule", c.pruning.schedule);
    pr.finish();
  }
  if (const json* t = r.child("training")) {
    ObjectReader tr(*t, "training");
    tr.get("batch_size", c.training.batch_size);
    tr.get("momentum", c.training.momentum);
    tr.get("weight_decay", c.training.weight_decay);
    read_attack(tr.child("attack"), "training.attack", c.training.attack);
    if (const json* ibp = tr.child("ibp")) {
      ObjectReader ir(*ibp, "training.ibp");
      ir.get("epsilon", c.training.ibp.target);
      ir.get("ramp_epochs", c.training.ibp.ramp_epochs);
      ir.finish();
    }
    tr.get("sigma", c.training.sigma);
    tr.finish();
  }
  if (const json* e = r.child("eval")) {
    ObjectReader er(*e, "eval");
    std::vector<std::string> names;
    er.get("metrics", names);
    for (const auto& n : names) c.eval.metrics.push_back(parse_metric(n));
    read_attack(er.child("attack"), "eval.attack", c.eval.attack);
    er.get("ibp_epsilon", c.eval.ibp_epsilon);
    if (const json* s = er.child("smoothing")) {
      ObjectReader sr(*s, "eval.smoothing");
      sr.get("sigma", c.eval.smoothing.sigma);
      sr.get("n0", c.eval.smoothing.n0);
      sr.get("n", c.eval.smoothing.n);
      sr.get("alpha", c.eval.smoothing.alpha);
      sr.get("l2_budget", c.eval.smoothing.l2_budget);
      sr.get("batch", c.eval.smoothing.batch);
      sr.finish();
    }
    er.get("limit", c.eval.limit);
    er.get("smoothing_limit", c.eval.smoothing_limit);
    er.get("batch_size", c.eval.batch_size);
    er.get("threads", c.eval.threads);
    er.finish();
  }
  if (const json* s = r.child("seeds")) {
    ObjectReader sr(*s, "seeds");
    sr.get("base", c.seeds.base);
    sr.get_optional("weights", c.seeds.weights);
    sr.get_optional("data", c.seeds.data);
    sr.get_optional("attack", c.seeds.attack);
    sr.finish();
  }
  r.get("output_dir", c.output_dir);
  r.get("time_limit_seconds", c.time_limit_seconds);
  r.get_optional("quantize_bits", c.quantize_bits);
  r.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  PipelineConfig c = config_from_json(j);
  // Relative dataset paths resolve against the config file's directory.
  const std::filesystem::path base = path.parent_path();
  const auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal();
  };
  for (std::string* p : {&c.dataset.train_images, &c.dataset.train_labels,
                         &c.dataset.test_images, &c.dataset.test_labels}) {
    resolve(*p);
  }
  for (auto& p : c.dataset.train_batches) resolve(p);
  for (auto& p : c.dataset.test_batches) resolve(p);
  return c;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path.string() + "'");
  out << to_json(cfg).dump(2) << "\n";
  if (!out) throw IoError("failed writing config '" + path.string() + "'");
}

std::string config_digest(const PipelineConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("run_id");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

}  // namespace robustprune
