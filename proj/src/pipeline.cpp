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

#include "robustprune/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "robustprune/errors.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

namespace {

constexpr std::size_t kHeldBatch = 256;

Dataset head(const Dataset& d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  std::vector<std::size_t> ids(limit);
  for (std::size_t i = 0; i < limit; ++i) ids[i] = i;
  return d.subset(ids);
}

Objective objective_for(const PipelineConfig& cfg, ObjectiveKind kind) {
  Objective o;
  o.kind = kind;
  o.attack = cfg.training.attack;
  o.ibp = cfg.training.ibp;
  o.sigma = cfg.training.sigma;
  return o;
}

// Per-stage seeds: index 0 pretrain, 1 prune, 2 finetune.
StageOptions stage_options(const PipelineConfig& cfg, const char* name, const StageConfig& stage,
                           std::uint64_t index, const Deadline& deadline) {
  StageOptions o;
  o.stage = name;
  o.objective = objective_for(cfg, stage.objective);
  o.epochs = stage.epochs;
  o.lr = stage.lr;
  o.momentum = cfg.training.momentum;
  o.weight_decay = cfg.training.weight_decay;
  o.batch_size = cfg.training.batch_size;
  o.data_seed = derive_seed(cfg.seeds.data_seed(), {index});
  o.noise_seed = derive_seed(cfg.seeds.attack_seed(), {index});
  o.deadline = deadline;
  return o;
}

class Runner {
 public:
  Runner(const PipelineConfig& cfg, const DataBundle& data, const RunOptions& options,
         const Deadline& deadline)
      : cfg_(cfg), data_(data), options_(options), deadline_(deadline) {}

  PipelineState& state() { return state_; }
  RunResult& result() { return result_; }

  void pretrain() {
    state_ = PipelineState{};
    state_.net = build_architecture(cfg_.architecture, data_.train.example_shape(),
                                    data_.train.num_classes, cfg_.seeds.weights_seed());
    if (!cfg_.pruning.prune_classifier) {
      const auto layers = state_.net.parametric_layers();
      state_.net.layers()[layers.back()].prunable = false;
    }
    // The scratch baseline starts from the fresh initialization.
    if (cfg_.method != Method::kScratch) {
      StageOptions o = stage_options(cfg_, "pretrain", cfg_.pretrain, 0, deadline_);
      result_.logs.push_back(train_network(state_.net, data_.train, o, nullptr, options_.observer));
    }
    finish_stage(Stage::kPretrain);
  }

  void prune() {
    const PruneSettings& p = cfg_.pruning;
    Network& net = state_.net;
    state_.scores.reset();
    switch (cfg_.method) {
      case Method::kHydra: {
        ImportanceScores scores =
            p.granularity == Granularity::kWeight
                ? init_scores(net, p.init, p.scaling_k, cfg_.seeds.weights_seed())
                : structured_scaled_init(net, p.scaling_k);
        StageOptions o = stage_options(cfg_, "prune", cfg_.prune, 1, deadline_);
        o.data_fraction = p.data_fraction;
        o.held_batch = slice_batch(data_.val, 0, std::min(kHeldBatch, data_.val.size()));
        result_.logs.push_back(prune_optimize(net, scores, p.ratio, data_.train, o,
                                              options_.mask_observer, options_.observer));
        state_.mask = finalize_mask(net, scores, p.ratio);
        state_.scores = std::move(scores);
        break;
      }
      case Method::kLwm:
        state_.mask = p.granularity == Granularity::kWeight ? lwm_mask(net, p.ratio)
                                                            : structured_lwm_mask(net, p.ratio);
        break;
      case Method::kMultiStepLwm: {
        const std::vector<double> prefix(p.schedule.begin(), p.schedule.end() - 1);
        if (!prefix.empty()) {
          StageOptions o = stage_options(cfg_, "multi-step", cfg_.finetune, 2, deadline_);
          multi_step_lwm(net, prefix, data_.train, o, &result_.logs);
        }
        state_.mask = lwm_mask(net, p.ratio);
        break;
      }
      case Method::kScratch: {
        // A random mask with the exact per-layer kept counts.
        Rng rng = make_rng(cfg_.seeds.weights_seed(), {tag(StreamTag::kMask)});
        ImportanceScores scores;
        if (p.granularity == Granularity::kWeight) {
          scores = random_score_init(net, ScoreInit::kKaimingUniform, rng);
        } else {
          scores.granularity = Granularity::kFilter;
          scores.layers.resize(net.layers().size());
          std::uniform_real_distribution<double> u(0.0, 1.0);
          for (std::size_t i : pruned_layers(net, Granularity::kFilter)) {
            Tensor t({net.layers()[i].weight.dim(0)});
            for (double& v : t.values()) v = u(rng);
            scores.layers[i] = std::move(t);
          }
        }
        state_.mask = finalize_mask(net, scores, p.ratio);
        break;
      }
    }
    finish_stage(Stage::kPrune);
  }

  void finetune() {
    if (!state_.mask) throw ConfigError("finetune needs a mask; run the prune stage first");
    StageOptions o = stage_options(cfg_, "finetune", cfg_.finetune, 2, deadline_);
    if (cfg_.method == Method::kScratch) {
      // Same total budget as pretraining plus finetuning, at the pretraining
      // learning rate.
      o.stage = "scratch";
      o.epochs = cfg_.pretrain.epochs + cfg_.finetune.epochs;
      o.lr = cfg_.pretrain.lr;
    }
    result_.logs.push_back(
        train_network(state_.net, data_.train, o, &*state_.mask, options_.observer));
    if (cfg_.quantize_bits) result_.quantization = quantize_weights(state_.net, *cfg_.quantize_bits);
    finish_stage(Stage::kFinetune);
  }

  void evaluate() {
    const Dataset test = head(data_.test, cfg_.eval.limit);
    EvalConfig e = cfg_.eval_config(derive_seed(cfg_.seeds.attack_seed(), {tag(StreamTag::kEval)}));
    e.limit = 0;
    if (state_.mask) {
      Network copy = state_.net;
      result_.metrics = evaluate_metrics(copy, MaskedWeights(copy, *state_.mask), test, e);
    } else {
      result_.metrics = evaluate_metrics(state_.net, FrozenWeights(), test, e);
    }
  }

  void summarize() {
    const Network& net = state_.net;
    result_.params_total = net.parameter_count();
    result_.params_kept = result_.params_total;
    result_.layers.clear();
    if (!state_.mask) return;
    const PruneMask& m = *state_.mask;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (!m.covers(i)) continue;
      result_.layers.push_back(
          {i, std::string(to_string(net.layers()[i].kind)), m.kept(i), m.layers[i].numel()});
    }
    const std::size_t kept = m.kept_total(), size = m.size_total();
    result_.params_kept = result_.params_total - (size - kept);
    result_.achieved_sparsity =
        size ? 100.0 * static_cast<double>(size - kept) / static_cast<double>(size) : 0.0;
  }

 private:
  void finish_stage(Stage s) {
    state_.stage = std::string(to_string(s));
    if (!options_.write_checkpoints) return;
    Checkpoint c = make_checkpoint(state_.net, state_.stage);
    c.seed_weights = cfg_.seeds.weights_seed();
    c.seed_data = cfg_.seeds.data_seed();
    c.seed_attack = cfg_.seeds.attack_seed();
    c.config_digest = config_digest(cfg_);
    c.scores = state_.scores;
    c.mask = state_.mask;
    save_checkpoint(c, std::filesystem::path(cfg_.output_dir) / "checkpoints" /
                           (state_.stage + ".ckpt"));
  }

  const PipelineConfig& cfg_;
  const DataBundle& data_;
  const RunOptions& options_;
  Deadline deadline_;
  PipelineState state_;
  RunResult result_;
};

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kPretrain:
      return "pretrain";
    case Stage::kPrune:
      return "prune";
    case Stage::kFinetune:
      return "finetune";
    case Stage::kEval:
      return "eval";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kPretrain, Stage::kPrune, Stage::kFinetune, Stage::kEval}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

DataBundle load_data(const PipelineConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  Dataset train, test;
  if (d.format == "idx") {
    if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
        d.test_labels.empty()) {
      throw ConfigError("idx datasets need train/test image and label paths");
    }
    train = load_idx(d.train_images, d.train_labels);
    test = load_idx(d.test_images, d.test_labels);
  } else {
    if (d.train_batches.empty() || d.test_batches.empty()) {
      throw ConfigError("cifar datasets need train_batches and test_batches");
    }
    const auto paths = [](const std::vector<std::string>& v) {
      return std::vector<std::filesystem::path>(v.begin(), v.end());
    };
    train = load_cifar_binary(paths(d.train_batches));
    test = load_cifar_binary(paths(d.test_batches));
  }
  train = head(train, d.train_limit);
  test = head(test, d.test_limit);
  test.split = Split::kTest;
  auto [tr, va] = split_train_val(train, cfg.seeds.data_seed());
  return {std::move(tr), std::move(va), std::move(test)};
}

PipelineState state_from_checkpoint(const Checkpoint& ckpt) {
  PipelineState s;
  s.net = restore_network(ckpt);
  s.scores = ckpt.scores;
  s.mask = ckpt.mask;
  s.stage = ckpt.stage;
  return s;
}

RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  cfg.validate();
  if (options.first > options.last) throw ConfigError("first stage comes after last stage");
  if (options.first != Stage::kPretrain && !options.initial) {
    throw ConfigError("stage '" + std::string(to_string(options.first)) +
                      "' needs a starting checkpoint");
  }
  const auto start = std::chrono::steady_clock::now();
  const Deadline deadline =
      options.deadline ? *options.deadline
      : cfg.time_limit_seconds > 0.0
          ? Deadline::after(std::chrono::duration<double>(cfg.time_limit_seconds))
          : Deadline();

  std::optional<DataBundle> owned;
  if (!options.data) owned = load_data(cfg);
  const DataBundle& data = options.data ? *options.data : *owned;

  Runner runner(cfg, data, options, deadline);
  RunResult& r = runner.result();
  r.run_id = cfg.run_id;
  r.architecture = cfg.architecture;
  r.dataset = cfg.dataset.name;
  r.method = std::string(to_string(cfg.method));
  r.ratio = cfg.pruning.ratio;
  r.stage_objectives = cfg.stage_objectives();
  r.seed = cfg.seeds.base;
  if (options.initial) {
    runner.state() = *options.initial;
    runner.state().net.check_input([&] {
      Shape s{1};
      const Shape ex = data.train.example_shape();
      s.insert(s.end(), ex.begin(), ex.end());
      return s;
    }());
  }

  const auto in_range = [&](Stage s) { return options.first <= s && s <= options.last; };
  const auto finish = [&] {
    runner.summarize();
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.final_state) *options.final_state = runner.state();
    if (options.write_report) write_report({r}, cfg.output_dir);
  };
  try {
    if (in_range(Stage::kPretrain)) runner.pretrain();
    if (in_range(Stage::kPrune)) runner.prune();
    if (in_range(Stage::kFinetune)) runner.finetune();
    if (in_range(Stage::kEval)) runner.evaluate();
  } catch (const DivergenceError& e) {
    r.status = "diverged";
    r.error = e.what();
    finish();
    throw;
  } catch (const TimeLimitError& e) {
    r.status = "time_limit";
    r.error = e.what();
    finish();
    throw;
  }
  finish();
  return r;
}

void apply_sweep_value(PipelineConfig& cfg, std::string_view axis, const std::string& value) {
  const auto number = [&]() {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw ConfigError("sweep value '" + value + "' is not a number");
    }
    return v;
  };
  if (axis == "prune_epochs") {
    const double v = number();
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ConfigError("prune_epochs values must be non-negative integers");
    }
    cfg.prune.epochs = static_cast<std::size_t>(v);
  } else if (axis == "data_fraction") {
    cfg.pruning.data_fraction = number();
  } else if (axis == "scaling_k") {
    cfg.pruning.scaling_k = number();
  } else if (axis == "ratio") {
    cfg.pruning.ratio = number();
    if (cfg.method == Method::kMultiStepLwm && !cfg.pruning.schedule.empty()) {
      cfg.pruning.schedule.back() = cfg.pruning.ratio;
    }
  } else if (axis == "init_kind") {
    cfg.pruning.init = parse_score_init(value);
  } else {
    throw ConfigError("unknown sweep axis '" + std::string(axis) +
                      "'; valid: prune_epochs, data_fraction, scaling_k, ratio, init_kind");
  }
}

std::vector<RunResult> run_sweep(const PipelineConfig& base, std::string_view axis,
                                 const std::vector<std::string>& values,
                                 const std::vector<std::uint64_t>& seeds,
                                 const DataBundle* data) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  // Validate every cell before spending any compute.
  for (const std::string& v : values) {
    PipelineConfig c = base;
    apply_sweep_value(c, axis, v);
    c.validate();
  }
  const Deadline deadline =
      base.time_limit_seconds > 0.0
          ? Deadline::after(std::chrono::duration<double>(base.time_limit_seconds))
          : Deadline();
  const std::filesystem::path root(base.output_dir);
  std::vector<RunResult> rows;
  try {
    for (std::uint64_t seed : seeds) {
      PipelineConfig seeded = base;
      seeded.seeds = Seeds{};
      seeded.seeds.base = seed;
      std::optional<DataBundle> owned;
      if (!data) owned = load_data(seeded);
      const DataBundle& d = data ? *data : *owned;

      // Every axis acts after pretraining, so one pretrained network serves
      // all values of this seed.
      PipelineState pretrained;
      {
        PipelineConfig c = seeded;
        c.output_dir = (root / ("seed-" + std::to_string(seed))).string();
        RunOptions o;
        o.last = Stage::kPretrain;
        o.data = &d;
        o.write_report = false;
        o.deadline = deadline;
        o.final_state = &pretrained;
        run_pipeline(c, o);
      }
      for (const std::string& v : values) {
        PipelineConfig c = seeded;
        apply_sweep_value(c, axis, v);
        const std::string cell = std::string(axis) + "=" + v;
        c.run_id = base.run_id + "-" + cell;
        c.output_dir = (root / cell / ("seed-" + std::to_string(seed))).string();
        RunOptions o;
        o.first = Stage::kPrune;
        o.initial = pretrained;
        o.data = &d;
        o.deadline = deadline;
        RunResult r = run_pipeline(c, o);
        r.sweep_axis = std::string(axis);
        r.sweep_value = v;
        rows.push_back(std::move(r));
      }
    }
  } catch (const TimeLimitError&) {
    write_report(rows, root);
    throw;
  }
  write_report(rows, root);
  return rows;
}

}  // namespace robustprune
