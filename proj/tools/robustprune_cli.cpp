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

// robustprune: command-line front end for the pruning pipeline.
//
// Exit codes: 0 success, 2 configuration or shape error, 3 I/O or
// file-format error, 4 numerical divergence, 5 time limit reached (partial
// report written), 1 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robustprune/checkpoint.hpp"
#include "robustprune/config.hpp"
#include "robustprune/errors.hpp"
#include "robustprune/pipeline.hpp"

namespace rp = robustprune;

namespace {

// Flags that override config fields when given.
struct Overrides {
  std::optional<std::string> run_id, architecture, method, output;
  std::optional<std::string> train_images, train_labels, test_images, test_labels, dataset_name;
  std::optional<std::size_t> train_limit, test_limit;
  std::optional<std::string> pretrain_objective, prune_objective, finetune_objective;
  std::optional<std::size_t> pretrain_epochs, prune_epochs, finetune_epochs;
  std::optional<double> pretrain_lr, prune_lr, finetune_lr;
  std::optional<double> ratio, scaling_k, data_fraction;
  std::optional<std::string> granularity, init;
  std::optional<bool> prune_classifier;
  std::optional<std::vector<double>> schedule;
  std::optional<std::size_t> batch_size;
  std::optional<double> epsilon, eval_epsilon, ibp_epsilon, sigma;
  std::optional<std::size_t> attack_steps, eval_steps, eval_restarts, eval_limit, threads;
  std::optional<std::vector<std::string>> metrics;
  std::optional<std::uint64_t> seed;
  std::optional<double> time_limit;
  std::optional<int> quantize_bits;

  void add_to(CLI::App& app) {
    app.add_option("--run-id", run_id, "Run identifier used in reports");
    app.add_option("--arch", architecture, "cnn-small | cnn-large | vgg4 | mlp-2x256");
    app.add_option("--method", method, "hydra | lwm | scratch | multi-step-lwm");
    app.add_option("--output", output, "Output directory");
    app.add_option("--dataset-name", dataset_name, "Dataset label written to reports");
    app.add_option("--train-images", train_images, "IDX training images");
    app.add_option("--train-labels", train_labels, "IDX training labels");
    app.add_option("--test-images", test_images, "IDX test images");
    app.add_option("--test-labels", test_labels, "IDX test labels");
    app.add_option("--train-limit", train_limit, "Use only the first N training examples");
    app.add_option("--test-limit", test_limit, "Use only the first N test examples");
    app.add_option("--pretrain-objective", pretrain_objective,
                   "benign | adversarial | ibp | smoothing");
    app.add_option("--prune-objective", prune_objective);
    app.add_option("--finetune-objective", finetune_objective);
    app.add_option("--pretrain-epochs", pretrain_epochs);
    app.add_option("--prune-epochs", prune_epochs);
    app.add_option("--finetune-epochs", finetune_epochs);
    app.add_option("--pretrain-lr", pretrain_lr);
    app.add_option("--prune-lr", prune_lr);
    app.add_option("--finetune-lr", finetune_lr);
    app.add_option("--ratio,-p", ratio, "Pruning ratio in percent, [0, 100)");
    app.add_option("--scaling-k", scaling_k, "Scaled score initialization factor");
    app.add_option("--data-fraction", data_fraction, "Fraction of training data for pruning");
    app.add_option("--granularity", granularity, "weight | filter");
    app.add_option("--init", init,
                   "scaled | xavier-normal | xavier-uniform | kaiming-normal | kaiming-uniform");
    app.add_option("--prune-classifier", prune_classifier, "Prune the final layer too");
    app.add_option("--schedule", schedule, "Ratios for multi-step LWM")->delimiter(',');
    app.add_option("--batch-size", batch_size, "Training minibatch size");
    app.add_option("--epsilon", epsilon, "Training attack / IBP epsilon (l-inf, pixel units)");
    app.add_option("--attack-steps", attack_steps, "Training PGD steps");
    app.add_option("--sigma", sigma, "Noise standard deviation for smoothing");
    app.add_option("--eval-epsilon", eval_epsilon, "Evaluation PGD epsilon");
    app.add_option("--eval-steps", eval_steps, "Evaluation PGD steps");
    app.add_option("--eval-restarts", eval_restarts, "Evaluation PGD restarts");
    app.add_option("--ibp-epsilon", ibp_epsilon, "Evaluation IBP epsilon for vra_t");
    app.add_option("--eval-limit", eval_limit, "Evaluate the first N test examples only");
    app.add_option("--metrics", metrics, "benign,era,vra_t,vra_s")->delimiter(',');
    app.add_option("--threads", threads, "Evaluation threads (0 = all cores)");
    app.add_option("--seed", seed, "Base seed");
    app.add_option("--time-limit", time_limit, "Wall-clock limit in seconds (0 = none)");
    app.add_option("--quantize-bits", quantize_bits, "Quantize weights after finetuning");
  }

  void apply(rp::PipelineConfig& c) const {
    const auto set = [](auto& dst, const auto& src) {
      if (src) dst = *src;
    };
    set(c.run_id, run_id);
    set(c.architecture, architecture);
    if (method) c.method = rp::parse_method(*method);
    set(c.output_dir, output);
    set(c.dataset.name, dataset_name);
    set(c.dataset.train_images, train_images);
    set(c.dataset.train_labels, train_labels);
    set(c.dataset.test_images, test_images);
    set(c.dataset.test_labels, test_labels);
    set(c.dataset.train_limit, train_limit);
    set(c.dataset.test_limit, test_limit);
    if (pretrain_objective) c.pretrain.objective = rp::parse_objective(*pretrain_objective);
    if (prune_objective) c.prune.objective = rp::parse_objective(*prune_objective);
    if (finetune_objective) c.finetune.objective = rp::parse_objective(*finetune_objective);
    set(c.pretrain.epochs, pretrain_epochs);
    set(c.prune.epochs, prune_epochs);
    set(c.finetune.epochs, finetune_epochs);
    set(c.pretrain.lr, pretrain_lr);
    set(c.prune.lr, prune_lr);
    set(c.finetune.lr, finetune_lr);
    set(c.pruning.ratio, ratio);
    set(c.pruning.scaling_k, scaling_k);
    set(c.pruning.data_fraction, data_fraction);
    if (granularity) c.pruning.granularity = rp::parse_granularity(*granularity);
    if (init) c.pruning.init = rp::parse_score_init(*init);
    set(c.pruning.prune_classifier, prune_classifier);
    set(c.pruning.schedule, schedule);
    set(c.training.batch_size, batch_size);
    if (epsilon) {
      c.training.attack.epsilon = *epsilon;
      c.training.ibp.target = *epsilon;
    }
    set(c.training.attack.steps, attack_steps);
    if (sigma) {
      c.training.sigma = *sigma;
      c.eval.smoothing.sigma = *sigma;
    }
    set(c.eval.attack.epsilon, eval_epsilon);
    set(c.eval.attack.steps, eval_steps);
    set(c.eval.attack.restarts, eval_restarts);
    set(c.eval.ibp_epsilon, ibp_epsilon);
    set(c.eval.limit, eval_limit);
    set(c.eval.threads, threads);
    if (metrics) {
      c.eval.metrics.clear();
      for (const auto& m : *metrics) c.eval.metrics.push_back(rp::parse_metric(m));
    }
    set(c.seeds.base, seed);
    set(c.time_limit_seconds, time_limit);
    if (quantize_bits) c.quantize_bits = *quantize_bits;
  }
};

void print_result(const rp::RunResult& r) {
  std::cout << rp::csv_header() << "\n" << rp::csv_row(r) << "\n";
  if (!r.layers.empty()) {
    std::printf("achieved sparsity %.4f%%\n", r.achieved_sparsity);
    for (const auto& l : r.layers) {
      std::printf("  layer %zu (%s): kept %zu of %zu\n", l.layer, l.kind.c_str(), l.kept, l.total);
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Robustness-aware network pruning: pretrain, prune, finetune, evaluate."};
  app.require_subcommand(1);
  std::string config_path;
  std::string from;
  std::string axis;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  Overrides ov;

  struct Command {
    CLI::App* app;
    rp::Stage first, last;
    bool needs_checkpoint;
  };
  std::vector<Command> commands;
  const auto add = [&](const char* name, const char* help, rp::Stage first, rp::Stage last,
                       bool needs_checkpoint) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "JSON configuration file");
    if (needs_checkpoint) {
      sub->add_option("--from", from, "Checkpoint to start from")->required()->check(
          CLI::ExistingFile);
    }
    ov.add_to(*sub);
    commands.push_back({sub, first, last, needs_checkpoint});
  };
  add("pretrain", "Train the dense network", rp::Stage::kPretrain, rp::Stage::kPretrain, false);
  add("prune", "Optimize scores and build the mask", rp::Stage::kPrune, rp::Stage::kPrune, true);
  add("finetune", "Finetune the unpruned weights", rp::Stage::kFinetune, rp::Stage::kFinetune,
      true);
  add("eval", "Evaluate a checkpoint", rp::Stage::kEval, rp::Stage::kEval, true);
  add("run", "Full pipeline", rp::Stage::kPretrain, rp::Stage::kEval, false);

  CLI::App* sweep = app.add_subcommand("sweep", "One pipeline per (value, seed)");
  sweep->add_option("--config,-c", config_path, "JSON configuration file");
  sweep->add_option("--axis", axis, "prune_epochs | data_fraction | scaling_k | ratio | init_kind")
      ->required();
  sweep->add_option("--values", values, "Comma-separated axis values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", seeds, "Comma-separated base seeds")->delimiter(',');
  ov.add_to(*sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  rp::PipelineConfig cfg;
  if (!config_path.empty()) cfg = rp::load_config(config_path);
  ov.apply(cfg);

  if (sweep->parsed()) {
    if (seeds.empty()) seeds.push_back(cfg.seeds.base);
    const auto rows = rp::run_sweep(cfg, axis, values, seeds);
    std::cout << rp::csv_header() << "\n";
    for (const auto& r : rows) std::cout << rp::csv_row(r) << "\n";
    return 0;
  }
  for (const Command& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    rp::RunOptions opt;
    opt.first = cmd.first;
    opt.last = cmd.last;
    std::vector<std::string> warnings;
    opt.warnings = &warnings;
    if (cmd.needs_checkpoint) {
      cfg.validate();
      const rp::Checkpoint ckpt = rp::load_checkpoint(from, rp::config_digest(cfg), &warnings);
      opt.initial = rp::state_from_checkpoint(ckpt);
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    print_result(rp::run_pipeline(cfg, opt));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rp::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rp::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const rp::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const rp::LengthError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const rp::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const rp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const rp::TimeLimitError& e) {
    std::cerr << "time limit: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
