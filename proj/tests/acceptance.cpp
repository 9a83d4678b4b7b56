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

// Acceptance runner. Prints one PASS/FAIL line per criterion and mirrors the
// lines into <out>/acceptance.txt. Criteria 8, 9 and 11 train real models on
// the bundled MNIST subset and take most of the runtime.
//
//   acceptance [--only 1,2,...] [--out DIR] [--data DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "robustprune/autodiff.hpp"
#include "robustprune/gradients.hpp"
#include "robustprune/metrics.hpp"
#include "robustprune/pipeline.hpp"
#include "robustprune/smoothing.hpp"
#include "test_util.hpp"

namespace robustprune {
namespace {

namespace fs = std::filesystem;
using testing::random_labels;
using testing::uniform_tensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

struct Context {
  fs::path out;
  fs::path data;
  // Shared between criteria 8 and 11: the finetuned 99% HYDRA models.
  std::map<std::uint64_t, PipelineState> pruned99;
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Network conv_only(std::uint64_t seed) {
  Network net("conv-only", {2, 5, 5});
  net.conv(3, {3, 1, 1}).relu().conv(4, {5, 1, 0}).flatten();
  Rng rng = make_rng(seed);
  net.initialize(rng);
  return net;
}

Outcome gradient_correctness(Context&) {
  double worst = 0.0;
  std::size_t nets = 0, most_params = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = make_rng(seed, {1});
    const Network dense = testing::random_mlp(8, {12, 10, 4}, seed);
    const Network conv = conv_only(seed);
    const Network mixed = testing::random_convnet(2, 6, 4, seed);
    const std::pair<const Network*, Shape> cases[] = {
        {&dense, {4, 8}}, {&conv, {4, 2, 5, 5}}, {&mixed, {4, 2, 6, 6}}};
    for (const auto& [net, shape] : cases) {
      const Tensor x = uniform_tensor(shape, rng, 0.0, 1.0);
      const std::vector<int> y = random_labels(4, net->num_classes(), rng);
      worst = std::max(worst, finite_diff_check(*net, x, y, LossKind::kCrossEntropy, 1e-5));
      most_params = std::max(most_params, net->parameter_count());
      ++nets;
    }
  }
  return {worst < 1e-5 && most_params <= 5000,
          fmt("max relative error %.3g over %zu dense/conv/mixed networks (<= %zu params)", worst,
              nets, most_params)};
}

// ---------------------------------------------------------------------------
// 2. Init equivalence

Outcome init_equivalence(Context&) {
  Rng rng = make_rng(2024, {2});
  std::size_t comparisons = 0, mismatches = 0;
  for (int layer = 0; layer < 100; ++layer) {
    const std::size_t fan_in = std::uniform_int_distribution<std::size_t>(4, 400)(rng);
    const std::size_t out = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    Network net("layer", {fan_in});
    net.dense(out);
    const double scale = std::exp(std::uniform_real_distribution<>(-6.0, 2.0)(rng));
    Tensor& w = net.layers()[0].weight;
    std::vector<double> mags;
    do {
      for (double& v : w.values()) v = scale * std::uniform_real_distribution<>(-1.0, 1.0)(rng);
      mags.clear();
      for (double v : w.values()) mags.push_back(std::fabs(v));
      std::sort(mags.begin(), mags.end());
    } while (std::adjacent_find(mags.begin(), mags.end()) != mags.end());

    for (double p : {50.0, 90.0, 95.0, 99.0}) {
      const PruneMask lwm = lwm_mask(net, p);
      for (double k : {2.0, 6.0, 10.0}) {
        const PruneMask fin = finalize_mask(net, scaled_init(net, k), p);
        mismatches += !(fin.layers[0] == lwm.layers[0]);
        ++comparisons;
      }
    }
  }
  return {mismatches == 0, fmt("%zu/%zu (layer, p, k) masks bit-identical to LWM",
                               comparisons - mismatches, comparisons)};
}

// ---------------------------------------------------------------------------
// Desk task configuration shared by criteria 3 and 8-12.

PipelineConfig desk_config(const Context& ctx, std::uint64_t seed, Method method, double ratio,
                           const std::string& name) {
  PipelineConfig c;
  c.run_id = name;
  c.architecture = "mlp-2x256";
  c.method = method;
  c.dataset.name = "mnist";
  c.dataset.train_images = (ctx.data / "train-images-idx3-ubyte.gz").string();
  c.dataset.train_labels = (ctx.data / "train-labels-idx1-ubyte.gz").string();
  c.dataset.test_images = (ctx.data / "t10k-images-idx3-ubyte.gz").string();
  c.dataset.test_labels = (ctx.data / "t10k-labels-idx1-ubyte.gz").string();
  c.pretrain = {ObjectiveKind::kAdversarial, 10, 0.1};
  c.prune = {ObjectiveKind::kAdversarial, 20, 0.1};
  c.finetune = {ObjectiveKind::kAdversarial, 10, 0.01};
  c.pruning.ratio = ratio;
  c.training.attack = AttackConfig{.epsilon = 0.1, .steps = 10, .step_size = std::nullopt,
                                   .restarts = 1, .random_start = false};
  c.eval.attack = AttackConfig{.epsilon = 0.1, .steps = 50, .step_size = std::nullopt,
                               .restarts = 10, .random_start = true};
  c.eval.metrics = {Metric::kBenign, Metric::kEra};
  c.seeds.base = seed;
  c.output_dir = (ctx.out / name).string();
  return c;
}

// ---------------------------------------------------------------------------
// 3. Sparsity exactness

std::size_t expected_kept(std::size_t n, double p) {
  const double x = (100.0 - p) * static_cast<double>(n) / 100.0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(x + 0.5)));
}

Outcome sparsity_exactness(Context& ctx) {
  std::size_t checks = 0, bad = 0, observed = 0;
  const auto check_mask = [&](const PruneMask& m, const Network& net) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (!m.covers(i)) continue;
      const Layer& l = net.layers()[i];
      std::size_t want = expected_kept(l.weight.numel(), m.ratio);
      if (m.granularity == Granularity::kFilter) {
        want = expected_kept(l.weight.dim(0), m.ratio) * (l.weight.numel() / l.weight.dim(0));
      }
      bad += m.kept(i) != want;
      ++checks;
    }
  };

  for (Method method : {Method::kHydra, Method::kLwm, Method::kScratch, Method::kMultiStepLwm}) {
    for (double p : {90.0, 99.0}) {
      PipelineConfig c = desk_config(ctx, 0, method, p, "c3-" + std::string(to_string(method)));
      c.pretrain = {ObjectiveKind::kBenign, 1, 0.1};
      c.prune = {ObjectiveKind::kAdversarial, 1, 0.1};
      c.finetune = {ObjectiveKind::kAdversarial, 0, 0.01};
      c.training.attack.steps = 2;
      c.pruning.data_fraction = 0.25;
      if (method == Method::kMultiStepLwm) c.pruning.schedule = {50.0, p};
      PipelineState state;
      RunOptions o;
      o.last = Stage::kFinetune;
      o.write_checkpoints = false;
      o.write_report = false;
      o.final_state = &state;
      o.mask_observer = [&](std::size_t, const Tensor& m) {
        std::size_t ones = 0;
        for (double v : m.values()) ones += v == 1.0;
        bad += ones != expected_kept(m.numel(), p);
        ++observed;
      };
      run_pipeline(c, o);
      check_mask(*state.mask, state.net);
    }
  }

  // Filter granularity on a conv network.
  PipelineConfig c = desk_config(ctx, 0, Method::kHydra, 50.0, "c3-filter");
  c.architecture = "cnn-small";
  c.pruning.granularity = Granularity::kFilter;
  c.pretrain = {ObjectiveKind::kBenign, 0, 0.1};
  c.prune = {ObjectiveKind::kBenign, 1, 0.1};
  c.finetune = {ObjectiveKind::kBenign, 0, 0.01};
  c.pruning.data_fraction = 0.1;
  PipelineState state;
  RunOptions o;
  o.last = Stage::kFinetune;
  o.write_checkpoints = false;
  o.write_report = false;
  o.final_state = &state;
  std::size_t filter_observed = 0;
  o.mask_observer = [&](std::size_t, const Tensor& m) {
    const std::size_t filters = m.dim(0), per = m.numel() / filters;
    std::size_t ones = 0;
    for (double v : m.values()) ones += v == 1.0;
    bad += ones != expected_kept(filters, 50.0) * per;
    ++filter_observed;
  };
  run_pipeline(c, o);
  check_mask(*state.mask, state.net);

  return {bad == 0 && observed > 0 && filter_observed > 0,
          fmt("%zu per-minibatch masks and %zu final layer masks checked, %zu wrong counts",
              observed + filter_observed, checks, bad)};
}

// ---------------------------------------------------------------------------
// 4. STE oracle

Outcome ste_oracle(Context&) {
  double worst = 0.0;
  std::size_t masked = 0, unmasked = 0;
  const double h = 1e-6;
  for (std::uint64_t inst = 0; inst < 50; ++inst) {
    Rng rng = make_rng(inst, {4});
    const Network net = inst % 2 ? testing::random_convnet(1, 5, 3, inst)
                                 : testing::random_mlp(6, {7, 5, 3}, inst);
    const Shape shape = inst % 2 ? Shape{3, 1, 5, 5} : Shape{3, 6};
    const Tensor x = uniform_tensor(shape, rng, 0.0, 1.0);
    const std::vector<int> y = random_labels(3, 3, rng);
    const double ratios[] = {30.0, 50.0, 70.0, 90.0};
    const double p = ratios[inst % 4];
    ImportanceScores scores = inst % 3 ? init_scores(net, ScoreInit::kKaimingNormal, 6.0, inst)
                                       : scaled_init(net, 6.0);

    const ScoreMaskedWeights src(scores, p);
    {
      ad::Graph g;
      g.backward(ad::cross_entropy(net.forward(g, g.constant(x), src), y));
    }
    const std::vector<Tensor> eff = src.effective_weights(net);
    const auto loss_at = [&](std::size_t layer, std::size_t j, double delta) {
      std::vector<Tensor> w = eff;
      w[layer][j] += delta;
      ad::Graph g;
      return ad::cross_entropy(net.forward(g, g.constant(x), SubstitutedWeights(std::move(w))), y)
          .value()[0];
    };
    for (std::size_t layer = 0; layer < net.layers().size(); ++layer) {
      if (!scores.scored(layer)) continue;
      const Tensor& theta = net.layers()[layer].weight;
      for (std::size_t j = 0; j < theta.numel(); ++j) {
        const double fd = (loss_at(layer, j, h) - loss_at(layer, j, -h)) / (2 * h);
        worst = std::max(worst, std::fabs(scores.layers[layer].grad()[j] - theta[j] * fd));
        (eff[layer][j] == 0.0 ? masked : unmasked) += 1;
      }
    }
  }
  return {worst < 1e-5 && masked > 0 && unmasked > 0,
          fmt("max |dL/ds - theta*FD(w)| = %.3g over 50 instances (%zu masked, %zu kept indices)",
              worst, masked, unmasked)};
}

// ---------------------------------------------------------------------------
// 5. PGD analytic optimality

Outcome pgd_optimality(Context&) {
  double worst_opt = 0.0, worst_ball = 0.0;
  bool in_box = true;
  std::size_t runs = 0;
  for (std::uint64_t m = 0; m < 20; ++m) {
    Rng rng = make_rng(m, {5});
    const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    const double eps = std::uniform_real_distribution<>(0.01, 0.2)(rng);
    // Two-class linear model with logit gap w.x + b; label 1 loses most at
    // x - eps * sign(w).
    Network net("linear", {d});
    net.dense(2);
    Tensor& w = net.layers()[0].weight;
    for (std::size_t j = 0; j < d; ++j) {
      w[j] = 0.0;
      const double mag = std::uniform_real_distribution<>(0.1, 2.0)(rng);
      w[d + j] = std::bernoulli_distribution(0.5)(rng) ? mag : -mag;
    }
    net.layers()[0].bias = Tensor({2}, std::vector<double>{0.0, std::normal_distribution<>()(rng)});
    const std::size_t batch = 8;
    const Tensor x = uniform_tensor({batch, d}, rng, eps, 1.0 - eps);
    const std::vector<int> y(batch, 1);

    AttackConfig cfg{.epsilon = eps, .steps = 25, .step_size = std::nullopt, .restarts = 1,
                     .random_start = false};
    const auto check_ball = [&](const Tensor& adv) {
      for (std::size_t i = 0; i < x.numel(); ++i) {
        worst_ball = std::max(worst_ball, std::fabs(adv[i] - x[i]) - eps);
        in_box = in_box && adv[i] >= 0.0 && adv[i] <= 1.0;
      }
      ++runs;
    };
    const Tensor adv = pgd_attack(net, FrozenWeights(), x, y, cfg, m);
    check_ball(adv);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < d; ++j) {
        const double target = x[b * d + j] - eps * (w[d + j] > 0 ? 1.0 : -1.0);
        worst_opt = std::max(worst_opt, std::fabs(adv[b * d + j] - target));
      }
    }
    cfg.random_start = true;
    for (std::uint64_t s = 0; s < 5; ++s) check_ball(pgd_attack(net, FrozenWeights(), x, y, cfg, s));
    cfg.restarts = 5;
    check_ball(pgd_attack(net, FrozenWeights(), x, y, cfg, 99));
  }
  return {worst_opt <= 1e-9 && worst_ball <= 1e-12 && in_box,
          fmt("max |x_adv - (x - eps sign w)| = %.3g; max ball excess %.3g over %zu runs; "
              "box %s",
              worst_opt, std::max(0.0, worst_ball), runs, in_box ? "held" : "violated")};
}

// ---------------------------------------------------------------------------
// 6. IBP soundness

Outcome ibp_soundness(Context&) {
  double worst = 0.0;
  std::size_t nesting_violations = 0, samples = 0;
  for (std::uint64_t n = 0; n < 50; ++n) {
    Rng rng = make_rng(n, {6});
    const Network net = n % 2 ? testing::random_convnet(1, 6, 4, n)
                              : testing::random_mlp(10, {16, 12, 5}, n);
    const Shape ex = n % 2 ? Shape{1, 6, 6} : Shape{10};
    Shape one{1};
    one.insert(one.end(), ex.begin(), ex.end());
    const Tensor x = uniform_tensor(one, rng, 0.0, 1.0);
    const double eps = std::uniform_real_distribution<>(0.01, 0.3)(rng);
    const Interval iv = ibp_propagate(net, FrozenWeights(), x, eps);

    Shape many{1000};
    many.insert(many.end(), ex.begin(), ex.end());
    Tensor xs(many);
    const std::size_t d = x.numel();
    for (std::size_t s = 0; s < 1000; ++s) {
      for (std::size_t j = 0; j < d; ++j) {
        // A tenth of the samples sit on corners of the ball.
        const double u = s % 10 == 0 ? (std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0)
                                     : std::uniform_real_distribution<>(-1.0, 1.0)(rng);
        xs[s * d + j] = x[j] + eps * u;
      }
    }
    const Tensor logits = net.logits(xs);
    const std::size_t c = iv.lower.numel();
    for (std::size_t s = 0; s < 1000; ++s) {
      for (std::size_t k = 0; k < c; ++k) {
        const double v = logits[s * c + k];
        worst = std::max({worst, iv.lower[k] - v, v - iv.upper[k]});
      }
    }
    samples += 1000;
    for (double f : {0.0, 0.25, 0.5, 0.99}) {
      const Interval inner = ibp_propagate(net, FrozenWeights(), x, eps * f);
      for (std::size_t k = 0; k < c; ++k) {
        nesting_violations += inner.lower[k] < iv.lower[k] || inner.upper[k] > iv.upper[k];
      }
    }
  }
  return {worst <= 1e-9 && nesting_violations == 0,
          fmt("%zu sampled logits, max bound violation %.3g; %zu nesting violations", samples,
              std::max(0.0, worst), nesting_violations)};
}

// ---------------------------------------------------------------------------
// 7. Smoothing certification

// Direct oracle: P[Bin(n, p) >= x] by summing pmf terms in long double, then
// plain bisection for the p where it equals alpha.
long double tail_sum(std::size_t x, std::size_t n, long double p) {
  if (x == 0) return 1.0L;
  if (p <= 0.0L) return 0.0L;
  if (p >= 1.0L) return 1.0L;
  long double total = 0.0L;
  for (std::size_t k = x; k <= n; ++k) {
    const long double log_term = std::lgamma(static_cast<long double>(n) + 1) -
                                 std::lgamma(static_cast<long double>(k) + 1) -
                                 std::lgamma(static_cast<long double>(n - k) + 1) +
                                 k * std::log(p) + (n - k) * std::log1p(-p);
    total += std::exp(log_term);
  }
  return total;
}

double oracle_lower(std::size_t x, std::size_t n, double alpha) {
  if (x == 0) return 0.0;
  long double lo = 0.0L, hi = 1.0L;
  for (int it = 0; it < 200; ++it) {
    const long double mid = (lo + hi) / 2;
    (tail_sum(x, n, mid) < alpha ? lo : hi) = mid;
  }
  return static_cast<double>((lo + hi) / 2);
}

double oracle_inverse_normal(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2;
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

Outcome smoothing_certification(Context&) {
  const double closed = std::fabs(clopper_pearson_lower(100, 100, 1e-3) - std::pow(0.001, 0.01));

  Rng rng = make_rng(7, {7});
  double worst_tail = 0.0, worst_beta = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 2000)(rng);
    const std::size_t x = std::uniform_int_distribution<std::size_t>(0, n)(rng);
    const double alpha = std::pow(10.0, std::uniform_real_distribution<>(-5.0, -0.7)(rng));
    const double got = clopper_pearson_lower(x, n, alpha);
    worst_tail = std::max(worst_tail, std::fabs(got - oracle_lower(x, n, alpha)));
    if (x > 0) {
      const double beta = boost::math::ibeta_inv(static_cast<double>(x),
                                                 static_cast<double>(n - x + 1), alpha);
      worst_beta = std::max(worst_beta, std::fabs(got - beta));
    }
  }

  const double radius = certificate_from_bound(0, 0.933254, 0.25, 0.0).radius;
  const double radius_err = std::fabs(radius - 0.25 * oracle_inverse_normal(0.933254));

  std::size_t abstain_bad = 0;
  std::vector<double> ps{0.0, 0.5, std::nextafter(0.5, 0.0)};
  for (int i = 0; i < 10000; ++i) ps.push_back(std::uniform_real_distribution<>(0.0, 0.5)(rng));
  for (double p : ps) {
    const Certificate c = certificate_from_bound(1, p, 0.25, 0.0);
    abstain_bad += !c.abstain || c.certified || c.radius != 0.0;
  }
  return {closed <= 1e-9 && worst_tail <= 1e-6 && radius_err <= 1e-6 && abstain_bad == 0,
          fmt("closed form err %.2g; tail-sum oracle err %.2g (beta quantile %.2g) on 200 "
              "cases; radius %.7f err %.2g; %zu abstention failures",
              closed, worst_tail, worst_beta, radius, radius_err, abstain_bad)};
}

// ---------------------------------------------------------------------------
// 8. End-to-end ordering

const std::vector<std::uint64_t> kSeeds{0, 1, 2};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.3f", x);
  return s;
}

Outcome end_to_end_ordering(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, std::vector<double>> era;
  std::vector<RunResult> rows;
  for (std::uint64_t seed : kSeeds) {
    const PipelineConfig base = desk_config(ctx, seed, Method::kHydra, 99.0, "c8");
    const DataBundle data = load_data(base);

    PipelineState pretrained;
    {
      PipelineConfig c = base;
      c.output_dir = (ctx.out / "c8" / ("pretrain-seed-" + std::to_string(seed))).string();
      RunOptions o;
      o.last = Stage::kPretrain;
      o.data = &data;
      o.write_report = false;
      o.final_state = &pretrained;
      run_pipeline(c, o);
    }
    const auto run = [&](Method m, double p) {
      const std::string name = std::string(to_string(m)) + "-p" + fmt("%g", p);
      PipelineConfig c = desk_config(ctx, seed, m, p, name);
      c.output_dir = (ctx.out / "c8" / name / ("seed-" + std::to_string(seed))).string();
      PipelineState final_state;
      RunOptions o;
      o.data = &data;
      o.final_state = &final_state;
      // The scratch baseline builds its own fresh network.
      if (m != Method::kScratch) {
        o.first = Stage::kPrune;
        o.initial = pretrained;
      }
      RunResult r = run_pipeline(c, o);
      era[name].push_back(*r.metrics.era);
      rows.push_back(r);
      if (m == Method::kHydra && p == 99.0) ctx.pruned99[seed] = std::move(final_state);
    };
    run(Method::kHydra, 99.0);
    run(Method::kLwm, 99.0);
    run(Method::kScratch, 99.0);
    run(Method::kHydra, 90.0);
    run(Method::kLwm, 90.0);
  }
  write_report(rows, ctx.out / "c8");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const double h99 = mean(era["hydra-p99"]), l99 = mean(era["lwm-p99"]),
               s99 = mean(era["scratch-p99"]), h90 = mean(era["hydra-p90"]),
               l90 = mean(era["lwm-p90"]);
  const bool ok = h99 > l99 && l99 > s99 && h90 >= l90 && seconds < 45 * 60;
  return {ok, fmt("mean era p=99: hydra %.4f > lwm %.4f > scratch %.4f [%s | %s | %s]; "
                  "p=90: hydra %.4f >= lwm %.4f [%s | %s]; %.0f s",
                  h99, l99, s99, list(era["hydra-p99"]).c_str(), list(era["lwm-p99"]).c_str(),
                  list(era["scratch-p99"]).c_str(), h90, l90, list(era["hydra-p90"]).c_str(),
                  list(era["lwm-p90"]).c_str(), seconds)};
}

// ---------------------------------------------------------------------------
// 9. Epoch-ablation endpoint

Outcome epoch_ablation(Context& ctx) {
  const PipelineConfig base = desk_config(ctx, 0, Method::kHydra, 99.0, "c9");
  const std::vector<RunResult> rows = run_sweep(base, "prune_epochs", {"0", "20"}, kSeeds);
  std::vector<double> zero, twenty;
  for (const RunResult& r : rows) (r.sweep_value == "0" ? zero : twenty).push_back(*r.metrics.era);
  const bool ok = zero.size() == kSeeds.size() && twenty.size() == kSeeds.size() &&
                  mean(twenty) >= mean(zero);
  return {ok, fmt("mean era prune_epochs=20 %.4f >= prune_epochs=0 %.4f [%s | %s]", mean(twenty),
                  mean(zero), list(twenty).c_str(), list(zero).c_str())};
}

// ---------------------------------------------------------------------------
// 10. Frozen invariants

Outcome frozen_invariants(Context& ctx) {
  PipelineConfig c = desk_config(ctx, 0, Method::kHydra, 99.0, "c10");
  DataBundle data = load_data(c);
  std::vector<std::size_t> head(1000);
  for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
  const Dataset train = data.train.subset(head);

  Network net = build_architecture("mlp-2x256", train.example_shape(), 10, 0);
  StageOptions pre;
  pre.objective.kind = ObjectiveKind::kBenign;
  pre.epochs = 1;
  train_network(net, train, pre);

  StageOptions adv;
  adv.objective.kind = ObjectiveKind::kAdversarial;
  adv.objective.attack = c.training.attack;
  adv.objective.attack.steps = 3;
  adv.epochs = 2;
  adv.data_seed = 5;
  adv.noise_seed = 6;

  std::size_t steps = 0, theta_changes = 0;
  const Network before = net;
  const auto same_theta = [&] {
    for (std::size_t i : net.parametric_layers()) {
      const Layer &a = net.layers()[i], &b = before.layers()[i];
      if (!(a.weight == b.weight) || !(a.bias == b.bias)) return false;
    }
    return true;
  };
  ImportanceScores scores = scaled_init(net, 6.0);
  prune_optimize(net, scores, 99.0, train, adv, {}, [&](const StepInfo&) {
    theta_changes += !same_theta();
    ++steps;
  });
  theta_changes += !same_theta();

  const PruneMask mask = finalize_mask(net, scores, 99.0);
  const PruneMask mask_copy = mask;
  std::size_t ft_steps = 0, nonzero = 0, mask_changes = 0;
  adv.lr = 0.01;
  train_network(net, train, adv, &mask, [&](const StepInfo&) {
    for (std::size_t i : net.parametric_layers()) {
      const Tensor& w = net.layers()[i].weight;
      for (std::size_t j = 0; j < w.numel(); ++j) nonzero += mask.layers[i][j] == 0.0 && w[j] != 0.0;
      mask_changes += !(mask.layers[i] == mask_copy.layers[i]);
    }
    ++ft_steps;
  });
  const bool ok = theta_changes == 0 && nonzero == 0 && mask_changes == 0 && steps > 0 &&
                  ft_steps > 0;
  return {ok, fmt("theta changed at %zu of %zu prune steps; %zu nonzero masked weights and %zu "
                  "mask changes over %zu finetune steps",
                  theta_changes, steps, nonzero, mask_changes, ft_steps)};
}

// ---------------------------------------------------------------------------
// 11. Quantization bound

Outcome quantization_bound(Context& ctx) {
  if (ctx.pruned99.empty()) {
    // Standalone: rebuild the seed-0 desk model.
    const PipelineConfig c = desk_config(ctx, 0, Method::kHydra, 99.0, "c11");
    RunOptions o;
    o.last = Stage::kFinetune;
    o.final_state = &ctx.pruned99[0];
    run_pipeline(c, o);
  }
  double worst_ratio = 0.0, worst_drop = -1.0;
  std::size_t zero_bad = 0;
  std::string drops;
  for (auto& [seed, state] : ctx.pruned99) {
    const PipelineConfig c = desk_config(ctx, seed, Method::kHydra, 99.0, "c11");
    const DataBundle data = load_data(c);
    EvalConfig e;
    Network dense = state.net;
    const double before = *evaluate_metrics(dense, MaskedWeights(dense, *state.mask), data.test, e).benign;

    Network q = state.net;
    quantize_weights(q, 8);
    for (std::size_t i : q.parametric_layers()) {
      const Tensor &t = state.net.layers()[i].weight, &qt = q.layers()[i].weight;
      double peak = 0.0;
      for (double v : t.values()) peak = std::max(peak, std::fabs(v));
      if (peak == 0.0) continue;
      const double delta = peak / 127.0;
      for (std::size_t j = 0; j < t.numel(); ++j) {
        worst_ratio = std::max(worst_ratio, std::fabs(qt[j] - t[j]) / (delta / 2));
        zero_bad += t[j] == 0.0 && qt[j] != 0.0;
      }
    }
    const double after = *evaluate_metrics(q, MaskedWeights(q, *state.mask), data.test, e).benign;
    worst_drop = std::max(worst_drop, before - after);
    drops += (drops.empty() ? "" : ", ") + fmt("seed %llu %.3f->%.3f",
                                               static_cast<unsigned long long>(seed), before, after);
  }
  const bool ok = worst_ratio <= 1.0 && zero_bad == 0 && worst_drop <= 0.02;
  return {ok, fmt("max |q-theta| = %.6f * step/2; %zu zeros moved; benign %s (max drop %.1f pp)",
                  worst_ratio, zero_bad, drops.c_str(), 100 * worst_drop)};
}

// ---------------------------------------------------------------------------
// 12. Pipeline determinism

std::string csv_without_wall(const fs::path& p) {
  std::ifstream in(p);
  std::string out, line;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome pipeline_determinism(Context& ctx) {
  const auto run = [&](const std::string& name, std::size_t threads) {
    PipelineConfig c = desk_config(ctx, 11, Method::kHydra, 99.0, "c12");
    c.output_dir = (ctx.out / "c12" / name).string();
    c.dataset.train_limit = 1500;
    c.dataset.test_limit = 200;
    c.pretrain.epochs = 1;
    c.prune.epochs = 1;
    c.finetune.epochs = 1;
    c.training.attack.steps = 3;
    c.eval.metrics = {Metric::kBenign, Metric::kEra, Metric::kVraT, Metric::kVraS};
    c.eval.attack.steps = 10;
    c.eval.attack.restarts = 2;
    c.eval.smoothing.n0 = 50;
    c.eval.smoothing.n = 1000;
    c.eval.smoothing_limit = 12;
    c.eval.batch_size = 32;
    c.eval.threads = threads;
    run_pipeline(c, {});
    return csv_without_wall(fs::path(c.output_dir) / "report.csv");
  };
  const std::string a = run("serial-a", 1), b = run("serial-b", 1), c = run("parallel", 4);
  const bool ok = a == b && a == c && a.find('\n') != a.size() - 1;
  std::string row = a.substr(a.find('\n') + 1);
  row = row.substr(0, row.find('\n'));
  return {ok, fmt("report.csv %s across threads=1,1,4 (row: %s)",
                  ok ? "byte-identical" : "differs", row.c_str())};
}

}  // namespace
}  // namespace robustprune

int main(int argc, char** argv) {
  using namespace robustprune;
  CLI::App app{"Acceptance criteria runner"};
  std::string only, out = "acceptance-out", data = ROBUSTPRUNE_DATA_DIR;
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--out", out, "Scratch and report directory");
  app.add_option("--data", data, "Directory with the MNIST IDX files");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) selected.insert(std::stoi(tok));

  Context ctx{out, data, {}};
  fs::create_directories(ctx.out);
  std::ofstream log(ctx.out / "acceptance.txt");

  const std::vector<std::pair<const char*, std::function<Outcome(Context&)>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"init equivalence", init_equivalence},
      {"sparsity exactness", sparsity_exactness},
      {"straight-through oracle", ste_oracle},
      {"PGD analytic optimality", pgd_optimality},
      {"IBP soundness", ibp_soundness},
      {"smoothing certification", smoothing_certification},
      {"end-to-end ordering", end_to_end_ordering},
      {"epoch-ablation endpoint", epoch_ablation},
      {"frozen invariants", frozen_invariants},
      {"quantization bound", quantization_bound},
      {"pipeline determinism", pipeline_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string line = fmt("%s %2d %s: ", o.pass ? "PASS" : "FAIL", id, criteria[i].first) +
                             o.detail + fmt(" (%.1f s)", s);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << "\n" << std::flush;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
