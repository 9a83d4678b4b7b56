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

#include <chrono>
#include <vector>

#include "gtest/gtest.h"

#include "robustprune/errors.hpp"
#include "robustprune/training.hpp"
#include "test_util.hpp"

namespace robustprune {
namespace {

Network small_net(std::uint64_t seed) {
  Network net("small", {1, 6, 6});
  net.flatten().dense(12).relu().dense(3);
  Rng rng = make_rng(seed);
  net.initialize(rng);
  return net;
}

StageOptions benign_stage(std::size_t epochs, double lr = 0.1) {
  StageOptions o;
  o.epochs = epochs;
  o.lr = lr;
  o.batch_size = 8;
  o.data_seed = 1;
  o.noise_seed = 2;
  return o;
}

TEST(TrainNetworkTest, BenignTrainingReducesLoss) {
  const Dataset d = testing::banded_dataset(48, 3, 6, 0);
  Network net = small_net(1);
  const StageLog log = train_network(net, d, benign_stage(5));
  ASSERT_EQ(log.epochs.size(), 5u);
  EXPECT_EQ(log.steps, 30u);
  EXPECT_LT(log.epochs.back().loss, log.epochs.front().loss);
}

TEST(TrainNetworkTest, MaskedWeightsStayZeroAndMaskIsUntouched) {
  const Dataset d = testing::banded_dataset(48, 3, 6, 0);
  Network net = small_net(2);
  const PruneMask mask = lwm_mask(net, 80.0);
  const PruneMask before = mask;
  std::size_t checked = 0;
  StageOptions o = benign_stage(3);
  o.weight_decay = 0.01;
  train_network(net, d, o, &mask, [&](const StepInfo&) {
    for (std::size_t i : net.parametric_layers()) {
      const Tensor& w = net.layers()[i].weight;
      for (std::size_t j = 0; j < w.numel(); ++j) {
        if (mask.layers[i][j] == 0.0) {
          ASSERT_EQ(w[j], 0.0);
        }
      }
    }
    ++checked;
  });
  EXPECT_EQ(checked, 18u);
  for (std::size_t i = 0; i < mask.layers.size(); ++i) EXPECT_EQ(mask.layers[i], before.layers[i]);
}

TEST(PruneOptimizeTest, ThetaFrozenAndCountsExact) {
  const Dataset d = testing::banded_dataset(48, 3, 6, 0);
  const Network net = small_net(3);
  const Network before = net;
  ImportanceScores scores = scaled_init(net, 6.0);
  const ImportanceScores init = scores;
  std::size_t masks = 0;
  const MaskObserver check = [&](std::size_t layer, const Tensor& m) {
    std::size_t ones = 0;
    for (double v : m.values()) ones += v == 1.0;
    EXPECT_EQ(ones, kept_count(m.numel(), 90.0)) << "layer " << layer;
    ++masks;
  };
  StageOptions o = benign_stage(2);
  const StageLog log = prune_optimize(net, scores, 90.0, d, o, check);
  EXPECT_GT(masks, 0u);
  EXPECT_GT(log.epochs.front().grad_norm, 0.0);
  for (std::size_t i : net.parametric_layers()) {
    EXPECT_EQ(net.layers()[i].weight, before.layers()[i].weight);
    EXPECT_EQ(net.layers()[i].bias, before.layers()[i].bias);
    EXPECT_FALSE(scores.layers[i] == init.layers[i]);
  }
}

TEST(PruneOptimizeTest, ZeroEpochsLeavesScores) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  const Network net = small_net(4);
  ImportanceScores scores = scaled_init(net, 6.0);
  const ImportanceScores init = scores;
  prune_optimize(net, scores, 90.0, d, benign_stage(0));
  for (std::size_t i = 0; i < scores.layers.size(); ++i)
    EXPECT_EQ(scores.layers[i], init.layers[i]);
  const PruneMask a = finalize_mask(net, scores, 90.0), b = lwm_mask(net, 90.0);
  for (std::size_t i = 0; i < a.layers.size(); ++i) EXPECT_EQ(a.layers[i], b.layers[i]);
}

TEST(PruneOptimizeTest, HeldBatchIsTraced) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  const Network net = small_net(4);
  ImportanceScores scores = scaled_init(net, 6.0);
  StageOptions o = benign_stage(2);
  o.held_batch = slice_batch(d, 0, 6);
  const StageLog log = prune_optimize(net, scores, 50.0, d, o);
  ASSERT_TRUE(log.initial_held_loss);
  ASSERT_TRUE(log.epochs.back().held_loss);
}

TEST(MultiStepTest, LastRatioGovernsAndScheduleMustIncrease) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  Network net = small_net(5);
  std::vector<StageLog> logs;
  const PruneMask m = multi_step_lwm(net, {50, 75, 90}, d, benign_stage(1, 0.01), &logs);
  EXPECT_EQ(logs.size(), 3u);
  for (std::size_t i : net.parametric_layers())
    EXPECT_EQ(m.kept(i), kept_count(net.layers()[i].weight.numel(), 90.0));
  Network other = small_net(5);
  EXPECT_THROW(multi_step_lwm(other, {50, 50}, d, benign_stage(1)), ConfigError);
}

TEST(MultiStepTest, SingleStepIsLwmPlusFinetune) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  Network a = small_net(6), b = small_net(6);
  const PruneMask ma = multi_step_lwm(a, {90}, d, benign_stage(1, 0.01));
  const PruneMask mb = lwm_mask(b, 90);
  StageOptions seg = benign_stage(1, 0.01);
  seg.noise_seed = derive_seed(seg.noise_seed, {0});
  seg.stage += "-0";
  train_network(b, d, seg, &mb);
  for (std::size_t i : a.parametric_layers()) {
    EXPECT_EQ(ma.layers[i], mb.layers[i]);
    EXPECT_EQ(a.layers()[i].weight, b.layers()[i].weight);
  }
}

TEST(TrainNetworkTest, DivergenceReportsStageAndStep) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  Network net = small_net(7);
  StageOptions o = benign_stage(3, 1e300);
  o.stage = "blowup";
  try {
    train_network(net, d, o);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("blowup"), std::string::npos) << e.what();
  }
}

TEST(TrainNetworkTest, ExpiredDeadlineStops) {
  const Dataset d = testing::banded_dataset(24, 3, 6, 0);
  Network net = small_net(8);
  StageOptions o = benign_stage(3);
  o.deadline = Deadline(std::chrono::steady_clock::now() - std::chrono::seconds(1));
  EXPECT_THROW(train_network(net, d, o), TimeLimitError);
}

}  // namespace
}  // namespace robustprune
