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

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "gtest/gtest.h"

#include "robustprune/errors.hpp"
#include "robustprune/smoothing.hpp"

namespace robustprune {
namespace {

// Independent oracle: the one-sided Clopper-Pearson lower bound is the alpha
// quantile of Beta(x, n - x + 1).
double beta_oracle(std::size_t x, std::size_t n, double alpha) {
  return boost::math::ibeta_inv(static_cast<double>(x), static_cast<double>(n - x + 1), alpha);
}

TEST(ClopperPearsonTest, ClosedForms) {
  EXPECT_EQ(clopper_pearson_lower(0, 100, 1e-3), 0.0);
  EXPECT_NEAR(clopper_pearson_lower(100, 100, 1e-3), std::pow(0.001, 0.01), 1e-9);
}

TEST(ClopperPearsonTest, MatchesBetaQuantile) {
  for (auto [x, n] : {std::pair<std::size_t, std::size_t>{50, 100}, {1, 10}, {9990, 10000},
                      {7, 8}, {500, 1000}}) {
    EXPECT_NEAR(clopper_pearson_lower(x, n, 1e-3), beta_oracle(x, n, 1e-3), 1e-6) << x << "/" << n;
  }
}

TEST(ClopperPearsonTest, TailAtBoundEqualsAlpha) {
  const double p = clopper_pearson_lower(50, 100, 1e-3);
  EXPECT_NEAR(binomial_upper_tail(50, 100, p), 1e-3, 1e-9);
}

TEST(ClopperPearsonTest, RejectsBadArguments) {
  EXPECT_THROW(clopper_pearson_lower(5, 4, 0.01), ConfigError);
  EXPECT_THROW(clopper_pearson_lower(1, 4, 0.0), ConfigError);
}

TEST(NormalTest, InverseCdfMatchesBoost) {
  const boost::math::normal_distribution<double> std_normal;
  for (double p : {0.5, 0.6, 0.933254, 0.99, 0.999999, 1e-4}) {
    EXPECT_NEAR(inverse_normal_cdf(p), boost::math::quantile(std_normal, p), 1e-9) << p;
  }
}

TEST(CertificateTest, RadiusAndAbstention) {
  const Certificate c = certificate_from_bound(3, 0.933254, 0.25, 110.0 / 255.0);
  EXPECT_FALSE(c.abstain);
  const boost::math::normal_distribution<double> std_normal;
  EXPECT_NEAR(c.radius, 0.25 * boost::math::quantile(std_normal, 0.933254), 1e-6);
  EXPECT_NEAR(c.radius, 0.3752, 1e-4);
  EXPECT_FALSE(c.certified);  // 0.3752 < 110/255

  const Certificate half = certificate_from_bound(3, 0.5, 0.25, 0.0);
  EXPECT_TRUE(half.abstain);
  EXPECT_FALSE(half.certified);
  EXPECT_EQ(half.radius, 0.0);
}

TEST(CertificateTest, ConstantClassifierIsCertified) {
  Network net("const", {1, 2, 2});
  net.flatten().dense(3);
  net.layers()[1].weight = Tensor({3, 4}, 0.0);
  net.layers()[1].bias = Tensor({3}, std::vector<double>{0.0, 5.0, 0.0});
  SmoothingConfig cfg;
  cfg.n0 = 20;
  cfg.n = 200;
  cfg.batch = 64;
  const Certificate c = smoothing_certify(net, FrozenWeights(), Tensor({1, 2, 2}, 0.5), cfg, 1);
  EXPECT_EQ(c.predicted, 1);
  EXPECT_NEAR(c.p_lower, std::pow(cfg.alpha, 1.0 / 200.0), 1e-9);
  EXPECT_NEAR(c.radius, 0.25 * inverse_normal_cdf(c.p_lower), 1e-12);
}

}  // namespace
}  // namespace robustprune
