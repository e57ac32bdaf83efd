// Copyright 2026 The mfacm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mfacm/asp.hpp"
#include "mfacm/gradcheck.hpp"

namespace mfacm::asp {
namespace {

using num::Tensor;

AspParams<double> random_params(num::Rng& rng, std::size_t D, std::size_t A) {
  AspParams<double> p(D, A);
  num::fill_normal(p.W, rng);
  num::fill_normal(p.b, rng);
  num::fill_normal(p.v, rng);
  num::fill_normal(p.k, rng);
  return p;
}

TEST(AspForward, FixedInstanceMatchesScalarOracle) {
  AspParams<double> p(2, 2);
  p.W = Tensor<double>({2, 2}, std::vector<double>{0.5, -0.25, 0.1, 0.3});
  p.b = Tensor<double>::vector({0.1, -0.2});
  p.v = Tensor<double>::vector({1.0, -0.5});
  p.k = Tensor<double>::vector({0.3});
  const Tensor<double> Z({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto s = forward(Z, p);

  const double alpha[] = {0.2610105280487088, 0.33100693115626767, 0.4079825407950236};
  const double r[] = {3.29394402549263, 4.29394402549263, 1.6092138407471261, 1.6092138407471261};
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(s.alpha[t], alpha[t], 1e-14);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.r[i], r[i], 1e-13);
}

TEST(AspForward, SingleFrameClampsVariance) {
  num::Rng rng(1);
  const auto p = random_params(rng, 3, 2);
  const Tensor<double> Z({1, 3}, std::vector<double>{0.5, -1, 2});
  const auto s = forward(Z, p);
  EXPECT_EQ(s.alpha[0], 1.0);
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(s.mu[d], Z[d]);
    EXPECT_DOUBLE_EQ(s.sigma[d], std::sqrt(kVarianceFloor));
  }
}

TEST(AspForward, ZeroAttentionIsStatisticsPooling) {
  num::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 2 + rng.below(10), D = 1 + rng.below(5), A = 1 + rng.below(4);
    auto p = random_params(rng, D, A);
    p.v.fill(0);
    p.k.fill(0);
    Tensor<double> Z({T, D});
    num::fill_normal(Z, rng, 2.0);
    const auto s = forward(Z, p);
    for (std::size_t t = 0; t < T; ++t) ASSERT_NEAR(s.alpha[t], 1.0 / T, 1e-15);
    for (std::size_t d = 0; d < D; ++d) {
      double mean = 0, var = 0;
      for (std::size_t t = 0; t < T; ++t) mean += Z(t, d);
      mean /= T;
      for (std::size_t t = 0; t < T; ++t) var += (Z(t, d) - mean) * (Z(t, d) - mean);
      ASSERT_NEAR(s.mu[d], mean, 1e-12);
      ASSERT_NEAR(s.sigma[d], std::sqrt(var / T), 1e-12);
    }
  }
}

TEST(AspForward, AlphaIsOnTheSimplex) {
  num::Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = 1 + rng.below(20), D = 1 + rng.below(6), A = 1 + rng.below(6);
    const auto p = random_params(rng, D, A);
    Tensor<double> Z({T, D});
    num::fill_normal(Z, rng, 3.0);
    const auto s = forward(Z, p);
    double sum = 0;
    for (std::size_t t = 0; t < T; ++t) {
      ASSERT_GT(s.alpha[t], 0.0);
      sum += s.alpha[t];
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t d = 0; d < D; ++d) ASSERT_GE(s.sigma[d], 0.0);
  }
}

TEST(AspForward, SinglePrecisionSimplex) {
  num::Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    AspParams<float> p(4, 3);
    p.init_uniform(rng);
    Tensor<float> Z({1 + rng.below(60), 4});
    num::fill_normal(Z, rng);
    const auto s = forward(Z, p);
    float sum = 0;
    for (float a : s.alpha.values()) sum += a;
    ASSERT_NEAR(sum, 1.0f, 1e-6f);
  }
}

TEST(AspForward, TimePermutationInvariance) {
  num::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + rng.below(12), D = 1 + rng.below(5);
    const auto p = random_params(rng, D, 1 + rng.below(5));
    Tensor<double> Z({T, D});
    num::fill_normal(Z, rng);
    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Tensor<double> P({T, D});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < D; ++d) P(t, d) = Z(perm[t], d);
    const auto a = forward(Z, p), b = forward(P, p);
    for (std::size_t i = 0; i < 2 * D; ++i) ASSERT_NEAR(a.r[i], b.r[i], 1e-12);
  }
}

TEST(AspForward, ShapeAndDomainErrors) {
  AspParams<double> p(3, 2);
  EXPECT_THROW(forward(Tensor<double>({4, 2}), p), ShapeError);
  EXPECT_THROW(forward<double>(std::span<const double>(), 0, p), DomainError);
  AspSummary<double> no_cache = forward(Tensor<double>({2, 3}), p, false);
  std::vector<double> g(6);
  EXPECT_THROW(backward<double>(p, no_cache, g), DomainError);
}

TEST(AspBackward, ZeroUpstreamGivesZeroGradients) {
  num::Rng rng(6);
  const auto p = random_params(rng, 3, 4);
  Tensor<double> Z({5, 3});
  num::fill_normal(Z, rng);
  const auto s = forward(Z, p);
  const std::vector<double> zero(6, 0.0);
  const auto g = backward<double>(p, s, zero);
  for (double v : g.inputs.values()) EXPECT_EQ(v, 0.0);
  g.params.for_each([](const char*, const Tensor<double>& t) {
    for (double v : t.values()) EXPECT_EQ(v, 0.0);
  });
}

TEST(AspBackward, LinearInUpstreamGradient) {
  num::Rng rng(7);
  const auto p = random_params(rng, 3, 4);
  Tensor<double> Z({5, 3}), g({6});
  num::fill_normal(Z, rng);
  num::fill_normal(g, rng);
  Tensor<double> g2 = g;
  for (auto& v : g2.values()) v *= 2;
  const auto s = forward(Z, p);
  const auto a = backward<double>(p, s, g.values()), b = backward<double>(p, s, g2.values());
  for (std::size_t i = 0; i < a.inputs.size(); ++i) EXPECT_NEAR(b.inputs[i], 2 * a.inputs[i], 1e-14);
  for (std::size_t i = 0; i < a.params.W.size(); ++i)
    EXPECT_NEAR(b.params.W[i], 2 * a.params.W[i], 1e-14);
}

TEST(AspBackward, FiniteDifferenceAgreement) {
  // T=4, D=3, A=5 with a fixed upstream gradient.
  num::Rng rng(8);
  auto p = random_params(rng, 3, 5);
  Tensor<double> Z({4, 3}), g({6});
  num::fill_normal(Z, rng);
  num::fill_normal(g, rng);
  auto objective = [&] {
    const auto s = forward(Z, p, false);
    double f = 0;
    for (std::size_t i = 0; i < 6; ++i) f += g[i] * s.r[i];
    return f;
  };
  const auto grads = backward<double>(p, forward(Z, p), g.values());
  const std::pair<Tensor<double>*, const Tensor<double>*> pairs[] = {
      {&Z, &grads.inputs}, {&p.W, &grads.params.W}, {&p.b, &grads.params.b},
      {&p.v, &grads.params.v}, {&p.k, &grads.params.k}};
  for (const auto& [x, analytic] : pairs) {
    const auto r = gradcheck::detail::compare("asp", 0, *x, *analytic, objective);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(AspBackward, ScalarBiasHasZeroGradient) {
  num::Rng rng(9);
  const auto p = random_params(rng, 2, 3);
  Tensor<double> Z({6, 2}), g({4});
  num::fill_normal(Z, rng);
  num::fill_normal(g, rng);
  const auto grads = backward<double>(p, forward(Z, p), g.values());
  EXPECT_NEAR(grads.params.k[0], 0.0, 1e-14);
}

TEST(AspParams, CountAndInit) {
  AspParams<double> p(7, 3);
  EXPECT_EQ(p.parameter_count(), 3u * 7 + 3 + 3 + 1);
  num::Rng rng(10);
  p.init_uniform(rng);
  for (double w : p.W.values()) EXPECT_LE(std::abs(w), 1 / std::sqrt(7.0));
  for (double v : p.v.values()) EXPECT_LE(std::abs(v), 1 / std::sqrt(3.0));
}

}  // namespace
}  // namespace mfacm::asp
