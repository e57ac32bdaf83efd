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

#include "mfacm/datastore.hpp"
#include "mfacm/synthgen.hpp"
#include "mfacm/trainer.hpp"

namespace mfacm::train {
namespace {

using model::ClassifierKind;
using model::Logits;
using model::ModelShape;

std::vector<Example<float>> small_dataset(std::size_t n_per_class, double delta, std::uint64_t seed) {
  synth::SynthConfig c;
  c.layers = 2;
  c.frames = 6;
  c.dim = 4;
  c.n_per_class = n_per_class;
  c.delta = delta;
  c.seed = seed;
  return synth::generate(c);
}

std::string checkpoint_bytes(const model::Model<float>& m) {
  return io::encode_checkpoint(model::to_named_tensors(m));
}

double dataset_loss(const model::Model<float>& m, const std::vector<Example<float>>& data) {
  double total = 0;
  for (const auto& ex : data) total += cross_entropy(predict(m, ex.embeddings), ex.label).loss;
  return total / static_cast<double>(data.size());
}

TEST(CrossEntropy, UniformPosterior) {
  for (Label y : {Label::kSpoof, Label::kBonafide}) {
    const auto r = cross_entropy<double>({0, 0}, y);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  }
}

TEST(CrossEntropy, SaturatedCorrect) {
  EXPECT_LT(cross_entropy<double>({-20, 20}, Label::kBonafide).loss, 1e-8);
  EXPECT_TRUE(std::isfinite(cross_entropy<double>({-800, 800}, Label::kSpoof).loss));
}

TEST(CrossEntropy, MatchesSoftmaxThenLog) {
  const auto r = cross_entropy<double>({1.0, -0.5}, Label::kSpoof, 1.0);
  EXPECT_NEAR(r.loss, 0.2014132779827524, 1e-15);
  EXPECT_NEAR(r.grad[0], -0.18242552380635635, 1e-15);
  EXPECT_NEAR(r.grad[1], 0.18242552380635635, 1e-15);

  const auto w = cross_entropy<double>({1.0, -0.5}, Label::kSpoof, 9.0);
  EXPECT_NEAR(w.loss, 9 * r.loss, 1e-14);
  EXPECT_NEAR(w.grad[1], 9 * r.grad[1], 1e-14);
  EXPECT_THROW(cross_entropy<double>({NAN, 0}, Label::kSpoof), DomainError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  num::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Label y = rng.below(2) ? Label::kBonafide : Label::kSpoof;
    const double w = rng.uniform(0.5, 3);
    const num::Tensor<double> z = num::Tensor<double>::vector({3 * rng.normal(), 3 * rng.normal()});
    const auto ce = cross_entropy<double>({z[0], z[1]}, y, w);
    const auto fd = num::finite_diff_grad(
        [&](const num::Tensor<double>& p) { return cross_entropy<double>({p[0], p[1]}, y, w).loss; }, z,
        1e-5);
    const double analytic[] = {ce.grad[0], ce.grad[1]};
    ASSERT_LT(num::max_relative_error(analytic, fd.values(), 1e-4), 1e-6);
  }
}

TEST(Schedule, StepDecay) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 0.003);
  EXPECT_DOUBLE_EQ(lr_at(3199, cfg), 0.003);
  EXPECT_DOUBLE_EQ(lr_at(3200, cfg), 0.0015);
  EXPECT_DOUBLE_EQ(lr_at(6400, cfg), 0.00075);
  EXPECT_DOUBLE_EQ(lr_at(9600, cfg), 0.000375);
  for (std::size_t s = 1; s < 20000; s += 97) EXPECT_LE(lr_at(s, cfg), lr_at(s - 1, cfg));
}

TEST(Adam, ZeroGradientFromFreshStateIsNoop) {
  float p[] = {0.25f, -3.0f};
  const float g[] = {0, 0};
  float m[2] = {}, v[2] = {};
  adam_update<float>(p, g, m, v, 1, 0.003, {});
  EXPECT_EQ(p[0], 0.25f);
  EXPECT_EQ(p[1], -3.0f);
}

TEST(Adam, FirstStepMagnitude) {
  double p[] = {0}, m[] = {0}, v[] = {0};
  const double g[] = {1};
  adam_update<double>(p, g, m, v, 1, 0.003, {});
  EXPECT_NEAR(p[0], -0.003 / (1 + 1e-8), 1e-18);
}

TEST(Adam, ThreeStepTrajectory) {
  double p[] = {0}, m[] = {0}, v[] = {0};
  const double expect[] = {-0.002999999970000003, -0.002842105234736846, -0.0038494852984637838};
  const double grads[] = {1, -1, 1};
  for (int s = 0; s < 3; ++s) {
    adam_update<double>(p, std::span<const double>(&grads[s], 1), m, v, s + 1, 0.003, {});
    EXPECT_NEAR(p[0], expect[s], 1e-12);
  }
  EXPECT_GE(v[0], 0.0);
}

TEST(Train, SameSeedIsBitwiseIdentical) {
  const auto data = small_dataset(20, 2.0, 1);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.max_steps = 30;
  cfg.seed = 5;
  for (auto kind : {ClassifierKind::kMfa, ClassifierKind::kGap, ClassifierKind::kTnFc}) {
    ModelShape s;
    s.kind = kind;
    const auto a = train<float>(data, s, cfg), b = train<float>(data, s, cfg);
    EXPECT_EQ(checkpoint_bytes(a.final_model), checkpoint_bytes(b.final_model));
    EXPECT_EQ(checkpoint_bytes(a.best_model), checkpoint_bytes(b.best_model));
    EXPECT_EQ(format_log(a.log), format_log(b.log));
  }
  const auto base = train<float>(data, ModelShape{}, cfg);
  cfg.seed = 6;
  const auto other = train<float>(data, ModelShape{}, cfg);
  EXPECT_NE(checkpoint_bytes(base.final_model), checkpoint_bytes(other.final_model));
}

TEST(Train, LossDecreasesOnSeparableData) {
  const auto data = small_dataset(32, 3.0, 2);
  TrainConfig cfg;
  cfg.batch = 16;
  cfg.seed = 3;
  cfg.max_steps = 0;
  const auto initial = train<float>(data, ModelShape{}, cfg);
  cfg.max_steps = 50;
  const auto trained = train<float>(data, ModelShape{}, cfg);
  EXPECT_LT(dataset_loss(trained.final_model, data), dataset_loss(initial.final_model, data));
  ASSERT_EQ(trained.log.size(), 50u);
  EXPECT_LT(trained.log.back().loss, trained.log.front().loss);
}

TEST(Train, FullBatchSmallStepIsMonotone) {
  const auto data = small_dataset(16, 2.0, 3);
  TrainConfig cfg;
  cfg.batch = data.size();
  cfg.lr0 = 1e-4;
  cfg.max_steps = 40;
  for (auto kind : {ClassifierKind::kMfa, ClassifierKind::kGap, ClassifierKind::kTnFc}) {
    ModelShape s;
    s.kind = kind;
    const auto r = train<float>(data, s, cfg);
    for (std::size_t i = 1; i < r.log.size(); ++i)
      ASSERT_LE(r.log[i].loss, r.log[i - 1].loss + 1e-6) << model::kind_name(kind) << " step " << i;
  }
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto data = small_dataset(8, 1.0, 4);
  TrainConfig cfg;
  cfg.lr0 = 0;
  cfg.batch = 4;
  cfg.max_steps = 0;
  const auto init = train<float>(data, ModelShape{}, cfg);
  cfg.max_steps = 10;
  const auto after = train<float>(data, ModelShape{}, cfg);
  EXPECT_EQ(checkpoint_bytes(after.final_model), checkpoint_bytes(init.final_model));
}

TEST(Train, ClassWeightsChangeTheResult) {
  auto data = small_dataset(30, 1.0, 5);
  // Drop most spoof utterances to make the set imbalanced.
  std::vector<Example<float>> imbalanced;
  std::size_t spoof = 0;
  for (auto& ex : data)
    if (ex.label == Label::kBonafide || spoof++ < 5) imbalanced.push_back(ex);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.max_steps = 20;
  const auto a = train<float>(imbalanced, ModelShape{}, cfg);
  cfg.weight_spoof = 9;
  const auto b = train<float>(imbalanced, ModelShape{}, cfg);
  EXPECT_NE(checkpoint_bytes(a.final_model), checkpoint_bytes(b.final_model));
}

TEST(Train, ShortFinalBatchAndBestEpoch) {
  const auto data = small_dataset(5, 2.0, 6);  // 10 utterances: batches of 4, 4, 2
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.max_steps = 9;
  const auto r = train<float>(data, ModelShape{}, cfg);
  ASSERT_EQ(r.log.size(), 9u);
  double best = INFINITY;
  for (std::size_t e = 0; e < 3; ++e)
    best = std::min(best, (r.log[3 * e].loss + r.log[3 * e + 1].loss + r.log[3 * e + 2].loss) / 3);
  EXPECT_DOUBLE_EQ(r.best_epoch_loss, best);
}

TEST(Train, StepsAndLearningRatesAreLogged) {
  const auto data = small_dataset(4, 1.0, 7);
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.step_size = 2;
  cfg.max_steps = 5;
  const auto r = train<float>(data, ModelShape{}, cfg);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].step, i);
    EXPECT_DOUBLE_EQ(r.log[i].lr, lr_at(i, cfg));
  }
  const auto text = format_log(r.log);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(Train, RejectsBadInputs) {
  auto data = small_dataset(4, 1.0, 8);
  std::vector<Example<float>> bona;
  for (auto& ex : data)
    if (ex.label == Label::kBonafide) bona.push_back(ex);
  EXPECT_THROW(train<float>(bona, ModelShape{}, TrainConfig{}), DomainError);
  EXPECT_THROW(train<float>(std::vector<Example<float>>{}, ModelShape{}, TrainConfig{}), DomainError);

  TrainConfig bad;
  bad.gamma = 0;
  EXPECT_THROW(train<float>(data, ModelShape{}, bad), DomainError);
  bad = {};
  bad.beta1 = 1;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = {};
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), DomainError);

  data[3].embeddings = LayeredEmbeddings<float>(2, 6, 5);
  EXPECT_THROW(train<float>(data, ModelShape{}, TrainConfig{}), ShapeError);
}

}  // namespace
}  // namespace mfacm::train
