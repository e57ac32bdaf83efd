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

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mfacm/classifier.hpp"
#include "mfacm/embeddings.hpp"
#include "mfacm/tensor.hpp"

namespace mfacm::train {

struct TrainConfig {
  double lr0 = 0.003;
  std::size_t batch = 32;
  std::size_t step_size = 3200;
  double gamma = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t max_steps = 16000;
  std::uint64_t seed = 0;
  double weight_spoof = 1;
  double weight_bonafide = 1;

  void validate() const {
    if (!(lr0 >= 0)) throw DomainError("lr0 must be non-negative");
    if (batch < 1) throw DomainError("batch must be at least 1");
    if (step_size < 1) throw DomainError("step_size must be at least 1");
    if (!(gamma > 0 && gamma <= 1)) throw DomainError("gamma must lie in (0, 1]");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw DomainError("Adam betas must lie in [0, 1)");
    if (!(eps_adam > 0)) throw DomainError("eps_adam must be positive");
    if (!(weight_spoof > 0) || !(weight_bonafide > 0))
      throw DomainError("class weights must be positive");
  }

  double class_weight(Label l) const { return l == Label::kBonafide ? weight_bonafide : weight_spoof; }
};

/// Step decay: lr0 * gamma^floor(step / step_size).
inline double lr_at(std::size_t step, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.gamma, static_cast<double>(step / cfg.step_size));
}

template <typename T>
struct LossAndGrad {
  T loss;
  T grad[2];
};

/// Weighted softmax cross-entropy over the (spoof, bonafide) logits.
template <typename T>
LossAndGrad<T> cross_entropy(const model::Logits<T>& logits, Label label, double weight = 1.0) {
  if (!std::isfinite(logits.spoof) || !std::isfinite(logits.bonafide))
    throw DomainError("cross-entropy of non-finite logits");
  const T m = std::max(logits.spoof, logits.bonafide);
  const T e0 = std::exp(logits.spoof - m), e1 = std::exp(logits.bonafide - m);
  const T lse = m + std::log(e0 + e1);
  const T p[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
  const std::size_t y = static_cast<std::size_t>(label);
  const T w = static_cast<T>(weight);
  LossAndGrad<T> out;
  out.loss = w * (lse - logits[y]);
  for (std::size_t i = 0; i < 2; ++i) out.grad[i] = w * (p[i] - (i == y ? T{1} : T{0}));
  return out;
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `param`. `step` is the 1-based update
/// index used for bias correction.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t step, double lr, const AdamHyper& h) {
  num::require_same(param.size(), grad.size(), "Adam gradient");
  num::require_same(param.size(), m.size(), "Adam first moment");
  num::require_same(param.size(), v.size(), "Adam second moment");
  const double c1 = 1 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1 - std::pow(h.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (1 - b1) * g;
    v[i] = b2 * v[i] + (1 - b2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    const T delta = static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + h.eps));
    if (delta != 0) param[i] -= delta;
  }
}

/// Adam moments for every tensor of a model plus the update counter.
template <typename T>
struct AdamState {
  std::vector<num::Tensor<T>> m, v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(const model::Model<T>& like) {
    like.for_each([&](const std::string&, const num::Tensor<T>& p) {
      m.emplace_back(p.dims());
      v.emplace_back(p.dims());
    });
  }

  void step(model::Model<T>& params, const model::Model<T>& grads, double lr, const AdamHyper& h) {
    ++t;
    auto g = grads.tensors();
    std::size_t i = 0;
    params.for_each([&](const std::string&, num::Tensor<T>& p) {
      adam_update<T>(p.values(), g[i]->values(), m[i].values(), v[i].values(), t, lr, h);
      ++i;
    });
  }
};

template <typename T>
struct Example {
  std::string utt_id;
  LayeredEmbeddings<T> embeddings;
  Label label;
};

struct LogEntry {
  std::size_t step;
  double lr;
  double loss;
};

inline std::string format_log(const std::vector<LogEntry>& log) {
  std::string out;
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\n", e.step, e.lr, e.loss);
    out += buf;
  }
  return out;
}

template <typename T>
struct TrainResult {
  model::Model<T> final_model;
  model::Model<T> best_model;  // end-of-epoch snapshot with the lowest mean loss
  double best_epoch_loss = std::numeric_limits<double>::infinity();
  std::vector<LogEntry> log;
};

/// Loss and mean gradient of one batch.
template <typename T>
double batch_gradient(const model::Model<T>& m, std::span<const Example<T>> data,
                      std::span<const std::size_t> batch, const TrainConfig& cfg,
                      model::Model<T>& grad) {
  grad.set_zero();
  double loss = 0;
  for (const std::size_t idx : batch) {
    const auto& ex = data[idx];
    const auto f = model::forward<T>(ex.embeddings, m);
    const auto ce = cross_entropy<T>(f.logits, ex.label, cfg.class_weight(ex.label));
    loss += ce.loss;
    model::backward_accumulate<T>(m, f.cache, ce.grad, grad);
  }
  const T inv = T{1} / static_cast<T>(batch.size());
  grad.for_each([&](const std::string&, num::Tensor<T>& t) {
    for (auto& g : t.values()) g *= inv;
  });
  return loss / static_cast<double>(batch.size());
}

inline void check_dataset_labels(std::size_t n, std::size_t n_bonafide) {
  if (n == 0) throw DomainError("training set is empty");
  if (n_bonafide == 0 || n_bonafide == n)
    throw DomainError("training set must contain both bonafide and spoof utterances");
}

/// Mini-batch Adam with step learning-rate decay. Epochs visit the data in
/// a seeded random order; the final batch of an epoch may be short. Fully
/// deterministic in (seed, data, cfg, shape).
template <typename T>
TrainResult<T> train(std::span<const Example<T>> data, model::ModelShape shape,
                     const TrainConfig& cfg) {
  cfg.validate();
  std::size_t n_bonafide = 0;
  for (const auto& ex : data) n_bonafide += ex.label == Label::kBonafide;
  check_dataset_labels(data.size(), n_bonafide);
  shape.layers = data[0].embeddings.layers();
  shape.dim = data[0].embeddings.dim();
  for (const auto& ex : data)
    if (ex.embeddings.layers() != shape.layers || ex.embeddings.dim() != shape.dim)
      throw ShapeError("utterance " + ex.utt_id + " has extents inconsistent with the first utterance");

  num::Rng init_rng(cfg.seed);
  num::Rng order_rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);

  TrainResult<T> result;
  result.final_model = model::Model<T>(shape);
  auto& params = result.final_model;
  params.init_uniform(init_rng);
  result.best_model = params;

  model::Model<T> grad(shape);
  AdamState<T> adam(params);
  const AdamHyper hyper{cfg.beta1, cfg.beta2, cfg.eps_adam};

  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  double epoch_loss = 0;
  std::size_t epoch_batches = 0;
  auto close_epoch = [&] {
    if (epoch_batches == 0) return;
    const double mean = epoch_loss / static_cast<double>(epoch_batches);
    if (mean < result.best_epoch_loss) {
      result.best_epoch_loss = mean;
      result.best_model = params;
    }
    epoch_loss = 0;
    epoch_batches = 0;
  };

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    if (cursor >= order.size()) {
      close_epoch();
      std::iota(order.begin(), order.end(), std::size_t{0});
      order_rng.shuffle(order.begin(), order.end());
      cursor = 0;
    }
    const std::size_t len = std::min(cfg.batch, order.size() - cursor);
    const std::span<const std::size_t> batch(order.data() + cursor, len);
    cursor += len;

    const double loss = batch_gradient<T>(params, data, batch, cfg, grad);
    const double lr = lr_at(step, cfg);
    adam.step(params, grad, lr, hyper);
    result.log.push_back({step, lr, loss});
    epoch_loss += loss;
    ++epoch_batches;
  }
  close_epoch();
  return result;
}

template <typename T>
model::Logits<T> predict(const model::Model<T>& m, const LayeredEmbeddings<T>& emb) {
  return model::forward<T>(emb, m).logits;
}

}  // namespace mfacm::train
