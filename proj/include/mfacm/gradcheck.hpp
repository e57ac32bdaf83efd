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

// Finite-difference verification of every hand-written backward pass, in
// 64-bit, with central differences.

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "mfacm/asp.hpp"
#include "mfacm/classifier.hpp"
#include "mfacm/tensor.hpp"
#include "mfacm/trainer.hpp"

namespace mfacm::gradcheck {

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;
// Denominator floor of the relative error. Gradients smaller than this are
// compared absolutely (the scalar attention bias has an identically zero
// gradient, since softmax is shift invariant).
inline constexpr double kRelativeFloor = 1e-4;

struct CheckResult {
  std::string name;  // e.g. "asp.W", "mfa.tasp.1.v"
  std::size_t trial;
  double max_rel_error;
  bool passed;
};

namespace detail {

inline std::size_t pick(num::Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

/// Compares `analytic` against central differences of `f` around `x`,
/// where `f` sees the probe written into `x` itself.
template <typename F>
CheckResult compare(std::string name, std::size_t trial, num::Tensor<double>& x,
                    const num::Tensor<double>& analytic, F&& f) {
  const num::Tensor<double> saved = x;
  auto probe = [&](const num::Tensor<double>& p) {
    x = p;
    return f();
  };
  const auto numeric = num::finite_diff_grad(probe, saved, kStep);
  x = saved;
  const double err = num::max_relative_error(analytic.values(), numeric.values(), kRelativeFloor);
  return {std::move(name), trial, err, err < kTolerance};
}

}  // namespace detail

/// Checks grad w.r.t. Z, W, b, v, k of g . r for one random ASP instance.
inline std::vector<CheckResult> check_asp(num::Rng& rng, std::size_t trial) {
  const std::size_t T = detail::pick(rng, 2, 6), D = detail::pick(rng, 1, 4),
                    A = detail::pick(rng, 1, 5);
  asp::AspParams<double> p(D, A);
  num::fill_normal(p.W, rng);
  num::fill_normal(p.b, rng, 0.5);
  num::fill_normal(p.v, rng);
  num::fill_normal(p.k, rng);
  num::Tensor<double> Z({T, D});
  num::fill_normal(Z, rng);
  num::Tensor<double> g({2 * D});
  num::fill_normal(g, rng);

  auto objective = [&] {
    const auto s = asp::forward<double>(Z, p, false);
    double f = 0;
    for (std::size_t i = 0; i < g.size(); ++i) f += g[i] * s.r[i];
    return f;
  };
  const auto s = asp::forward<double>(Z, p);
  const auto grads = asp::backward<double>(p, s, g.values());

  std::vector<CheckResult> out;
  out.push_back(detail::compare("asp.Z", trial, Z, grads.inputs, objective));
  out.push_back(detail::compare("asp.W", trial, p.W, grads.params.W, objective));
  out.push_back(detail::compare("asp.b", trial, p.b, grads.params.b, objective));
  out.push_back(detail::compare("asp.v", trial, p.v, grads.params.v, objective));
  out.push_back(detail::compare("asp.k", trial, p.k, grads.params.k, objective));
  return out;
}

/// Checks every parameter tensor and the embeddings of a random classifier
/// of the given kind, through the cross-entropy loss.
inline std::vector<CheckResult> check_classifier(num::Rng& rng, std::size_t trial,
                                                 model::ClassifierKind kind) {
  model::ModelShape shape;
  shape.kind = kind;
  shape.layers = detail::pick(rng, 1, 3);
  shape.dim = detail::pick(rng, 1, 4);
  shape.attention = detail::pick(rng, 1, 4);
  shape.hidden = detail::pick(rng, 1, 5);
  const std::size_t T = detail::pick(rng, 2, 5);

  model::Model<double> m(shape);
  m.for_each([&](const std::string&, num::Tensor<double>& t) { num::fill_normal(t, rng, 0.7); });
  LayeredEmbeddings<double> H(shape.layers, T, shape.dim);
  num::fill_normal(H.tensor(), rng);
  const Label label = rng.below(2) ? Label::kBonafide : Label::kSpoof;
  const double weight = rng.uniform(0.5, 2.0);

  auto objective = [&] {
    const auto f = model::forward<double>(H, m);
    return train::cross_entropy<double>(f.logits, label, weight).loss;
  };
  const auto f = model::forward<double>(H, m);
  const auto ce = train::cross_entropy<double>(f.logits, label, weight);
  const auto grads = model::backward<double>(m, f.cache, ce.grad);

  const std::string prefix = std::string(model::kind_name(kind)) + ".";
  std::vector<CheckResult> out;
  std::vector<num::Tensor<double>*> params;
  std::vector<std::string> names;
  m.for_each([&](const std::string& n, num::Tensor<double>& t) {
    params.push_back(&t);
    names.push_back(n);
  });
  const auto analytic = grads.params.tensors();
  for (std::size_t i = 0; i < params.size(); ++i)
    out.push_back(detail::compare(prefix + names[i], trial, *params[i], *analytic[i], objective));
  out.push_back(detail::compare(prefix + "H", trial, H.tensor(), grads.inputs.tensor(), objective));
  return out;
}

inline CheckResult check_cross_entropy(num::Rng& rng, std::size_t trial) {
  num::Tensor<double> z({2});
  num::fill_normal(z, rng, 3.0);
  const Label label = rng.below(2) ? Label::kBonafide : Label::kSpoof;
  const double weight = rng.uniform(0.5, 2.0);
  auto loss = [&] { return train::cross_entropy<double>({z[0], z[1]}, label, weight).loss; };
  const auto ce = train::cross_entropy<double>({z[0], z[1]}, label, weight);
  const num::Tensor<double> analytic({2}, std::vector<double>{ce.grad[0], ce.grad[1]});
  return detail::compare("cross_entropy", trial, z, analytic, loss);
}

/// Runs `trials` random instances of every check.
inline std::vector<CheckResult> run_all(std::size_t trials, std::uint64_t seed) {
  num::Rng rng(seed);
  std::vector<CheckResult> out;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& r : check_asp(rng, t)) out.push_back(std::move(r));
    for (auto kind : {model::ClassifierKind::kMfa, model::ClassifierKind::kGap,
                      model::ClassifierKind::kTnFc})
      for (auto& r : check_classifier(rng, t, kind)) out.push_back(std::move(r));
    out.push_back(check_cross_entropy(rng, t));
  }
  return out;
}

inline std::string format_result(const CheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-4s %-24s trial=%zu max_rel_err=%.3e", r.passed ? "ok" : "FAIL",
                r.name.c_str(), r.trial, r.max_rel_error);
  return buf;
}

}  // namespace mfacm::gradcheck
