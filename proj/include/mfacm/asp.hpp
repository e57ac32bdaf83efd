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

// Attentive statistics pooling.
//
// For a sequence z_1..z_T of D-dimensional vectors:
//
//   e_t   = v . tanh(W z_t + b) + k
//   alpha = softmax(e)
//   mu    = sum_t alpha_t z_t
//   sigma = sqrt(max(sum_t alpha_t z_t*z_t - mu*mu, kVarianceFloor))
//   r     = [mu; sigma]
//
// The backward pass treats the variance floor as a constant wherever it is
// active, so sigma carries no gradient in those dimensions.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mfacm/tensor.hpp"

namespace mfacm::asp {

inline constexpr double kVarianceFloor = 1e-8;

template <typename T>
struct AspParams {
  num::Tensor<T> W;  // A x D
  num::Tensor<T> b;  // A
  num::Tensor<T> v;  // A
  num::Tensor<T> k;  // 1

  AspParams() = default;

  AspParams(std::size_t input_dim, std::size_t attention_dim)
      : W({attention_dim, input_dim}), b({attention_dim}), v({attention_dim}), k({1}) {}

  std::size_t input_dim() const { return W.dim(1); }
  std::size_t attention_dim() const { return W.dim(0); }

  std::size_t parameter_count() const { return W.size() + b.size() + v.size() + k.size(); }

  void validate() const {
    if (W.rank() != 2) throw ShapeError("ASP weight must be rank 2");
    num::require_same(b.size(), W.dim(0), "ASP bias");
    num::require_same(v.size(), W.dim(0), "ASP attention vector");
    num::require_same(k.size(), 1, "ASP scalar bias");
  }

  /// Visits (suffix, tensor) in checkpoint order: W, b, v, k.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("W", W);
    fn("b", b);
    fn("v", v);
    fn("k", k);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("W", W);
    fn("b", b);
    fn("v", v);
    fn("k", k);
  }

  void set_zero() {
    for_each([](const char*, num::Tensor<T>& t) { t.fill(T{0}); });
  }

  /// Uniform in +-1/sqrt(fan_in): fan_in is D for W and b, A for v and k.
  void init_uniform(num::Rng& rng) {
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(input_dim()));
    const double attn_bound = 1.0 / std::sqrt(static_cast<double>(attention_dim()));
    num::fill_uniform(W, rng, in_bound);
    num::fill_uniform(b, rng, in_bound);
    num::fill_uniform(v, rng, attn_bound);
    num::fill_uniform(k, rng, attn_bound);
  }
};

template <typename T>
struct AspSummary {
  num::Tensor<T> alpha;  // T
  num::Tensor<T> mu;     // D
  num::Tensor<T> sigma;  // D
  num::Tensor<T> r;      // 2D, [mu; sigma]

  // Backward cache. Empty when the forward pass ran without it.
  num::Tensor<T> inputs;       // T x D
  num::Tensor<T> activations;  // T x A, tanh(W z_t + b)
  std::vector<bool> floored;   // D, variance floor active

  bool has_cache() const { return !inputs.empty(); }
};

/// `Z` holds `frames` rows of params.input_dim() values each.
template <typename T>
AspSummary<T> forward(std::span<const T> Z, std::size_t frames, const AspParams<T>& params,
                      bool keep_cache = true) {
  params.validate();
  if (frames == 0) throw DomainError("attentive pooling over an empty sequence");
  const std::size_t D = params.input_dim(), A = params.attention_dim();
  num::require_same(Z.size(), frames * D, "ASP input");

  AspSummary<T> s;
  num::Tensor<T> act({frames, A});
  num::Tensor<T> e({frames});
  for (std::size_t t = 0; t < frames; ++t) {
    auto a = act.row(t);
    num::linear<T>(params.W.values(), A, Z.subspan(t * D, D), params.b.values(), a);
    T et = params.k[0];
    for (std::size_t i = 0; i < A; ++i) {
      a[i] = std::tanh(a[i]);
      et += params.v[i] * a[i];
    }
    e[t] = et;
  }
  s.alpha = num::softmax(e);

  s.mu = num::Tensor<T>({D});
  num::Tensor<T> second({D});
  for (std::size_t t = 0; t < frames; ++t) {
    const T w = s.alpha[t];
    const T* z = Z.data() + t * D;
    for (std::size_t d = 0; d < D; ++d) {
      s.mu[d] += w * z[d];
      second[d] += w * z[d] * z[d];
    }
  }

  s.sigma = num::Tensor<T>({D});
  s.r = num::Tensor<T>({2 * D});
  std::vector<bool> floored(D);
  const T floor = static_cast<T>(kVarianceFloor);
  for (std::size_t d = 0; d < D; ++d) {
    const T var = second[d] - s.mu[d] * s.mu[d];
    floored[d] = !(var > floor);
    s.sigma[d] = std::sqrt(floored[d] ? floor : var);
    s.r[d] = s.mu[d];
    s.r[D + d] = s.sigma[d];
  }

  if (keep_cache) {
    s.inputs = num::Tensor<T>({frames, D}, std::vector<T>(Z.begin(), Z.end()));
    s.activations = std::move(act);
    s.floored = std::move(floored);
  }
  return s;
}

template <typename T>
AspSummary<T> forward(const num::Tensor<T>& Z, const AspParams<T>& params, bool keep_cache = true) {
  if (Z.rank() != 2) throw ShapeError("ASP input must be frames x dim, got " + num::dims_string(Z.dims()));
  num::require_same(Z.dim(1), params.input_dim(), "ASP input dim");
  return forward<T>(Z.values(), Z.dim(0), params, keep_cache);
}

/// Adds the gradient of an objective whose gradient at r is `grad_r` into
/// `grad_params` and `grad_inputs` (frames x D, may be empty to skip).
template <typename T>
void backward_accumulate(const AspParams<T>& params, const AspSummary<T>& s,
                         std::span<const T> grad_r, AspParams<T>& grad_params,
                         std::span<T> grad_inputs) {
  if (!s.has_cache()) throw DomainError("ASP backward requires a forward cache");
  const std::size_t frames = s.inputs.dim(0), D = s.inputs.dim(1), A = params.attention_dim();
  num::require_same(grad_r.size(), 2 * D, "ASP upstream gradient");
  if (!grad_inputs.empty()) num::require_same(grad_inputs.size(), frames * D, "ASP input gradient");

  // Gradient w.r.t. the clamped variance, and total gradient w.r.t. mu
  // (direct plus through the -mu*mu term of the variance).
  std::vector<T> g_var(D), g_mu(D);
  for (std::size_t d = 0; d < D; ++d) {
    g_var[d] = s.floored[d] ? T{0} : grad_r[D + d] / (2 * s.sigma[d]);
    g_mu[d] = grad_r[d] - 2 * s.mu[d] * g_var[d];
  }

  std::vector<T> g_alpha(frames);
  T weighted = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const T* z = s.inputs.data() + t * D;
    T g = 0;
    for (std::size_t d = 0; d < D; ++d) g += g_mu[d] * z[d] + g_var[d] * z[d] * z[d];
    g_alpha[t] = g;
    weighted += s.alpha[t] * g;
  }

  std::vector<T> g_pre(A);
  for (std::size_t t = 0; t < frames; ++t) {
    const T at = s.alpha[t];
    const T g_e = at * (g_alpha[t] - weighted);
    const auto z = s.inputs.row(t);
    const auto act = s.activations.row(t);

    grad_params.k[0] += g_e;
    for (std::size_t i = 0; i < A; ++i) {
      grad_params.v[i] += g_e * act[i];
      g_pre[i] = g_e * params.v[i] * (1 - act[i] * act[i]);
    }
    std::span<T> gz;
    if (!grad_inputs.empty()) {
      gz = grad_inputs.subspan(t * D, D);
      for (std::size_t d = 0; d < D; ++d) gz[d] += at * (g_mu[d] + 2 * z[d] * g_var[d]);
    }
    num::linear_backward<T>(params.W.values(), z, g_pre, grad_params.W.values(),
                            grad_params.b.values(), gz);
  }
}

template <typename T>
struct AspGradients {
  num::Tensor<T> inputs;
  AspParams<T> params;
};

template <typename T>
AspGradients<T> backward(const AspParams<T>& params, const AspSummary<T>& s,
                         std::span<const T> grad_r) {
  if (!s.has_cache()) throw DomainError("ASP backward requires a forward cache");
  AspGradients<T> g{num::Tensor<T>(s.inputs.dims()),
                    AspParams<T>(params.input_dim(), params.attention_dim())};
  backward_accumulate<T>(params, s, grad_r, g.params, g.inputs.values());
  return g;
}

}  // namespace mfacm::asp
