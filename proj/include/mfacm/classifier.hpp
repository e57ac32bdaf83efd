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

// Utterance classifiers over layered embeddings.
//
//   MFA    r^l = T-ASP_l(H^l) for every layer, o = L-ASP([r^1 .. r^L]),
//          then the FC head on o (width 4D).
//   GAP    mean over time of the final layer, then the FC head (width D).
//   TN_FC  per-dimension z-score of the final layer over time, the first FC
//          layer applied frame-wise, mean over time, then the output layer.
//
// FC head: hidden = tanh(fc1.W x + fc1.b), logits = fc2.W hidden + fc2.b.
// Logit 0 is spoof, logit 1 is bonafide; the CM score is their difference.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfacm/asp.hpp"
#include "mfacm/datastore.hpp"
#include "mfacm/embeddings.hpp"
#include "mfacm/tensor.hpp"

namespace mfacm::model {

enum class ClassifierKind { kMfa = 0, kGap = 1, kTnFc = 2 };

inline std::string_view kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kMfa: return "mfa";
    case ClassifierKind::kGap: return "gap";
    case ClassifierKind::kTnFc: return "tnfc";
  }
  return "?";
}

inline std::optional<ClassifierKind> parse_kind(std::string_view s) {
  if (s == "mfa") return ClassifierKind::kMfa;
  if (s == "gap") return ClassifierKind::kGap;
  if (s == "tnfc") return ClassifierKind::kTnFc;
  return std::nullopt;
}

struct ModelShape {
  ClassifierKind kind = ClassifierKind::kMfa;
  std::size_t layers = 1;     // L
  std::size_t dim = 1;        // D
  std::size_t attention = 0;  // A, 0 selects D
  std::size_t hidden = 0;     // D_h, 0 selects D

  std::size_t attention_width() const { return attention ? attention : dim; }
  std::size_t hidden_width() const { return hidden ? hidden : dim; }
  std::size_t head_input() const { return kind == ClassifierKind::kMfa ? 4 * dim : dim; }
};

template <typename T>
struct HeadParams {
  num::Tensor<T> fc1_W, fc1_b, fc2_W, fc2_b;

  HeadParams() = default;
  HeadParams(std::size_t input, std::size_t hidden)
      : fc1_W({hidden, input}), fc1_b({hidden}), fc2_W({2, hidden}), fc2_b({2}) {}

  std::size_t input_dim() const { return fc1_W.dim(1); }
  std::size_t hidden_dim() const { return fc1_W.dim(0); }
};

/// Trainable parameters of one classifier. Baseline heads leave `tasp`
/// empty and `lasp` unset.
template <typename T>
struct Model {
  ModelShape shape;
  std::vector<asp::AspParams<T>> tasp;
  asp::AspParams<T> lasp;
  HeadParams<T> head;

  Model() = default;

  explicit Model(const ModelShape& s) : shape(s) {
    if (s.layers < 1 || s.dim < 1) throw DomainError("model needs at least one layer and dim");
    const std::size_t A = s.attention_width();
    if (s.kind == ClassifierKind::kMfa) {
      for (std::size_t l = 0; l < s.layers; ++l) tasp.emplace_back(s.dim, A);
      lasp = asp::AspParams<T>(2 * s.dim, A);
    }
    head = HeadParams<T>(s.head_input(), s.hidden_width());
  }

  /// Visits (checkpoint name, tensor) for every trainable tensor in a fixed
  /// order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for_each_impl(*this, fn);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for_each_impl(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const num::Tensor<T>& t) { n += t.size(); });
    return n;
  }

  void set_zero() {
    for_each([](const std::string&, num::Tensor<T>& t) { t.fill(T{0}); });
  }

  /// Uniform in +-1/sqrt(fan_in), drawn in for_each order.
  void init_uniform(num::Rng& rng) {
    for (auto& p : tasp) p.init_uniform(rng);
    if (shape.kind == ClassifierKind::kMfa) lasp.init_uniform(rng);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(head.input_dim()));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(head.hidden_dim()));
    num::fill_uniform(head.fc1_W, rng, b1);
    num::fill_uniform(head.fc1_b, rng, b1);
    num::fill_uniform(head.fc2_W, rng, b2);
    num::fill_uniform(head.fc2_b, rng, b2);
  }

  template <typename U>
  Model<U> cast() const {
    Model<U> out(shape);
    auto src = tensors();
    std::size_t i = 0;
    out.for_each([&](const std::string&, num::Tensor<U>& t) { t = src[i++]->template cast<U>(); });
    return out;
  }

  std::vector<const num::Tensor<T>*> tensors() const {
    std::vector<const num::Tensor<T>*> out;
    for_each([&](const std::string&, const num::Tensor<T>& t) { out.push_back(&t); });
    return out;
  }

 private:
  template <typename Self, typename Fn>
  static void for_each_impl(Self& self, Fn& fn) {
    for (std::size_t l = 0; l < self.tasp.size(); ++l) {
      const std::string prefix = "tasp." + std::to_string(l) + ".";
      self.tasp[l].for_each([&](const char* n, auto& t) { fn(prefix + n, t); });
    }
    if (self.shape.kind == ClassifierKind::kMfa)
      self.lasp.for_each([&](const char* n, auto& t) { fn(std::string("lasp.") + n, t); });
    fn(std::string("fc1.W"), self.head.fc1_W);
    fn(std::string("fc1.b"), self.head.fc1_b);
    fn(std::string("fc2.W"), self.head.fc2_W);
    fn(std::string("fc2.b"), self.head.fc2_b);
  }
};

/// Closed-form MFA parameter count for (L, D, A, D_h).
inline std::size_t mfa_parameter_count(std::size_t L, std::size_t D, std::size_t A, std::size_t Dh) {
  return L * (A * D + 2 * A + 1) + (A * 2 * D + 2 * A + 1) + (Dh * 4 * D + Dh) + (2 * Dh + 2);
}

template <typename T>
struct Logits {
  T spoof = 0;
  T bonafide = 0;

  T cm_score() const { return bonafide - spoof; }
  T operator[](std::size_t i) const { return i == 0 ? spoof : bonafide; }
};

template <typename T>
struct Cache {
  ClassifierKind kind = ClassifierKind::kMfa;
  std::size_t layers = 0, frames = 0, dim = 0;

  // MFA
  std::vector<asp::AspSummary<T>> tasp;
  asp::AspSummary<T> lasp;

  // Head input (o, pooled mean, or empty for TN_FC) and activations.
  std::vector<T> head_input;
  std::vector<T> hidden;  // pooled hidden for TN_FC

  // TN_FC
  num::Tensor<T> normalized;     // T x D
  num::Tensor<T> frame_hidden;   // T x D_h
  std::vector<T> inv_std;        // D
  std::vector<bool> floored;     // D

  bool valid = false;
};

template <typename T>
struct Forward {
  Logits<T> logits;
  Cache<T> cache;
};

namespace detail {

template <typename T>
void check_extents(const LayeredEmbeddings<T>& H, const Model<T>& m) {
  if (H.dim() != m.shape.dim)
    throw ShapeError("embedding dim " + std::to_string(H.dim()) + " does not match model dim " +
                     std::to_string(m.shape.dim));
  if (m.shape.kind == ClassifierKind::kMfa && H.layers() != m.shape.layers)
    throw ShapeError("embedding has " + std::to_string(H.layers()) + " layers, model expects " +
                     std::to_string(m.shape.layers));
}

template <typename T>
Logits<T> head_output(const HeadParams<T>& head, std::span<const T> hidden) {
  T out[2];
  num::linear<T>(head.fc2_W.values(), 2, hidden, head.fc2_b.values(), std::span<T>(out, 2));
  return {out[0], out[1]};
}

template <typename T>
void tanh_layer(const HeadParams<T>& head, std::span<const T> x, std::span<T> hidden) {
  num::linear<T>(head.fc1_W.values(), head.hidden_dim(), x, head.fc1_b.values(), hidden);
  for (auto& v : hidden) v = std::tanh(v);
}

}  // namespace detail

template <typename T>
Forward<T> forward(const LayeredEmbeddings<T>& H, const Model<T>& m) {
  detail::check_extents(H, m);
  Forward<T> f;
  auto& c = f.cache;
  c.kind = m.shape.kind;
  c.layers = H.layers();
  c.frames = H.frames();
  c.dim = H.dim();
  const std::size_t D = H.dim(), T_ = H.frames(), Dh = m.head.hidden_dim();
  const std::size_t last = H.layers() - 1;

  switch (m.shape.kind) {
    case ClassifierKind::kMfa: {
      num::Tensor<T> stacked({H.layers(), 2 * D});
      for (std::size_t l = 0; l < H.layers(); ++l) {
        c.tasp.push_back(asp::forward<T>(H.layer(l), T_, m.tasp[l]));
        std::copy(c.tasp.back().r.values().begin(), c.tasp.back().r.values().end(),
                  stacked.row(l).begin());
      }
      c.lasp = asp::forward<T>(stacked, m.lasp);
      c.head_input.assign(c.lasp.r.values().begin(), c.lasp.r.values().end());
      c.hidden.resize(Dh);
      detail::tanh_layer<T>(m.head, c.head_input, c.hidden);
      break;
    }
    case ClassifierKind::kGap: {
      c.head_input.assign(D, T{0});
      const auto layer = H.layer(last);
      for (std::size_t t = 0; t < T_; ++t)
        for (std::size_t d = 0; d < D; ++d) c.head_input[d] += layer[t * D + d];
      for (auto& v : c.head_input) v /= static_cast<T>(T_);
      c.hidden.resize(Dh);
      detail::tanh_layer<T>(m.head, c.head_input, c.hidden);
      break;
    }
    case ClassifierKind::kTnFc: {
      const auto layer = H.layer(last);
      std::vector<T> mean(D, T{0});
      for (std::size_t t = 0; t < T_; ++t)
        for (std::size_t d = 0; d < D; ++d) mean[d] += layer[t * D + d];
      for (auto& v : mean) v /= static_cast<T>(T_);
      std::vector<T> var(D, T{0});
      for (std::size_t t = 0; t < T_; ++t)
        for (std::size_t d = 0; d < D; ++d) {
          const T x = layer[t * D + d] - mean[d];
          var[d] += x * x;
        }
      c.inv_std.resize(D);
      c.floored.resize(D);
      const T floor = static_cast<T>(asp::kVarianceFloor);
      for (std::size_t d = 0; d < D; ++d) {
        var[d] /= static_cast<T>(T_);
        c.floored[d] = !(var[d] > floor);
        c.inv_std[d] = 1 / std::sqrt(c.floored[d] ? floor : var[d]);
      }
      c.normalized = num::Tensor<T>({T_, D});
      c.frame_hidden = num::Tensor<T>({T_, Dh});
      c.hidden.assign(Dh, T{0});
      for (std::size_t t = 0; t < T_; ++t) {
        auto z = c.normalized.row(t);
        for (std::size_t d = 0; d < D; ++d) z[d] = (layer[t * D + d] - mean[d]) * c.inv_std[d];
        auto h = c.frame_hidden.row(t);
        detail::tanh_layer<T>(m.head, z, h);
        for (std::size_t j = 0; j < Dh; ++j) c.hidden[j] += h[j];
      }
      for (auto& v : c.hidden) v /= static_cast<T>(T_);
      break;
    }
  }
  f.logits = detail::head_output<T>(m.head, c.hidden);
  c.valid = true;
  return f;
}

template <typename T>
struct Gradients {
  Model<T> params;
  LayeredEmbeddings<T> inputs;
};

/// Adds parameter gradients into `grad` (same shape as `m`). When
/// `grad_inputs` is non-null the gradient w.r.t. the embeddings is written
/// (not accumulated) there.
template <typename T>
void backward_accumulate(const Model<T>& m, const Cache<T>& c, const T (&grad_logits)[2],
                         Model<T>& grad, LayeredEmbeddings<T>* grad_inputs = nullptr) {
  if (!c.valid) throw DomainError("classifier backward requires a forward cache");
  const std::size_t D = c.dim, T_ = c.frames, Dh = m.head.hidden_dim();
  if (grad_inputs) *grad_inputs = LayeredEmbeddings<T>(c.layers, T_, D);

  const std::span<const T> g_logits(grad_logits, 2);
  std::vector<T> g_hidden(Dh, T{0});
  num::linear_backward<T>(m.head.fc2_W.values(), c.hidden, g_logits, grad.head.fc2_W.values(),
                          grad.head.fc2_b.values(), g_hidden);

  if (c.kind == ClassifierKind::kTnFc) {
    // Frame-wise first layer, then back through the z-score.
    num::Tensor<T> g_norm({T_, D});
    std::vector<T> g_pre(Dh);
    const T inv_T = 1 / static_cast<T>(T_);
    for (std::size_t t = 0; t < T_; ++t) {
      const auto h = c.frame_hidden.row(t);
      for (std::size_t j = 0; j < Dh; ++j) g_pre[j] = g_hidden[j] * inv_T * (1 - h[j] * h[j]);
      num::linear_backward<T>(m.head.fc1_W.values(), c.normalized.row(t), g_pre,
                              grad.head.fc1_W.values(), grad.head.fc1_b.values(), g_norm.row(t));
    }
    if (!grad_inputs) return;
    auto g_layer = grad_inputs->layer(c.layers - 1);
    for (std::size_t d = 0; d < D; ++d) {
      T mean_g = 0, mean_gz = 0;
      for (std::size_t t = 0; t < T_; ++t) {
        mean_g += g_norm(t, d);
        mean_gz += g_norm(t, d) * c.normalized(t, d);
      }
      mean_g *= inv_T;
      mean_gz *= inv_T;
      if (c.floored[d]) mean_gz = 0;
      for (std::size_t t = 0; t < T_; ++t)
        g_layer[t * D + d] =
            c.inv_std[d] * (g_norm(t, d) - mean_g - c.normalized(t, d) * mean_gz);
    }
    return;
  }

  std::vector<T> g_pre(Dh);
  for (std::size_t j = 0; j < Dh; ++j) g_pre[j] = g_hidden[j] * (1 - c.hidden[j] * c.hidden[j]);
  std::vector<T> g_head_in(c.head_input.size(), T{0});
  num::linear_backward<T>(m.head.fc1_W.values(), c.head_input, g_pre, grad.head.fc1_W.values(),
                          grad.head.fc1_b.values(), g_head_in);

  if (c.kind == ClassifierKind::kGap) {
    if (!grad_inputs) return;
    auto g_layer = grad_inputs->layer(c.layers - 1);
    const T inv_T = 1 / static_cast<T>(T_);
    for (std::size_t t = 0; t < T_; ++t)
      for (std::size_t d = 0; d < D; ++d) g_layer[t * D + d] = g_head_in[d] * inv_T;
    return;
  }

  num::Tensor<T> g_stacked({c.layers, 2 * D});
  asp::backward_accumulate<T>(m.lasp, c.lasp, g_head_in, grad.lasp, g_stacked.values());
  for (std::size_t l = 0; l < c.layers; ++l) {
    std::span<T> g_layer;
    if (grad_inputs) g_layer = grad_inputs->layer(l);
    asp::backward_accumulate<T>(m.tasp[l], c.tasp[l], g_stacked.row(l), grad.tasp[l], g_layer);
  }
}

template <typename T>
Gradients<T> backward(const Model<T>& m, const Cache<T>& c, const T (&grad_logits)[2]) {
  Gradients<T> g{Model<T>(m.shape), {}};
  backward_accumulate<T>(m, c, grad_logits, g.params, &g.inputs);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint binding

inline constexpr std::string_view kKindTensorName = "head.kind";

template <typename T>
io::NamedTensors to_named_tensors(const Model<T>& m) {
  io::NamedTensors out;
  out.emplace_back(std::string(kKindTensorName),
                   num::Tensor<float>({1}, static_cast<float>(m.shape.kind)));
  m.for_each([&](const std::string& name, const num::Tensor<T>& t) {
    out.emplace_back(name, t.template cast<float>());
  });
  return out;
}

/// Rebuilds a model from checkpoint tensors. Unknown or missing names and
/// shape mismatches are errors.
template <typename T>
Model<T> from_named_tensors(const io::NamedTensors& tensors) {
  std::map<std::string, const num::Tensor<float>*, std::less<>> by_name;
  for (const auto& [name, t] : tensors) by_name.emplace(name, &t);

  auto take = [&](std::string_view name) -> const num::Tensor<float>& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DomainError("checkpoint is missing tensor \"" + std::string(name) + "\"");
    const auto* t = it->second;
    by_name.erase(it);
    return *t;
  };

  const auto& kind_t = take(kKindTensorName);
  if (kind_t.size() != 1 || kind_t[0] < 0 || kind_t[0] > 2 || kind_t[0] != std::floor(kind_t[0]))
    throw DomainError("checkpoint has an invalid head.kind tensor");
  ModelShape shape;
  shape.kind = static_cast<ClassifierKind>(static_cast<int>(kind_t[0]));

  const auto fc1_it = by_name.find("fc1.W");
  if (fc1_it == by_name.end()) throw DomainError("checkpoint is missing tensor \"fc1.W\"");
  const auto& fc1 = *fc1_it->second;
  if (fc1.rank() != 2) throw ShapeError("fc1.W must be rank 2");
  shape.hidden = fc1.dim(0);
  if (shape.kind == ClassifierKind::kMfa) {
    std::size_t layers = 0;
    while (by_name.count("tasp." + std::to_string(layers) + ".W")) ++layers;
    if (layers == 0) throw DomainError("MFA checkpoint has no tasp tensors");
    const auto& w0 = *by_name.at("tasp.0.W");
    if (w0.rank() != 2) throw ShapeError("tasp.0.W must be rank 2");
    shape.layers = layers;
    shape.dim = w0.dim(1);
    shape.attention = w0.dim(0);
  } else {
    shape.layers = 1;
    shape.dim = fc1.dim(1);
  }

  Model<T> m(shape);
  m.for_each([&](const std::string& name, num::Tensor<T>& t) {
    const auto& src = take(name);
    if (src.dims() != t.dims())
      throw ShapeError("checkpoint tensor \"" + name + "\" has dims " + num::dims_string(src.dims()) +
                       ", expected " + num::dims_string(t.dims()));
    t = src.template cast<T>();
  });
  if (!by_name.empty()) {
    std::string names;
    for (const auto& [name, _] : by_name) names += (names.empty() ? "" : ", ") + name;
    throw DomainError("checkpoint has unknown tensors: " + names);
  }
  return m;
}

}  // namespace mfacm::model
