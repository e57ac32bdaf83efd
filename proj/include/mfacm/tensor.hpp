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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfacm {

/// Base of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when an input is outside an operation's domain (empty input,
/// single-class score set, degenerate cost model, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

namespace num {

using Dims = std::vector<std::size_t>;

inline std::size_t element_count(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. The last index varies fastest.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Dims dims, T fill = T{0})
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    for (auto d : dims_)
      if (d == 0) throw ShapeError("tensor extent must be positive: " + dims_string(dims_));
  }

  Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (element_count(dims_) != data_.size())
      throw ShapeError("tensor dims " + dims_string(dims_) + " hold " +
                       std::to_string(element_count(dims_)) + " values, got " +
                       std::to_string(data_.size()));
  }

  static Tensor vector(std::vector<T> values) {
    Dims d{values.size()};
    return Tensor(std::move(d), std::move(values));
  }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  /// Contiguous view of row `i` of a rank-2 tensor, or of slab `i` of a
  /// higher-rank one.
  std::span<T> row(std::size_t i) {
    const std::size_t stride = data_.size() / dims_[0];
    return std::span<T>(data_).subspan(i * stride, stride);
  }
  std::span<const T> row(std::size_t i) const {
    const std::size_t stride = data_.size() / dims_[0];
    return std::span<const T>(data_).subspan(i * stride, stride);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(dims_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  std::vector<T> data_;
};

inline void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": extent " + std::to_string(a) +
                     " does not match " + std::to_string(b));
}

/// y = W x + b with W stored A x D row-major.
template <typename T>
void linear(std::span<const T> W, std::size_t rows, std::span<const T> x,
            std::span<const T> b, std::span<T> y) {
  require_same(W.size(), rows * x.size(), "linear weight");
  require_same(b.size(), rows, "linear bias");
  require_same(y.size(), rows, "linear output");
  const std::size_t cols = x.size();
  for (std::size_t a = 0; a < rows; ++a) {
    const T* w = W.data() + a * cols;
    T acc = b[a];
    for (std::size_t d = 0; d < cols; ++d) acc += w[d] * x[d];
    y[a] = acc;
  }
}

template <typename T>
Tensor<T> linear(const Tensor<T>& W, const Tensor<T>& x, const Tensor<T>& b) {
  if (W.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + dims_string(W.dims()));
  require_same(W.dim(1), x.size(), "linear inner");
  require_same(W.dim(0), b.size(), "linear bias");
  Tensor<T> y({W.dim(0)});
  linear<T>(W.values(), W.dim(0), x.values(), b.values(), y.values());
  return y;
}

/// Accumulates the input-side and weight-side gradients of y = W x + b.
/// grad_x may be empty when the input gradient is not needed.
template <typename T>
void linear_backward(std::span<const T> W, std::span<const T> x, std::span<const T> grad_y,
                     std::span<T> grad_W, std::span<T> grad_b, std::span<T> grad_x) {
  const std::size_t rows = grad_y.size(), cols = x.size();
  for (std::size_t a = 0; a < rows; ++a) {
    const T g = grad_y[a];
    grad_b[a] += g;
    T* gw = grad_W.data() + a * cols;
    for (std::size_t d = 0; d < cols; ++d) gw[d] += g * x[d];
    if (!grad_x.empty()) {
      const T* w = W.data() + a * cols;
      for (std::size_t d = 0; d < cols; ++d) grad_x[d] += g * w[d];
    }
  }
}

template <typename T>
void softmax(std::span<const T> e, std::span<T> out) {
  if (e.empty()) throw DomainError("softmax of an empty vector");
  require_same(out.size(), e.size(), "softmax output");
  const T m = *std::max_element(e.begin(), e.end());
  T sum = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    out[i] = std::exp(e[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& e) {
  if (e.empty()) throw DomainError("softmax of an empty vector");
  Tensor<T> out(e.dims());
  softmax<T>(e.values(), out.values());
  return out;
}

/// Central finite-difference gradient of a scalar function. Intended for
/// 64-bit verification of the hand-written backward passes.
template <typename F>
Tensor<double> finite_diff_grad(F&& f, const Tensor<double>& x, double h) {
  if (!(h > 0)) throw DomainError("finite difference step must be positive");
  Tensor<double> probe = x;
  Tensor<double> g(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(static_cast<const Tensor<double>&>(probe));
    probe[i] = orig - h;
    const double fm = f(static_cast<const Tensor<double>&>(probe));
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw DomainError("non-finite function value while probing coordinate " + std::to_string(i));
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries
/// whose true gradient is ~0 from dominating on rounding noise.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  require_same(a.size(), b.size(), "relative error");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// SplitMix64-seeded xoshiro256** with Box-Muller normals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = next_u64();
    while (r >= limit);
    return r % n;
  }

  /// Standard normal. Always consumes exactly two uniforms and returns the
  /// cosine branch.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    return radius * std::cos(2.0 * kPi * u2);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
};

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double scale = 1.0) {
  for (auto& v : t.values()) v = static_cast<T>(scale * rng.normal());
}

}  // namespace num
}  // namespace mfacm
