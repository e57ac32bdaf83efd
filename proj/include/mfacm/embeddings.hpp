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

#include <string>
#include <string_view>

#include "mfacm/tensor.hpp"

namespace mfacm {

enum class Label { kSpoof = 0, kBonafide = 1 };

inline std::string_view label_name(Label l) {
  return l == Label::kBonafide ? "bonafide" : "spoof";
}

/// Per-utterance stack of encoder layer outputs, laid out
/// [layer][frame][dim]. Layer slice `l` is the frame sequence of layer l+1.
template <typename T>
class LayeredEmbeddings {
 public:
  LayeredEmbeddings() = default;

  LayeredEmbeddings(std::size_t layers, std::size_t frames, std::size_t dim)
      : values_({layers, frames, dim}) {}

  explicit LayeredEmbeddings(num::Tensor<T> values) : values_(std::move(values)) {
    if (values_.rank() != 3)
      throw ShapeError("layered embeddings must be rank 3, got " +
                       num::dims_string(values_.dims()));
  }

  std::size_t layers() const { return values_.dim(0); }
  std::size_t frames() const { return values_.dim(1); }
  std::size_t dim() const { return values_.dim(2); }

  /// Frame sequence of one layer as a contiguous frames x dim block.
  std::span<const T> layer(std::size_t l) const { return values_.row(l); }
  std::span<T> layer(std::size_t l) { return values_.row(l); }

  T& at(std::size_t l, std::size_t t, std::size_t d) { return values_(l, t, d); }
  const T& at(std::size_t l, std::size_t t, std::size_t d) const { return values_(l, t, d); }

  const num::Tensor<T>& tensor() const { return values_; }
  num::Tensor<T>& tensor() { return values_; }

  template <typename U>
  LayeredEmbeddings<U> cast() const {
    return LayeredEmbeddings<U>(values_.template cast<U>());
  }

  friend bool operator==(const LayeredEmbeddings& a, const LayeredEmbeddings& b) {
    return a.values_ == b.values_;
  }

 private:
  num::Tensor<T> values_;
};

}  // namespace mfacm
