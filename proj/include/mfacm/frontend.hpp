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
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mfacm/datastore.hpp"
#include "mfacm/embeddings.hpp"
#include "mfacm/tensor.hpp"

namespace mfacm::frontend {

struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 16000;
};

struct PreprocConfig {
  double pre_emphasis = 0.97;
  std::size_t target_len = 64600;

  void validate() const {
    if (!(pre_emphasis >= 0 && pre_emphasis < 1))
      throw DomainError("pre-emphasis coefficient must lie in [0, 1)");
    if (target_len < 1) throw DomainError("target length must be at least 1");
  }
};

/// Pre-emphasis y[n] = x[n] - c*x[n-1] (y[0] = x[0]), then truncation to
/// target_len or cyclic repetition up to it.
inline std::vector<double> preprocess(const Waveform& wave, const PreprocConfig& cfg = {}) {
  cfg.validate();
  const auto& x = wave.samples;
  if (x.empty()) throw DomainError("empty waveform");
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("waveform contains a non-finite sample");

  std::vector<double> y(x.size());
  y[0] = x[0];
  for (std::size_t n = 1; n < x.size(); ++n) y[n] = x[n] - cfg.pre_emphasis * x[n - 1];

  std::vector<double> out(cfg.target_len);
  for (std::size_t n = 0; n < cfg.target_len; ++n) out[n] = y[n % y.size()];
  return out;
}

/// Mono 16-bit PCM RIFF/WAVE at 16 kHz; samples are scaled to [-1, 1).
inline Waveform decode_wav(std::string_view bytes, std::uint32_t expected_rate = 16000) {
  io::detail::ByteReader r(bytes);
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw ParseError(ParseErrorKind::kBadMagic, 0, "not a RIFF/WAVE file");
  r.raw(12, "RIFF header");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::size_t chunk_at = r.position();
    const auto id = r.raw(4, "chunk id");
    const auto size = r.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw ParseError(ParseErrorKind::kMalformedRecord, chunk_at, "short fmt chunk");
      const auto body = r.raw(size, "fmt chunk");
      io::detail::ByteReader f(body);
      format = f.u16("format");
      channels = f.u16("channels");
      rate = f.u32("sample rate");
      f.u32("byte rate");
      f.u16("block align");
      bits = f.u16("bits per sample");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt)
        throw ParseError(ParseErrorKind::kMalformedRecord, chunk_at, "data chunk before fmt chunk");
      if (format != 1 || bits != 16)
        throw DomainError("only 16-bit PCM WAV is supported");
      if (channels != 1)
        throw DomainError("expected mono audio, got " + std::to_string(channels) + " channels");
      if (rate != expected_rate)
        throw DomainError("expected " + std::to_string(expected_rate) + " Hz audio, got " +
                          std::to_string(rate) + " Hz");
      if (size % 2 != 0)
        throw ParseError(ParseErrorKind::kMalformedRecord, chunk_at, "odd PCM16 data size");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (auto& s : w.samples) s = static_cast<std::int16_t>(r.u16("sample")) / 32768.0;
      return w;
    } else {
      r.raw(size, "chunk");
    }
    if (size % 2 == 1 && r.remaining() > 0) r.raw(1, "chunk padding");
  }
  throw ParseError(ParseErrorKind::kTruncated, r.position(), "no data chunk");
}

inline std::string encode_wav(const Waveform& wave) {
  io::detail::ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(2 * wave.samples.size());
  w.raw("RIFF");
  w.u32(36 + data_bytes);
  w.raw("WAVE");
  w.raw("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(wave.sample_rate);
  w.u32(wave.sample_rate * 2);
  w.u16(2);
  w.u16(16);
  w.raw("data");
  w.u32(data_bytes);
  for (double s : wave.samples) {
    const double c = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(c)));
  }
  return w.bytes();
}

inline Waveform read_wav(const std::filesystem::path& path) { return decode_wav(io::read_file(path)); }

struct ToyEncoderConfig {
  std::uint64_t seed = 0;
  std::size_t layers = 12;
  std::size_t dim = 32;
  std::size_t win = 400;
  std::size_t hop = 320;

  void validate() const {
    if (layers < 1 || dim < 1) throw DomainError("encoder layers and dim must be at least 1");
    if (hop < 1 || win < hop) throw DomainError("encoder requires win >= hop >= 1");
  }

  std::size_t frame_count(std::size_t len) const {
    if (len < win)
      throw DomainError("sequence of " + std::to_string(len) + " samples is shorter than window " +
                        std::to_string(win));
    return 1 + (len - win) / hop;
  }
};

/// Frozen stand-in for a self-supervised speech encoder:
///   x_t  = tanh(W_in frame_t + b_in)
///   H^l  = tanh(W_l H^{l-1} + b_l) + H^{l-1},  H^0 = x,  l = 1..L
/// Weights are drawn once from the seed, uniform in +-1/sqrt(fan_in).
class ToyEncoder {
 public:
  explicit ToyEncoder(const ToyEncoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    num::Rng rng(cfg_.seed);
    w_in_ = num::Tensor<double>({cfg_.dim, cfg_.win});
    b_in_ = num::Tensor<double>({cfg_.dim});
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.win));
    num::fill_uniform(w_in_, rng, in_scale);
    num::fill_uniform(b_in_, rng, in_scale);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      num::Tensor<double> w({cfg_.dim, cfg_.dim}), b({cfg_.dim});
      num::fill_uniform(w, rng, scale);
      num::fill_uniform(b, rng, scale);
      w_.push_back(std::move(w));
      b_.push_back(std::move(b));
    }
  }

  const ToyEncoderConfig& config() const { return cfg_; }

  LayeredEmbeddings<float> encode(std::span<const double> samples) const {
    const std::size_t T = cfg_.frame_count(samples.size());
    const std::size_t D = cfg_.dim;
    LayeredEmbeddings<float> out(cfg_.layers, T, D);
    std::vector<double> h(D), next(D);
    for (std::size_t t = 0; t < T; ++t) {
      num::linear<double>(w_in_.values(), D, samples.subspan(t * cfg_.hop, cfg_.win),
                          b_in_.values(), h);
      for (auto& v : h) v = std::tanh(v);
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        num::linear<double>(w_[l].values(), D, h, b_[l].values(), next);
        for (std::size_t d = 0; d < D; ++d) {
          h[d] = std::tanh(next[d]) + h[d];
          out.at(l, t, d) = static_cast<float>(h[d]);
        }
      }
    }
    return out;
  }

 private:
  ToyEncoderConfig cfg_;
  num::Tensor<double> w_in_, b_in_;
  std::vector<num::Tensor<double>> w_, b_;
};

}  // namespace mfacm::frontend
