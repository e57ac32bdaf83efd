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

// Synthetic layered-embedding datasets. Every frame is isotropic Gaussian
// noise; frames carrying class signal are shifted by +delta/2 * u
// (bonafide) or -delta/2 * u (spoof) along a unit direction u drawn from
// direction_seed, so splits generated with different seeds share u.
//
//   global_shift   every layer and frame carries the shift
//   layer_sparse   only layer j (1-based) carries it
//   time_sparse    only the first ceil(rho * T) frames of each layer do

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfacm/datastore.hpp"
#include "mfacm/embeddings.hpp"
#include "mfacm/trainer.hpp"

namespace mfacm::synth {

enum class Mode { kGlobalShift, kLayerSparse, kTimeSparse };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kGlobalShift: return "global_shift";
    case Mode::kLayerSparse: return "layer_sparse";
    case Mode::kTimeSparse: return "time_sparse";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "global_shift") return Mode::kGlobalShift;
  if (s == "layer_sparse") return Mode::kLayerSparse;
  if (s == "time_sparse") return Mode::kTimeSparse;
  return std::nullopt;
}

struct SynthConfig {
  std::size_t layers = 4;
  std::size_t frames = 50;
  std::size_t dim = 16;
  std::size_t n_per_class = 100;
  Mode mode = Mode::kGlobalShift;
  std::size_t layer = 1;  // j, layer_sparse only
  double rho = 1.0;       // time_sparse only
  double delta = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 0;            // noise draws
  std::uint64_t direction_seed = 0;  // u; shared by train and eval splits

  void validate() const {
    if (layers < 1 || frames < 1 || dim < 1) throw DomainError("synthetic extents must be positive");
    if (n_per_class < 1) throw DomainError("n_per_class must be at least 1");
    if (!(delta >= 0) || !std::isfinite(delta)) throw DomainError("delta must be non-negative");
    if (!(noise > 0) || !std::isfinite(noise)) throw DomainError("noise must be positive");
    if (mode == Mode::kLayerSparse && (layer < 1 || layer > layers))
      throw DomainError("layer_sparse layer must lie in [1, L]");
    if (mode == Mode::kTimeSparse && !(rho > 0 && rho <= 1))
      throw DomainError("time_sparse rho must lie in (0, 1]");
  }

  std::size_t active_frames() const {
    if (mode != Mode::kTimeSparse) return frames;
    return static_cast<std::size_t>(std::ceil(rho * static_cast<double>(frames)));
  }

  bool layer_active(std::size_t l) const { return mode != Mode::kLayerSparse || l + 1 == layer; }
};

/// The seeded unit direction that separates the classes.
inline std::vector<double> class_direction(const SynthConfig& cfg) {
  num::Rng rng(cfg.direction_seed);
  std::vector<double> u(cfg.dim);
  double norm = 0;
  do {
    norm = 0;
    for (auto& x : u) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0);
  norm = std::sqrt(norm);
  for (auto& x : u) x /= norm;
  return u;
}

inline std::string utterance_id(Label label, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", label == Label::kBonafide ? "bona" : "spoof", i);
  return buf;
}

/// Utterances in the order bona_0, spoof_0, bona_1, spoof_1, ...
inline std::vector<train::Example<float>> generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto u = class_direction(cfg);
  num::Rng rng(cfg.seed);

  const std::size_t active = cfg.active_frames();
  std::vector<train::Example<float>> out;
  out.reserve(2 * cfg.n_per_class);
  for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
    for (Label label : {Label::kBonafide, Label::kSpoof}) {
      const double sign = label == Label::kBonafide ? 0.5 : -0.5;
      LayeredEmbeddings<float> emb(cfg.layers, cfg.frames, cfg.dim);
      for (std::size_t l = 0; l < cfg.layers; ++l)
        for (std::size_t t = 0; t < cfg.frames; ++t) {
          const bool shifted = cfg.layer_active(l) && t < active;
          for (std::size_t d = 0; d < cfg.dim; ++d) {
            double x = cfg.noise * rng.normal();
            if (shifted) x += sign * cfg.delta * u[d];
            emb.at(l, t, d) = static_cast<float>(x);
          }
        }
      out.push_back({utterance_id(label, i), std::move(emb), label});
    }
  }
  return out;
}

inline std::string format_config(const SynthConfig& cfg) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "synth.layers=%zu\nsynth.frames=%zu\nsynth.dim=%zu\nsynth.n_per_class=%zu\n"
                "synth.mode=%s\nsynth.layer=%zu\nsynth.rho=%.17g\nsynth.delta=%.17g\n"
                "synth.noise=%.17g\nsynth.seed=%llu\nsynth.direction_seed=%llu\n",
                cfg.layers, cfg.frames, cfg.dim, cfg.n_per_class,
                std::string(mode_name(cfg.mode)).c_str(), cfg.layer, cfg.rho, cfg.delta, cfg.noise,
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(cfg.direction_seed));
  return buf;
}

inline constexpr std::string_view kManifestName = "manifest.tsv";
inline constexpr std::string_view kConfigEchoName = "synth_config.txt";

/// Writes `<dir>/manifest.tsv`, one LEB per utterance and the echoed
/// configuration. Returns the manifest entries.
inline std::vector<io::ManifestEntry> write_dataset(const SynthConfig& cfg,
                                                    const std::filesystem::path& dir) {
  const auto examples = generate(cfg);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<io::ManifestEntry> manifest;
  for (const auto& ex : examples) {
    const std::string rel = ex.utt_id + ".leb";
    io::write_leb(ex.embeddings, dir / rel);
    manifest.push_back({ex.utt_id, rel, ex.label});
  }
  io::write_file(dir / kManifestName, io::format_manifest(manifest));
  io::write_file(dir / kConfigEchoName, format_config(cfg));
  return manifest;
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// EER of thresholding the projection of the time-averaged embedding on u,
/// Phi(-delta sqrt(T) / (2 sigma_n)). Defined for global_shift only.
inline double reference_eer(const SynthConfig& cfg) {
  if (cfg.mode != Mode::kGlobalShift)
    throw DomainError("reference EER is only defined for global_shift datasets");
  cfg.validate();
  return standard_normal_cdf(-cfg.delta * std::sqrt(static_cast<double>(cfg.frames)) /
                             (2 * cfg.noise));
}

}  // namespace mfacm::synth
