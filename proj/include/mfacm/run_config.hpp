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
#include <array>
#include <string>
#include <string_view>

#include "mfacm/classifier.hpp"
#include "mfacm/frontend.hpp"
#include "mfacm/keyvalue.hpp"
#include "mfacm/metrics.hpp"
#include "mfacm/synthgen.hpp"
#include "mfacm/trainer.hpp"

namespace mfacm {

/// Every experiment setting, read from dotted keys (`train.lr0=0.003`).
struct RunConfig {
  train::TrainConfig train;
  std::size_t attention = 0;  // model.attention, 0 = embedding dim
  std::size_t hidden = 0;     // model.hidden, 0 = embedding dim
  frontend::ToyEncoderConfig encoder;
  frontend::PreprocConfig preproc;
  synth::SynthConfig synth;
  metrics::TdcfCostModel tdcf;
};

inline constexpr std::array<std::string_view, 41> kRunConfigKeys = {
    "train.lr0",          "train.batch",         "train.step_size",     "train.gamma",
    "train.beta1",        "train.beta2",         "train.eps_adam",      "train.max_steps",
    "train.seed",         "train.weight_spoof",  "train.weight_bonafide",
    "model.attention",    "model.hidden",
    "encoder.seed",       "encoder.layers",      "encoder.dim",         "encoder.win",
    "encoder.hop",
    "preproc.pre_emphasis", "preproc.target_len",
    "synth.layers",       "synth.frames",        "synth.dim",           "synth.n_per_class",
    "synth.mode",         "synth.layer",         "synth.rho",           "synth.delta",
    "synth.noise",        "synth.seed",          "synth.direction_seed",
    "tdcf.pi_tar",        "tdcf.pi_non",         "tdcf.pi_spoof",       "tdcf.c_miss_asv",
    "tdcf.c_fa_asv",      "tdcf.c_miss_cm",      "tdcf.c_fa_cm",        "tdcf.p_miss_asv",
    "tdcf.p_fa_asv",      "tdcf.p_miss_spoof_asv"};

inline bool is_run_config_key(std::string_view key) {
  return std::find(kRunConfigKeys.begin(), kRunConfigKeys.end(), key) != kRunConfigKeys.end();
}

inline RunConfig read_run_config(const KeyValues& kv) {
  kv.reject_unknown(is_run_config_key);
  RunConfig c;
  auto& t = c.train;
  kv.get("train.lr0", t.lr0);
  kv.get("train.batch", t.batch);
  kv.get("train.step_size", t.step_size);
  kv.get("train.gamma", t.gamma);
  kv.get("train.beta1", t.beta1);
  kv.get("train.beta2", t.beta2);
  kv.get("train.eps_adam", t.eps_adam);
  kv.get("train.max_steps", t.max_steps);
  kv.get("train.seed", t.seed);
  kv.get("train.weight_spoof", t.weight_spoof);
  kv.get("train.weight_bonafide", t.weight_bonafide);
  kv.get("model.attention", c.attention);
  kv.get("model.hidden", c.hidden);

  kv.get("encoder.seed", c.encoder.seed);
  kv.get("encoder.layers", c.encoder.layers);
  kv.get("encoder.dim", c.encoder.dim);
  kv.get("encoder.win", c.encoder.win);
  kv.get("encoder.hop", c.encoder.hop);
  kv.get("preproc.pre_emphasis", c.preproc.pre_emphasis);
  kv.get("preproc.target_len", c.preproc.target_len);

  auto& s = c.synth;
  kv.get("synth.layers", s.layers);
  kv.get("synth.frames", s.frames);
  kv.get("synth.dim", s.dim);
  kv.get("synth.n_per_class", s.n_per_class);
  std::string mode(synth::mode_name(s.mode));
  kv.get("synth.mode", mode);
  if (auto m = synth::parse_mode(mode))
    s.mode = *m;
  else
    throw ConfigError("synth.mode must be global_shift, layer_sparse or time_sparse, got \"" + mode + "\"");
  kv.get("synth.layer", s.layer);
  kv.get("synth.rho", s.rho);
  kv.get("synth.delta", s.delta);
  kv.get("synth.noise", s.noise);
  kv.get("synth.seed", s.seed);
  kv.get("synth.direction_seed", s.direction_seed);

  metrics::read_cost_model(kv, "tdcf.", c.tdcf);
  return c;
}

}  // namespace mfacm
