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

// mfacm: synthetic data, feature extraction, training, scoring and
// evaluation of multi-layer attentive-pooling spoofing countermeasures.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
// error, 3 verification failure (gradcheck).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfacm/classifier.hpp"
#include "mfacm/datastore.hpp"
#include "mfacm/dataset.hpp"
#include "mfacm/frontend.hpp"
#include "mfacm/gradcheck.hpp"
#include "mfacm/keyvalue.hpp"
#include "mfacm/metrics.hpp"
#include "mfacm/run_config.hpp"
#include "mfacm/synthgen.hpp"
#include "mfacm/trainer.hpp"

namespace fs = std::filesystem;
using namespace mfacm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.file, "key=value run configuration file");
  cmd->add_option("--set", args.overrides, "override one configuration key (key=value), repeatable");
}

/// File values first, then --set overrides. Validation failures of the
/// resulting settings are configuration errors.
RunConfig load_config(const ConfigArgs& args) {
  KeyValues kv;
  if (!args.file.empty()) {
    std::string text;
    try {
      text = io::read_file(args.file);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    kv = KeyValues::parse(text);
  }
  for (const auto& o : args.overrides) kv.assign(o, "--set " + o);
  auto cfg = read_run_config(kv);
  try {
    cfg.train.validate();
    cfg.encoder.validate();
    cfg.preproc.validate();
    cfg.synth.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

int cmd_synth(const ConfigArgs& cargs, const std::string& out) {
  const auto cfg = load_config(cargs);
  const auto manifest = synth::write_dataset(cfg.synth, out);
  std::printf("wrote %zu utterances to %s\n", manifest.size(), out.c_str());
  if (cfg.synth.mode == synth::Mode::kGlobalShift)
    std::printf("reference_eer=%.6f\n", synth::reference_eer(cfg.synth));
  return kExitOk;
}

int cmd_extract(const ConfigArgs& cargs, const std::string& wav_dir, const std::string& out) {
  const auto cfg = load_config(cargs);
  std::vector<fs::path> wavs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(wav_dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".wav") wavs.push_back(entry.path());
  if (ec) throw IoError("cannot list " + wav_dir + ": " + ec.message());
  std::sort(wavs.begin(), wavs.end());
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());

  const frontend::ToyEncoder encoder(cfg.encoder);
  for (const auto& wav : wavs) {
    try {
      const auto samples = frontend::preprocess(frontend::read_wav(wav), cfg.preproc);
      io::write_leb(encoder.encode(samples), fs::path(out) / (wav.stem().string() + ".leb"));
    } catch (const Error& e) {
      throw IoError(wav.string() + ": " + e.what());
    }
  }
  std::printf("encoded %zu files into %s\n", wavs.size(), out.c_str());
  return kExitOk;
}

int cmd_train(const ConfigArgs& cargs, const std::string& manifest_path, const std::string& data,
              const std::string& head, const std::string& out) {
  const auto cfg = load_config(cargs);
  const auto kind = model::parse_kind(head);
  if (!kind) throw ConfigError("--head must be mfa, gap or tnfc");
  const auto examples = dataset::load(dataset::read_manifest(manifest_path), data);

  model::ModelShape shape;
  shape.kind = *kind;
  shape.attention = cfg.attention;
  shape.hidden = cfg.hidden;
  const auto result = train::train<float>(examples, shape, cfg.train);

  io::save_checkpoint(model::to_named_tensors(result.final_model), out);
  io::save_checkpoint(model::to_named_tensors(result.best_model), out + ".best");
  io::write_file(out + ".log", train::format_log(result.log));
  const auto& last = result.log.back();
  std::printf("trained %s for %zu steps; final batch loss %.6f; checkpoint %s\n",
              std::string(model::kind_name(*kind)).c_str(), result.log.size(), last.loss,
              out.c_str());
  return kExitOk;
}

int cmd_score(const std::string& manifest_path, const std::string& data, const std::string& ckpt,
              const std::string& out) {
  const auto m = model::from_named_tensors<float>(io::load_checkpoint(ckpt));
  const auto examples = dataset::load(dataset::read_manifest(manifest_path), data);
  std::vector<io::ScoreRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples)
    records.push_back({ex.utt_id, static_cast<double>(train::predict(m, ex.embeddings).cm_score())});
  io::write_file(out, io::write_scores(records));
  return kExitOk;
}

int cmd_eval(const std::string& scores_path, const std::string& labels, const std::string& tdcf) {
  std::optional<metrics::TdcfCostModel> cost;
  if (!tdcf.empty()) {
    std::string text;
    try {
      text = io::read_file(tdcf);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    try {
      cost = metrics::parse_cost_model(text);
      metrics::tdcf_coefficients(*cost);
    } catch (const DomainError& e) {
      throw ConfigError(tdcf + ": " + e.what());
    }
  }
  const auto manifest = dataset::read_manifest(labels);
  std::map<std::string, Label, std::less<>> key;
  for (const auto& e : manifest) key.emplace(e.utt_id, e.label);

  metrics::ScoreSet set;
  std::map<std::string, bool, std::less<>> scored;
  for (const auto& r : io::read_scores(io::read_file(scores_path))) {
    auto it = key.find(r.utt_id);
    if (it == key.end()) throw DomainError("score for unknown utterance \"" + r.utt_id + "\"");
    if (!scored.emplace(r.utt_id, true).second)
      throw DomainError("utterance \"" + r.utt_id + "\" scored twice");
    set.push_back({r.score, it->second});
  }
  if (scored.size() != key.size())
    throw DomainError(std::to_string(key.size() - scored.size()) + " labelled utterances have no score");
  std::fputs(metrics::format_report(metrics::evaluate(set, cost ? &*cost : nullptr)).c_str(), stdout);
  return kExitOk;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed) {
  const auto results = gradcheck::run_all(trials, seed);
  std::map<std::string, double> worst;
  std::size_t failures = 0;
  for (const auto& r : results) {
    const auto group = r.name.substr(0, r.name.find('.'));
    worst[group] = std::max(worst[group], r.max_rel_error);
    if (!r.passed) {
      ++failures;
      std::printf("%s\n", gradcheck::format_result(r).c_str());
    }
  }
  for (const auto& [group, err] : worst) std::printf("%-14s worst_rel_err=%.3e\n", group.c_str(), err);
  std::printf("checks=%zu failures=%zu tolerance=%.0e step=%.0e\n", results.size(), failures,
              gradcheck::kTolerance, gradcheck::kStep);
  return failures == 0 ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-layer attentive pooling spoofing countermeasure toolkit"};
  app.require_subcommand(1);

  ConfigArgs synth_cfg, extract_cfg, train_cfg;
  std::string out, wav_dir, manifest, data, head = "mfa", ckpt, scores, labels, tdcf;
  std::size_t trials = 20;
  std::uint64_t seed = 0;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic layered-embedding dataset");
  add_config_flags(synth_cmd, synth_cfg);
  synth_cmd->add_option("--out", out, "output directory")->required();

  auto* extract_cmd = app.add_subcommand("extract", "pre-process and toy-encode WAV files to LEB");
  add_config_flags(extract_cmd, extract_cfg);
  extract_cmd->add_option("--wav-dir", wav_dir, "directory of 16 kHz mono PCM16 WAV files")->required();
  extract_cmd->add_option("--out", out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a classifier head");
  add_config_flags(train_cmd, train_cfg);
  train_cmd->add_option("--manifest", manifest, "training manifest (TSV)")->required();
  train_cmd->add_option("--data", data, "directory the manifest paths are relative to")->required();
  train_cmd->add_option("--head", head, "classifier head")
      ->check(CLI::IsMember({"mfa", "gap", "tnfc"}));
  train_cmd->add_option("--out", out, "checkpoint path (also writes <out>.best and <out>.log)")
      ->required();

  auto* score_cmd = app.add_subcommand("score", "score utterances with a trained checkpoint");
  score_cmd->add_option("--manifest", manifest, "manifest of utterances to score")->required();
  score_cmd->add_option("--data", data, "directory the manifest paths are relative to")->required();
  score_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
  score_cmd->add_option("--out", out, "score file to write")->required();

  auto* eval_cmd = app.add_subcommand("eval", "compute EER (and min t-DCF) of a score file");
  eval_cmd->add_option("--scores", scores, "score file")->required();
  eval_cmd->add_option("--labels", labels, "manifest holding the labels")->required();
  eval_cmd->add_option("--tdcf", tdcf, "key=value t-DCF cost model; enables min t-DCF");

  auto* grad_cmd = app.add_subcommand("gradcheck", "verify every backward pass by finite differences");
  grad_cmd->add_option("--trials", trials, "random instances per check")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth_cfg, out);
    if (*extract_cmd) return cmd_extract(extract_cfg, wav_dir, out);
    if (*train_cmd) return cmd_train(train_cfg, manifest, data, head, out);
    if (*score_cmd) return cmd_score(manifest, data, ckpt, out);
    if (*eval_cmd) return cmd_eval(scores, labels, tdcf);
    if (*grad_cmd) return cmd_gradcheck(trials, seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
