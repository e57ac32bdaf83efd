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

// Countermeasure evaluation: equal error rate and the (legacy) normalized
// minimum tandem detection cost.
//
// Scores are "higher is more bonafide". At threshold th a bonafide trial
// is missed when score < th and a spoof trial is accepted when
// score >= th. Candidate thresholds are -inf, every distinct score and
// +inf, which makes both curves step functions over the sorted scores.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mfacm/embeddings.hpp"
#include "mfacm/keyvalue.hpp"

namespace mfacm::metrics {

struct ScoredTrial {
  double score;
  Label label;
};

using ScoreSet = std::vector<ScoredTrial>;

/// One point of the detection error trade-off.
struct OperatingPoint {
  double threshold;
  double p_miss;
  double p_fa;
};

struct ClassCounts {
  std::size_t bonafide = 0;
  std::size_t spoof = 0;
};

inline ClassCounts count_classes(const ScoreSet& scores) {
  ClassCounts c;
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw DomainError("score set contains a non-finite score");
    (s.label == Label::kBonafide ? c.bonafide : c.spoof) += 1;
  }
  if (c.bonafide == 0 || c.spoof == 0)
    throw DomainError("score set needs at least one bonafide and one spoof trial");
  return c;
}

/// Error rates at -inf, each distinct score in increasing order, and +inf.
inline std::vector<OperatingPoint> operating_points(const ScoreSet& scores) {
  const auto counts = count_classes(scores);
  ScoreSet sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredTrial& a, const ScoredTrial& b) { return a.score < b.score; });

  const double nb = static_cast<double>(counts.bonafide), ns = static_cast<double>(counts.spoof);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<OperatingPoint> points;
  points.push_back({-inf, 0.0, 1.0});
  std::size_t bona_below = 0, spoof_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double th = sorted[i].score;
    points.push_back({th, bona_below / nb, (ns - spoof_below) / ns});
    for (; i < sorted.size() && sorted[i].score == th; ++i)
      (sorted[i].label == Label::kBonafide ? bona_below : spoof_below) += 1;
  }
  points.push_back({inf, 1.0, 0.0});
  return points;
}

struct EerResult {
  double eer;
  double threshold;
};

/// Locates where P_miss meets P_fa on the step curve, interpolating
/// linearly between the two bracketing operating points. The threshold
/// reported is the nearer bracketing one (the finite one if the other is
/// infinite).
inline EerResult eer_from_points(const std::vector<OperatingPoint>& pts) {
  std::size_t i = 1;
  while (i + 1 < pts.size() && pts[i].p_miss < pts[i].p_fa) ++i;
  const auto& lo = pts[i - 1];
  const auto& hi = pts[i];
  if (hi.p_miss == hi.p_fa) return {hi.p_miss, hi.threshold};
  const double d_miss = hi.p_miss - lo.p_miss;
  const double d_fa = hi.p_fa - lo.p_fa;
  const double s = (lo.p_fa - lo.p_miss) / (d_miss - d_fa);
  const double eer = lo.p_miss + s * d_miss;
  double th = s < 0.5 ? lo.threshold : hi.threshold;
  if (!std::isfinite(th)) th = std::isfinite(lo.threshold) ? lo.threshold : hi.threshold;
  return {eer, th};
}

inline EerResult compute_eer(const ScoreSet& scores) { return eer_from_points(operating_points(scores)); }

struct TdcfCostModel {
  double pi_tar = 0.9405;
  double pi_non = 0.0095;
  double pi_spoof = 0.05;
  double c_miss_asv = 1;
  double c_fa_asv = 10;
  double c_miss_cm = 1;
  double c_fa_cm = 10;
  // ASV operating point. These have no meaningful default and must be
  // supplied by the caller.
  double p_miss_asv = 0;
  double p_fa_asv = 0;
  double p_miss_spoof_asv = 0;

  void validate() const {
    for (double p : {pi_tar, pi_non, pi_spoof})
      if (!(p > 0)) throw DomainError("t-DCF priors must be positive");
    if (std::abs(pi_tar + pi_non + pi_spoof - 1.0) > 1e-9)
      throw DomainError("t-DCF priors must sum to 1");
    for (double c : {c_miss_asv, c_fa_asv, c_miss_cm, c_fa_cm})
      if (!(c > 0)) throw DomainError("t-DCF costs must be positive");
    for (double r : {p_miss_asv, p_fa_asv, p_miss_spoof_asv})
      if (!(r >= 0 && r <= 1)) throw DomainError("ASV error rates must lie in [0, 1]");
  }
};

inline constexpr std::string_view kCostModelKeys[] = {
    "pi_tar",   "pi_non",    "pi_spoof",   "c_miss_asv", "c_fa_asv",
    "c_miss_cm", "c_fa_cm", "p_miss_asv", "p_fa_asv",   "p_miss_spoof_asv"};

/// Reads cost-model fields from `kv` under `prefix` (e.g. "tdcf.").
inline void read_cost_model(const KeyValues& kv, std::string_view prefix, TdcfCostModel& m) {
  auto key = [&](std::string_view k) { return std::string(prefix) + std::string(k); };
  kv.get(key("pi_tar"), m.pi_tar);
  kv.get(key("pi_non"), m.pi_non);
  kv.get(key("pi_spoof"), m.pi_spoof);
  kv.get(key("c_miss_asv"), m.c_miss_asv);
  kv.get(key("c_fa_asv"), m.c_fa_asv);
  kv.get(key("c_miss_cm"), m.c_miss_cm);
  kv.get(key("c_fa_cm"), m.c_fa_cm);
  kv.get(key("p_miss_asv"), m.p_miss_asv);
  kv.get(key("p_fa_asv"), m.p_fa_asv);
  kv.get(key("p_miss_spoof_asv"), m.p_miss_spoof_asv);
}

/// Parses a standalone cost file. The three ASV error rates are required.
inline TdcfCostModel parse_cost_model(std::string_view text) {
  const auto kv = KeyValues::parse(text);
  kv.reject_unknown([](std::string_view k) {
    return std::find(std::begin(kCostModelKeys), std::end(kCostModelKeys), k) !=
           std::end(kCostModelKeys);
  });
  for (const char* k : {"p_miss_asv", "p_fa_asv", "p_miss_spoof_asv"})
    if (!kv.contains(k)) throw ConfigError(std::string("cost model is missing required key \"") + k + "\"");
  TdcfCostModel m;
  read_cost_model(kv, "", m);
  m.validate();
  return m;
}

struct TdcfCoefficients {
  double c1;
  double c2;
};

inline TdcfCoefficients tdcf_coefficients(const TdcfCostModel& m) {
  m.validate();
  const double c1 = m.pi_tar * (m.c_miss_cm - m.c_miss_asv * m.p_miss_asv) -
                    m.pi_non * m.c_fa_asv * m.p_fa_asv;
  const double c2 = m.c_fa_cm * m.pi_spoof * (1 - m.p_miss_spoof_asv);
  if (!(c1 > 0) || !(c2 > 0))
    throw DomainError("degenerate ASV operating point: C1=" + std::to_string(c1) +
                      ", C2=" + std::to_string(c2) + " (both must be positive)");
  return {c1, c2};
}

struct TdcfResult {
  double min_tdcf;
  double threshold;
};

/// Minimum over candidate thresholds of (C1 P_miss + C2 P_fa) / min(C1, C2).
/// Ties resolve to the lowest threshold.
inline TdcfResult compute_min_tdcf(const ScoreSet& scores, const TdcfCostModel& model) {
  const auto [c1, c2] = tdcf_coefficients(model);
  const double norm = std::min(c1, c2);
  TdcfResult best{std::numeric_limits<double>::infinity(), 0};
  for (const auto& p : operating_points(scores)) {
    const double cost = (c1 * p.p_miss + c2 * p.p_fa) / norm;
    if (cost < best.min_tdcf) best = {cost, p.threshold};
  }
  return best;
}

struct MetricReport {
  double eer = 0;
  double eer_threshold = 0;
  bool has_tdcf = false;
  double min_tdcf = 0;
  double tdcf_threshold = 0;
  ClassCounts counts;
};

inline MetricReport evaluate(const ScoreSet& scores, const TdcfCostModel* model = nullptr) {
  MetricReport r;
  r.counts = count_classes(scores);
  const auto e = compute_eer(scores);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  if (model) {
    const auto t = compute_min_tdcf(scores, *model);
    r.has_tdcf = true;
    r.min_tdcf = t.min_tdcf;
    r.tdcf_threshold = t.threshold;
  }
  return r;
}

/// key=value block, one metric per line, six decimals.
inline std::string format_report(const MetricReport& r) {
  std::string out;
  char buf[96];
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.6f\n", key, v);
    out += buf;
  };
  line("eer", r.eer);
  line("eer_threshold", r.eer_threshold);
  if (r.has_tdcf) {
    line("min_tdcf", r.min_tdcf);
    line("tdcf_threshold", r.tdcf_threshold);
  }
  out += "n_bonafide=" + std::to_string(r.counts.bonafide) + "\n";
  out += "n_spoof=" + std::to_string(r.counts.spoof) + "\n";
  return out;
}

}  // namespace mfacm::metrics
