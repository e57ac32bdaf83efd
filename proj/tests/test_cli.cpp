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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <vector>

#include "mfacm/datastore.hpp"
#include "mfacm/frontend.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run mfacm(const std::string& args) {
  const std::string cmd = std::string(MFACM_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mfacm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    mfacm::io::write_file(dir_ / name, text);
  }

  fs::path dir_;
};

TEST_F(Cli, GradcheckIsDeterministic) {
  const auto a = mfacm("gradcheck --trials 5 --seed 7");
  const auto b = mfacm("gradcheck --trials 5 --seed 7");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("failures=0"), std::string::npos);
}

TEST_F(Cli, EvalPerfectlySeparatedFixture) {
  write("labels.tsv", "b1\tb1.leb\tbonafide\nb2\tb2.leb\tbonafide\ns1\ts1.leb\tspoof\ns2\ts2.leb\tspoof\n");
  write("scores.txt", "b1 2.0\nb2 3.0\ns1 0.0\ns2 1.0\n");
  write("cost.txt", "p_miss_asv=0.05\np_fa_asv=0.05\np_miss_spoof_asv=0.05\n");
  const auto r = mfacm("eval --scores " + path("scores.txt") + " --labels " + path("labels.tsv"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("eer=0.000000\n", 0), 0u) << r.out;
  EXPECT_EQ(r.out.find("min_tdcf"), std::string::npos);

  const auto t = mfacm("eval --scores " + path("scores.txt") + " --labels " + path("labels.tsv") +
                       " --tdcf " + path("cost.txt"));
  EXPECT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("min_tdcf=0.000000\n"), std::string::npos) << t.out;
}

TEST_F(Cli, EvalRejectsInconsistentScores) {
  write("labels.tsv", "b1\tx\tbonafide\ns1\ty\tspoof\n");
  write("dup.txt", "b1 1\nb1 2\ns1 0\n");
  write("unknown.txt", "b1 1\ns1 0\nzz 3\n");
  write("missing.txt", "b1 1\n");
  write("bad_cost.txt", "p_miss_asv=0\np_fa_asv=0\np_miss_spoof_asv=1\n");
  write("good.txt", "b1 1\ns1 0\n");
  const std::string labels = " --labels " + path("labels.tsv");
  EXPECT_EQ(mfacm("eval --scores " + path("dup.txt") + labels).code, 2);
  EXPECT_EQ(mfacm("eval --scores " + path("unknown.txt") + labels).code, 2);
  EXPECT_EQ(mfacm("eval --scores " + path("missing.txt") + labels).code, 2);
  EXPECT_EQ(mfacm("eval --scores " + path("good.txt") + labels + " --tdcf " + path("bad_cost.txt")).code, 1);
  EXPECT_EQ(mfacm("eval --scores " + path("nope.txt") + labels).code, 2);
}

TEST_F(Cli, UsageAndConfigErrors) {
  EXPECT_EQ(mfacm("").code, 1);
  EXPECT_EQ(mfacm("frobnicate").code, 1);
  EXPECT_EQ(mfacm("synth").code, 1);
  EXPECT_EQ(mfacm("synth --set train.lr=1 --out " + path("d")).code, 1);
  EXPECT_EQ(mfacm("synth --set synth.noise=0 --out " + path("d")).code, 1);
  EXPECT_EQ(mfacm("synth --config " + path("absent.cfg") + " --out " + path("d")).code, 1);
  EXPECT_EQ(mfacm("train --head lstm --manifest m --data d --out o").code, 1);
  EXPECT_EQ(mfacm("gradcheck --trials 0").code, 1);
}

TEST_F(Cli, HelpListsFlagsAndUnknownFlagsFail) {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"synth", {"--config", "--set", "--out"}},
      {"extract", {"--config", "--set", "--wav-dir", "--out"}},
      {"train", {"--config", "--set", "--manifest", "--data", "--head", "--out"}},
      {"score", {"--manifest", "--data", "--ckpt", "--out"}},
      {"eval", {"--scores", "--labels", "--tdcf"}},
      {"gradcheck", {"--trials", "--seed"}}};
  for (const auto& [cmd, expected] : flags) {
    const auto help = mfacm(cmd + " --help");
    EXPECT_EQ(help.code, 0) << cmd;
    for (const auto& f : expected) EXPECT_NE(help.out.find(f), std::string::npos) << cmd << " " << f;
    EXPECT_EQ(mfacm(cmd + " --bogus").code, 1) << cmd;
  }
}

TEST_F(Cli, SynthTrainScoreEvalPipeline) {
  write("run.cfg",
        "synth.layers=2\nsynth.frames=20\nsynth.dim=8\nsynth.n_per_class=40\nsynth.delta=4\n"
        "synth.direction_seed=3\ntrain.max_steps=150\ntrain.batch=16\ntrain.seed=1\n");
  const std::string cfg = " --config " + path("run.cfg");
  ASSERT_EQ(mfacm("synth" + cfg + " --set synth.seed=1 --out " + path("train")).code, 0);
  ASSERT_EQ(mfacm("synth" + cfg + " --set synth.seed=2 --out " + path("eval")).code, 0);
  EXPECT_NE(mfacm::io::read_file(dir_ / "train" / "synth_config.txt").find("synth.seed=1"),
            std::string::npos);

  for (const char* head : {"mfa", "gap", "tnfc"}) {
    const std::string ck = path(std::string(head) + ".ckpt");
    ASSERT_EQ(mfacm("train" + cfg + " --head " + head + " --manifest " + path("train/manifest.tsv") +
                    " --data " + path("train") + " --out " + ck)
                  .code,
              0)
        << head;
    EXPECT_TRUE(fs::exists(ck + ".best"));
    const auto log = mfacm::io::read_file(ck + ".log");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 150);
    const std::string scores = path(std::string(head) + ".scores");
    ASSERT_EQ(mfacm("score --manifest " + path("eval/manifest.tsv") + " --data " + path("eval") +
                    " --ckpt " + ck + " --out " + scores)
                  .code,
              0);
    const auto r = mfacm("eval --scores " + scores + " --labels " + path("eval/manifest.tsv"));
    ASSERT_EQ(r.code, 0);
    // Per-utterance z-scoring removes a time-constant shift, so TN_FC has
    // nothing to separate on this data.
    const double eer = std::stod(r.out.substr(r.out.find("eer=") + 4));
    if (std::string(head) != "tnfc") EXPECT_LE(eer, 0.01) << head << "\n" << r.out;
  }
}

TEST_F(Cli, ScoreRejectsCorruptCheckpoint) {
  write("bad.ckpt", "MFAC\x02");
  write("m.tsv", "u\tu.leb\tspoof\n");
  EXPECT_EQ(mfacm("score --manifest " + path("m.tsv") + " --data " + path("") + " --ckpt " +
                  path("bad.ckpt") + " --out " + path("s.txt"))
                .code,
            2);
}

TEST_F(Cli, ExtractEncodesEveryWav) {
  fs::create_directories(dir_ / "wav");
  for (int i = 0; i < 2; ++i) {
    mfacm::frontend::Waveform w;
    w.samples.resize(8000 + 4000 * i);
    for (std::size_t n = 0; n < w.samples.size(); ++n)
      w.samples[n] = 0.3 * std::sin(0.05 * (i + 1) * static_cast<double>(n));
    mfacm::io::write_file(dir_ / "wav" / ("utt" + std::to_string(i) + ".wav"),
                          mfacm::frontend::encode_wav(w));
  }
  write("wav/readme.txt", "not audio");
  ASSERT_EQ(mfacm("extract --set encoder.layers=3 --set encoder.dim=5 --wav-dir " + path("wav") +
                  " --out " + path("leb"))
                .code,
            0);
  for (int i = 0; i < 2; ++i) {
    const auto e = mfacm::io::read_leb(dir_ / "leb" / ("utt" + std::to_string(i) + ".leb"));
    EXPECT_EQ(e.layers(), 3u);
    EXPECT_EQ(e.frames(), 201u);
    EXPECT_EQ(e.dim(), 5u);
  }

  fs::create_directories(dir_ / "bad");
  write("bad/x.wav", "RIFF....WAVE");
  EXPECT_EQ(mfacm("extract --wav-dir " + path("bad") + " --out " + path("leb2")).code, 2);
}

}  // namespace
