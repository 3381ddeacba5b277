// Copyright 2026 The Multi-AMP Authors
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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "multiamp_test_cli" /
           ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  CliResult Cli(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + MULTIAMP_CLI + "\" " + args +
                            " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = Slurp(out);
    r.err = Slurp(err);
    return r;
  }

  std::string Data(const std::string& name) const {
    return std::string(MULTIAMP_SOURCE_DIR) + "/data/" + name;
  }

  // A toy two-style run that finishes in well under a second.
  fs::path WriteConfig(const std::string& clip, int epochs = 2) {
    nlohmann::json cfg = {
        {"seed", 5},
        {"output_dir", (dir_ / "run").string()},
        {"epochs", epochs},
        {"num_envs", 8},
        {"horizon", 8},
        {"checkpoint_interval", 1},
        {"env", {{"episode", {{"horizon", 20}}}}},
        {"ppo", {{"policy_hidden", {8}}, {"value_hidden", {8}}, {"minibatch_size", 16}}},
        {"discriminator", {{"hidden", {8}}, {"batch_size", 8}}},
        {"styles",
         {{{"name", "sweep"}, {"clips", {clip}}, {"task", {{"kind", "sweep_speed"}}}},
          {{"name", "hold"}, {"clips", nlohmann::json::array()},
           {"task", {{"kind", "pose_hold"}}}}}}};
    const fs::path path = dir_ / "config.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
  }

  fs::path dir_;
};

TEST_F(CliTest, TrainWritesMetricsAndCheckpoints) {
  const fs::path cfg = WriteConfig(Data("reacher_sweep.json"));
  CliResult r = Cli("train --config " + cfg.string() + " --seed 77");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream metrics(dir_ / "run" / "metrics.csv");
  std::string header, row;
  ASSERT_TRUE(std::getline(metrics, header));
  EXPECT_EQ(header.rfind("epoch,style0_task_reward_mean", 0), 0u);
  int rows = 0;
  while (std::getline(metrics, row)) ++rows;
  EXPECT_EQ(rows, 2);
  const fs::path sidecar = dir_ / "run" / "checkpoints" / "epoch_000002.ckpt.json";
  ASSERT_TRUE(fs::exists(sidecar));
  auto doc = nlohmann::json::parse(Slurp(sidecar));
  EXPECT_EQ(doc["seed"], 77);
  EXPECT_EQ(doc["epoch"], 2);
  EXPECT_NE(r.out.find("seed: 77"), std::string::npos);
}

TEST_F(CliTest, MissingDatasetIsIoError) {
  const std::string missing = (dir_ / "no_such_clip.json").string();
  CliResult r = Cli("train --config " + WriteConfig(missing).string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
  EXPECT_EQ(Cli("train --config " + (dir_ / "nope.json").string()).code, 3);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Cli("").code, 1);
  EXPECT_EQ(Cli("train").code, 1);
  EXPECT_EQ(Cli("frobnicate").code, 1);
  EXPECT_EQ(Cli("--help").code, 0);
}

TEST_F(CliTest, ReverseTwiceRestoresClip) {
  const fs::path once = dir_ / "once.json", twice = dir_ / "twice.json";
  ASSERT_EQ(Cli("reverse --in " + Data("reacher_sweep.json") + " --out " + once.string()).code, 0);
  ASSERT_EQ(Cli("reverse --in " + once.string() + " --out " + twice.string()).code, 0);
  auto a = nlohmann::json::parse(Slurp(Data("reacher_sweep.json")));
  auto b = nlohmann::json::parse(Slurp(twice));
  EXPECT_EQ(a["frames"], b["frames"]);
  EXPECT_EQ(a["fields"], b["fields"]);
  auto mid = nlohmann::json::parse(Slurp(once));
  EXPECT_NE(a["frames"], mid["frames"]);
}

TEST_F(CliTest, ShippedReversedClipMatchesReverse) {
  const fs::path out = dir_ / "rev.json";
  ASSERT_EQ(Cli("reverse --in " + Data("reacher_sweep.json") + " --out " + out.string()).code, 0);
  auto a = nlohmann::json::parse(Slurp(out));
  auto b = nlohmann::json::parse(Slurp(Data("reacher_sweep_reversed.json")));
  EXPECT_EQ(a["frames"], b["frames"]);
}

TEST_F(CliTest, RecordSinusoid) {
  const fs::path a = dir_ / "a.json", b = dir_ / "b.json";
  ASSERT_EQ(Cli("record --generator sinusoid --steps 50 --out " + a.string()).code, 0);
  ASSERT_EQ(Cli("record --generator sinusoid --steps 50 --out " + b.string()).code, 0);
  EXPECT_EQ(Slurp(a), Slurp(b));
  auto doc = nlohmann::json::parse(Slurp(a));
  EXPECT_EQ(doc["frames"].size(), 50u);
  EXPECT_EQ(Cli("record --generator sinusoid --steps 1 --out " + a.string()).code, 1);
  EXPECT_EQ(Cli("record --generator sawtooth --steps 5 --out " + a.string()).code, 1);
  EXPECT_EQ(Cli("record --steps 5 --out " + a.string()).code, 1);
  CliResult two = Cli("record --generator sinusoid --steps 2 --out " + a.string());
  EXPECT_EQ(two.code, 0) << two.err;
}

TEST_F(CliTest, EvalRecordAndInspectCheckpoint) {
  const fs::path cfg = WriteConfig(Data("reacher_sweep.json"));
  ASSERT_EQ(Cli("train --config " + cfg.string()).code, 0);
  const std::string ckpt = (dir_ / "run" / "final.ckpt").string();
  ASSERT_TRUE(fs::exists(ckpt));

  CliResult ev = Cli("eval --checkpoint " + ckpt + " --style 0 --episodes 1 --max-steps 60");
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("mean_task_reward:"), std::string::npos);
  EXPECT_NE(ev.out.find("clockwise_fraction:"), std::string::npos);
  EXPECT_EQ(Cli("eval --checkpoint " + ckpt + " --style 9").code, 1);
  EXPECT_EQ(Cli("eval --checkpoint " + (dir_ / "missing.ckpt").string() + " --style 0").code, 3);

  const fs::path rec = dir_ / "rec.json";
  ASSERT_EQ(Cli("record --checkpoint " + ckpt + " --style 1 --steps 30 --out " + rec.string()).code, 0);
  EXPECT_EQ(nlohmann::json::parse(Slurp(rec))["frames"].size(), 30u);
  EXPECT_EQ(Cli("record --checkpoint " + ckpt + " --style 9 --steps 30 --out " + rec.string()).code, 1);

  CliResult ins = Cli("inspect --in " + ckpt);
  ASSERT_EQ(ins.code, 0) << ins.err;
  EXPECT_NE(ins.out.find("type: checkpoint"), std::string::npos);
  EXPECT_NE(ins.out.find("discriminator_1_widths:"), std::string::npos);

  // resume from an intermediate checkpoint
  const std::string mid = (dir_ / "run" / "checkpoints" / "epoch_000001.ckpt").string();
  fs::remove(dir_ / "run" / "metrics.csv");
  CliResult res = Cli("train --config " + cfg.string() + " --resume " + mid);
  ASSERT_EQ(res.code, 0) << res.err;
  EXPECT_EQ(Cli("train --config " + cfg.string() + " --resume " +
                (dir_ / "gone.ckpt").string()).code, 3);
}

TEST_F(CliTest, InspectClipAndConfig) {
  CliResult clip = Cli("inspect --in " + Data("reacher_sweep.json"));
  ASSERT_EQ(clip.code, 0) << clip.err;
  EXPECT_NE(clip.out.find("type: clip"), std::string::npos);
  EXPECT_NE(clip.out.find("field qd (velocity"), std::string::npos);

  CliResult cfg = Cli("inspect --in " + std::string(MULTIAMP_SOURCE_DIR) +
                "/configs/reacher_3style.json");
  ASSERT_EQ(cfg.code, 0) << cfg.err;
  EXPECT_NE(cfg.out.find("\"num_envs\": 256"), std::string::npos);

  const fs::path junk = dir_ / "junk.txt";
  std::ofstream(junk) << "not json";
  EXPECT_EQ(Cli("inspect --in " + junk.string()).code, 1);
}

TEST_F(CliTest, ExportPlotData) {
  const fs::path metrics = dir_ / "metrics.csv";
  std::ofstream(metrics)
      << "epoch,style0_task_reward_mean,style0_style_reward_mean,style0_disc_loss,"
         "style0_disc_accuracy,style1_task_reward_mean,style1_style_reward_mean,"
         "style1_disc_loss,style1_disc_accuracy,style2_task_reward_mean,"
         "style2_style_reward_mean,style2_disc_loss,style2_disc_accuracy,ppo_kl,"
         "ppo_clip_frac,policy_loss,value_loss,steps_per_sec\n"
         "1,1,0.5,0.2,0.6,2,0.25,0.3,0.7,3,0,nan,nan,0.01,0.1,0.2,1,0\n"
         "2,1.5,0.5,0.2,0.6,2,0.5,0.3,0.7,2.5,0,nan,nan,0.01,0.1,0.2,1,0\n";
  const fs::path out = dir_ / "plots";
  CliResult r = Cli("export-plot-data --metrics " + metrics.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"style0_curve.csv", "style1_curve.csv", "style2_curve.csv",
                        "combined_curves.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(out), fs::directory_iterator()), 4);
  EXPECT_EQ(Slurp(out / "combined_curves.csv"),
            "epoch,style0_total_reward,style1_total_reward,style2_total_reward\n"
            "1,1.5,2.25,3\n2,2,2.5,2.5\n");
  const std::string first = Slurp(out / "style1_curve.csv");
  ASSERT_EQ(Cli("export-plot-data --metrics " + metrics.string() + " --out " + out.string()).code, 0);
  EXPECT_EQ(Slurp(out / "style1_curve.csv"), first);

  const fs::path empty = dir_ / "empty.csv";
  std::ofstream(empty) << "";
  EXPECT_EQ(Cli("export-plot-data --metrics " + empty.string() + " --out " + out.string()).code, 1);
  const fs::path header_only = dir_ / "header.csv";
  std::ofstream(header_only) << Slurp(metrics).substr(0, Slurp(metrics).find('\n') + 1);
  EXPECT_EQ(Cli("export-plot-data --metrics " + header_only.string() + " --out " + out.string()).code, 1);
}

}  // namespace
