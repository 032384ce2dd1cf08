// Copyright 2026 The HSLiNet Authors
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hslinet/checkpoint.hpp"
#include "hslinet/dataio.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = HSLINET_CLI_WORK;

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path log = kWork / "last.log";
  const std::string cmd = std::string(HSLINET_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kModel = " --patch-size 3 --hidden 8 --s-channels 4 --head-channels 4 ";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  static std::string scene() { return (kWork / "scene").string(); }
  static void ensure_scene() {
    if (fs::exists(kWork / "scene" / "labels.hslc")) return;
    ASSERT_EQ(run("synth --classes 3 --size 12x12 --bands 6 --seed 2 --out " + scene()).code, 0);
  }
  static std::string run_dir() { return (kWork / "run").string(); }
  static void ensure_run() {
    ensure_scene();
    if (fs::exists(kWork / "run" / "model.hslm")) return;
    const auto r = run("train --scene " + scene() + kModel +
                       "--epochs 6 --batch 6 --lr 1e-3 --train-per-class 4 --epoch-grid 2,4 --out " + run_dir());
    ASSERT_EQ(r.code, 0) << r.out;
  }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("train --epochs notanumber").code, 1);
  EXPECT_EQ(run("synth").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("train --scene /nonexistent/scene").code, 2);
  EXPECT_EQ(run("eval --scene /nonexistent/scene --model /nonexistent/run").code, 2);
  ensure_scene();
  const fs::path bad = kWork / "bad_scene";
  fs::create_directories(bad);
  fs::copy_file(kWork / "scene" / "hsi.hslc", bad / "hsi.hslc", fs::copy_options::overwrite_existing);
  fs::copy_file(kWork / "scene" / "lidar.hslc", bad / "lidar.hslc", fs::copy_options::overwrite_existing);
  std::ofstream(bad / "labels.hslc", std::ios::binary) << "HSLC garbage";
  EXPECT_EQ(run("train --scene " + bad.string() + " --epochs 1").code, 2);
  EXPECT_EQ(run("train --scene " + scene() + " --patch-size 4 --epochs 1").code, 2);
}

TEST_F(Cli, NumericalFailureExitsThree) {
  const auto r = run("gradcheck --d 4 --p 3 --ch 3 --classes 3 --tol 1e-30");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run("gradcheck --d 4 --p 3 --ch 3 --classes 3");
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(Cli, SynthWritesLoadableScene) {
  ensure_scene();
  const auto s = hslinet::load_scene_dir(scene());
  EXPECT_EQ(s.height(), 12u);
  EXPECT_EQ(s.width(), 12u);
  EXPECT_EQ(s.bands(), 6u);
}

TEST_F(Cli, TrainWritesRunDirectory) {
  ensure_run();
  for (const char* f : {"config.json", "norm.json", "split.json", "model.hslm", "best.hslm", "run.csv",
                        "epoch_grid.csv", "metrics.json", "metrics.csv"})
    EXPECT_TRUE(fs::exists(fs::path(run_dir()) / f)) << f;
  const auto cfg = nlohmann::json::parse(read_text(fs::path(run_dir()) / "config.json"));
  EXPECT_EQ(cfg["model"]["patch"], 3);
  const auto grid = read_text(fs::path(run_dir()) / "epoch_grid.csv");
  std::size_t lines = 0;
  for (char c : grid) lines += c == '\n';
  EXPECT_EQ(lines, 3u) << grid;
  const auto m = hslinet::load_checkpoint<float>(fs::path(run_dir()) / "model.hslm");
  EXPECT_EQ(m.config.hidden, 8u);
}

TEST_F(Cli, EvalReproducesTrainMetrics) {
  ensure_run();
  const fs::path out = kWork / "eval";
  const auto r = run("eval --scene " + scene() + " --model " + run_dir() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto a = nlohmann::json::parse(read_text(fs::path(run_dir()) / "metrics.json"));
  const auto b = nlohmann::json::parse(read_text(out / "metrics.json"));
  EXPECT_EQ(a["oa"], b["oa"]);
  EXPECT_EQ(a["confusion"], b["confusion"]);
  EXPECT_NE(r.out.find("OA"), std::string::npos);

  EXPECT_EQ(run("eval --scene " + scene() + " --model " + run_dir() + " --best --all-labeled").code, 0);
}

TEST_F(Cli, PredictMapWritesPpm) {
  ensure_run();
  const fs::path map = kWork / "map.ppm";
  ASSERT_EQ(run("predict-map --scene " + scene() + " --model " + run_dir() + " --out " + map.string()).code, 0);
  const std::string header = "P6\n12 12\n255\n";
  EXPECT_EQ(fs::file_size(map), header.size() + 12 * 12 * 3);
  EXPECT_EQ(read_text(map).substr(0, header.size()), header);
  const fs::path gt = kWork / "gt.ppm";
  ASSERT_EQ(run("predict-map --scene " + scene() + " --ground-truth --out " + gt.string()).code, 0);
  EXPECT_EQ(fs::file_size(gt), fs::file_size(map));
}

TEST_F(Cli, AblateWritesEightRows) {
  ensure_scene();
  const fs::path csv = kWork / "ablation.csv";
  const auto r = run("ablate --scene " + scene() + kModel +
                     "--epochs 1 --batch 6 --train-per-class 4 --seeds 2 --out " + csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto text = read_text(csv);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 9u) << text;
  EXPECT_NE(text.find("Model5"), std::string::npos);
  EXPECT_NE(text.find("LiDAR"), std::string::npos);
}
