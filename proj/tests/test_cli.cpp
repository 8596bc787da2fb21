#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "udepth/data.hpp"
#include "udepth/training.hpp"

using namespace udepth;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(UDEPTH_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    return r;
  }
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) {
    r.output += buf.data();
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
  }
  return out;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++n;
  }
  return n;
}

fs::path base() { return fs::temp_directory_path() / "udepth_cli_test"; }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

TrainConfig tiny_config() {
  TrainConfig c;
  c.network.height = 32;
  c.network.width = 64;
  c.batch_size = 2;
  c.composite_batch_size = 2;
  c.epochs = 1;
  c.min_depth = 1.0;
  c.max_depth = 100.0;
  c.learning_rate = 1e-3;
  c.seed = 5;
  return c;
}

/// One toy dataset and one short training run shared by the tests below.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(base());
    fs::create_directories(base());
    data_ = base() / "data";
    config_ = base() / "tiny.cfg";
    write_text_file(config_, tiny_config().to_text());
    auto g = run("gen-data --out " + q(data_) + " --seed 3 --num-scenes 5 --height 32 --width 64 --min-depth 1");
    ASSERT_EQ(g.code, 0) << g.output;
    run_dir_ = base() / "run";
    train_ = run("train --config " + q(config_) + " --data " + q(data_) + " --out " + q(run_dir_));
    ASSERT_EQ(train_.code, 0) << train_.output;
  }

  static inline fs::path data_, config_, run_dir_;
  static inline Result train_;
};

}  // namespace

TEST(CliGenData, SameSeedGivesByteIdenticalDirectories) {
  const auto a = base() / "gen_a";
  const auto b = base() / "gen_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("gen-data --out " + q(a) + " --seed 7 --num-scenes 2 --height 32 --width 64").code, 0);
  ASSERT_EQ(run("gen-data --out " + q(b) + " --seed 7 --num-scenes 2 --height 32 --width 64").code, 0);
  const auto ta = tree(a);
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, tree(b));
}

TEST(CliGenData, NumScenesControlsSampleGroups) {
  const auto dir = base() / "gen_four";
  fs::remove_all(dir);
  ASSERT_EQ(run("gen-data --out " + q(dir) + " --seed 1 --num-scenes 4 --height 32 --width 64").code, 0);
  const int real = count_lines(dir / "real" / "splits" / "train.txt") + count_lines(dir / "real" / "splits" / "val.txt");
  EXPECT_EQ(real, 4);
  EXPECT_EQ(load_synthetic_source(register_synthetic_source(dir / "synthetic" / "toy")).size(), 4u);
}

TEST(CliGenData, InvalidDepthRangeIsUsageError) {
  auto r = run("gen-data --out " + q(base() / "gen_bad") + " --min-depth 50 --max-depth 10");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("depth range"), std::string::npos) << r.output;
}

TEST(CliGenData, UnwritablePathFails) {
  const auto file = base() / "plain_file";
  write_text_file(file, "x");
  auto r = run("gen-data --out " + q(file / "sub") + " --num-scenes 1");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("plain_file"), std::string::npos) << r.output;
}

TEST(CliErrors, FailuresPrintOneLineCause) {
  auto r = run("eval --checkpoint /nonexistent.ckpt --data /nonexistent --out " + q(base() / "e"));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1) << r.output;
  EXPECT_NE(run("no-such-command").code, 0);
}

TEST_F(Cli, TrainWritesRunArtifactsAndPrecedence) {
  for (const auto* f : {"manifest.json", "losses.jsonl", "validation.jsonl", "last.ckpt", "config.txt"}) {
    EXPECT_TRUE(fs::exists(run_dir_ / f)) << f;
  }
  const auto m = nlohmann::json::parse(slurp(run_dir_ / "manifest.json"));
  for (const auto* k : {"command", "config_path", "seed", "git_describe", "output_dir", "started", "finished"}) {
    EXPECT_TRUE(m.contains(k)) << k;
  }
  EXPECT_EQ(m["seed"].get<uint64_t>(), 5u);
  EXPECT_NE(train_.output.find("precedence: flag > file > default"), std::string::npos);
}

TEST_F(Cli, FlagsOverrideFileOverrideDefaults) {
  const auto out = base() / "run_flags";
  auto r = run("train --config " + q(config_) + " --data " + q(data_) + " --out " + q(out) +
               " --no-utsf --seed 11 --set max_iterations=1 --set validate_every=1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto cfg = TrainConfig::load(out / "config.txt");
  EXPECT_FALSE(cfg.utsf);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_EQ(cfg.max_iterations, 1);
  EXPECT_EQ(cfg.network.height, 32);  // from the file
  EXPECT_EQ(cfg.adam_beta1, 0.9);     // default
  EXPECT_NE(r.output.find("flag"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsReportLineNumbers) {
  const auto bad = base() / "bad.cfg";
  write_text_file(bad, "height = 32\n# comment\nlearning_rate = fast\n");
  auto r = run("train --config " + q(bad) + " --data " + q(data_) + " --out " + q(base() / "run_bad"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("bad.cfg:3"), std::string::npos) << r.output;
}

TEST_F(Cli, MissingDatasetNamesThePath) {
  auto r = run("train --config " + q(config_) + " --data /no/such/dataset --out " + q(base() / "run_missing"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("/no/such/dataset"), std::string::npos) << r.output;
}

TEST_F(Cli, DataRootFromEnvironment) {
  auto r = run("train --config " + q(config_) + " --out " + q(base() / "run_env") + " --set max_iterations=1",
               "UDEPTH_DATA_ROOT=" + q(data_));
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(Cli, ResumeContinuesTraining) {
  const auto out = base() / "run_resume";
  fs::remove_all(out);
  ASSERT_EQ(run("train --config " + q(config_) + " --data " + q(data_) + " --out " + q(out) +
                " --set max_iterations=1 --set checkpoint_every=1")
                .code,
            0);
  auto r = run("train --config " + q(config_) + " --data " + q(data_) + " --out " + q(out) + " --resume " +
               q(out / "step_1.ckpt"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("resumed at iteration 1"), std::string::npos) << r.output;
  int opt2_lines = 0;
  std::ifstream in(out / "losses.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    opt2_lines += nlohmann::json::parse(line)["optimizer"].get<int>() == 2;
  }
  EXPECT_EQ(opt2_lines, 2);  // 4 train scenes, batch 2: iteration 1 then 2
}

TEST_F(Cli, EvalIsRepeatableAndHonoursFlags) {
  const auto a = base() / "eval_a";
  const auto b = base() / "eval_b";
  const auto ckpt = q(run_dir_ / "last.ckpt");
  ASSERT_EQ(run("eval --checkpoint " + ckpt + " --data " + q(data_) + " --split train --out " + q(a) + " --save-depth")
                .code,
            0);
  ASSERT_EQ(run("eval --checkpoint " + ckpt + " --data " + q(data_) + " --split train --out " + q(b)).code, 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  int n = 0;
  for (const auto& e : fs::directory_iterator(a / "depth")) {
    n += e.path().extension() == ".png";
  }
  EXPECT_EQ(n, 4);

  const auto c = base() / "eval_c";
  ASSERT_EQ(
      run("eval --checkpoint " + ckpt + " --data " + q(data_) + " --split train --out " + q(c) + " --median-scale off")
          .code,
      0);
  const auto rep = nlohmann::json::parse(slurp(c / "report.json"));
  EXPECT_FALSE(rep["aggregate"]["median_scaling"].get<bool>());
  EXPECT_EQ(rep["aggregate"]["scale"].get<double>(), 1.0);
}

TEST_F(Cli, EvalRejectsIncompatibleCheckpointWithDiff) {
  auto other = tiny_config();
  other.network.pose_widths.back() *= 2;
  const auto cfg = base() / "other.cfg";
  write_text_file(cfg, other.to_text());
  auto r = run("eval --checkpoint " + q(run_dir_ / "last.ckpt") + " --data " + q(data_) + " --config " + q(cfg) +
               " --out " + q(base() / "eval_x"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("pose_widths"), std::string::npos) << r.output;
}

TEST_F(Cli, DepthToColorWritesOneImagePerInput) {
  const auto depths = base() / "eval_depths";
  ASSERT_EQ(run("eval --checkpoint " + q(run_dir_ / "last.ckpt") + " --data " + q(data_) +
                " --split train --save-depth --out " + q(depths))
                .code,
            0);
  const auto a = base() / "d2c_a";
  const auto b = base() / "d2c_b";
  ASSERT_EQ(run("d2c --checkpoint " + q(run_dir_ / "last.ckpt") + " --depth-dir " + q(depths / "depth") + " --out " +
                q(a))
                .code,
            0);
  ASSERT_EQ(run("d2c --checkpoint " + q(run_dir_ / "last.ckpt") + " --depth-dir " + q(depths / "depth") + " --out " +
                q(b))
                .code,
            0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".png") continue;
    ++n;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename()));
    const auto img = read_rgb(e.path());
    EXPECT_EQ(img.size(0), 3);
  }
  EXPECT_EQ(n, 4);
}

TEST_F(Cli, DepthToColorRejectsCheckpointWithoutColorNet) {
  const auto out = base() / "run_no_color";
  ASSERT_EQ(run("train --config " + q(config_) + " --data " + q(data_) + " --out " + q(out) +
                " --set optimizer1=false --set max_iterations=1")
                .code,
            0);
  auto r = run("d2c --checkpoint " + q(out / "last.ckpt") + " --depth-dir " + q(data_) + " --out " +
               q(base() / "d2c_x"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("colour net"), std::string::npos) << r.output;
}

TEST_F(Cli, VisualizeWritesCurvesAndGrids) {
  const auto out = base() / "figs";
  auto r = run("visualize --run " + q(run_dir_) + " --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.output;
  for (const auto* f : {"loss_opt1.png", "loss_opt2.png", "depth_grid.png", "uncertainty_grid.png"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST_F(Cli, VisualizeEmptyLogsWarnsWithoutOutput) {
  const auto empty = base() / "empty_run";
  fs::create_directories(empty);
  write_text_file(empty / "losses.jsonl", "");
  const auto out = base() / "figs_empty";
  fs::remove_all(out);
  auto r = run("visualize --run " + q(empty) + " --out " + q(out));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}
