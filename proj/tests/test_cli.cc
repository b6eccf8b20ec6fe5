#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <fstream>
#include <sstream>

#include "commands.h"
#include "test_util.h"
#include "zeroforge/binarization.h"
#include "zeroforge/png_io.h"
#include "zeroforge/renderer.h"
#include "zeroforge/encoder.h"
#include "zeroforge/trainer.h"
#include "zeroforge/voxel_file.h"

namespace zeroforge {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "zeroforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::Main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// A tiny config and query file shared by the tests in this file.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(dir_ / "run.conf") << SnapshotRunConfig(testing::SmallRunConfig());
    std::ofstream(dir_ / "queries.txt") << "a wooden chair\na round table\n";
  }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  Result Train(const std::string& out, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> args{"train", "--config", Path("run.conf"), "--queries", Path("queries.txt"),
                                  "--out", Path(out), "--iterations", "6"};
    args.insert(args.end(), extra.begin(), extra.end());
    return Cli(args);
  }

  testing::TempDir dir_{"cli"};
};

TEST_F(CliTest, TrainPopulatesTheRunDirectory) {
  const Result r = Train("run");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "checkpoints" / "iter-0"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "checkpoints" / "iter-6"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "config.snapshot"));
  EXPECT_EQ(ReadRunLog(dir_ / "run" / "log.jsonl").size(), 6u);
  EXPECT_NE(r.out.find("final checkpoint"), std::string::npos);
}

TEST_F(CliTest, GlobalOptionsWorkOnEitherSide) {
  const Result a = Cli({"--config", Path("run.conf"), "train", "--queries", Path("queries.txt"), "--out", Path("a"),
                        "--iterations", "2"});
  ASSERT_EQ(a.code, 0) << a.err;
  const Result b = Train("b", {"--set", "loss.lambda_c=0.1", "--preset", "beta100"});
  ASSERT_EQ(b.code, 0) << b.err;
  const RunConfig c = LoadRunConfig(dir_ / "b" / "config.snapshot");
  EXPECT_EQ(c.loss.lambda_c, 0.1);
  EXPECT_EQ(c.binarize.beta, 100.0);
  EXPECT_EQ(c.train.iterations, 6);
}

TEST_F(CliTest, MisspelledKeyFailsAndNamesIt) {
  std::ofstream(dir_ / "bad.conf") << "loss.lamda_c = 0.1\n";
  const Result r = Cli({"train", "--config", Path("bad.conf"), "--queries", Path("queries.txt"), "--out", Path("x")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("loss.lamda_c"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("bad.conf:1"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "x" / "log.jsonl"));

  const Result s = Train("y", {"--set", "loss.lamda_c=0.1"});
  EXPECT_NE(s.code, 0);
  EXPECT_NE(s.err.find("loss.lamda_c"), std::string::npos) << s.err;
}

TEST_F(CliTest, RerunWithSameSeedReproducesTheLog) {
  ASSERT_EQ(Train("r1", {"--seed", "5"}).code, 0);
  ASSERT_EQ(Train("r2", {"--seed", "5"}).code, 0);
  const auto a = ReadRunLog(dir_ / "r1" / "log.jsonl");
  const auto b = ReadRunLog(dir_ / "r2" / "log.jsonl");
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].loss.total, b[i].loss.total, 1e-9);
    EXPECT_NEAR(a[i].loss.sim, b[i].loss.sim, 1e-9);
    EXPECT_NEAR(a[i].loss.contrast, b[i].loss.contrast, 1e-9);
  }
  // Training into a directory that already has a log is refused.
  EXPECT_EQ(Train("r1").code, 2);
}

TEST_F(CliTest, GenerateRoundTripsAndPreviewIsTheFixedPoseRender) {
  ASSERT_EQ(Train("run").code, 0);
  const Result r = Cli({"generate", "--checkpoint", Path("run"), "--prompt", "a wooden chair", "--out", Path("g.vox"),
                        "--preview", Path("g.png")});
  ASSERT_EQ(r.code, 0) << r.err;

  // Oracle: load the newest checkpoint directly and run the same steps.
  LoadedCheckpoint ck = LoadCheckpoint(dir_ / "run" / "checkpoints" / "iter-6");
  auto enc = MakeEncoder(ck.config.encoder);
  const VoxelGrid expected = GenerateShape(*ck.generator, *enc, "a wooden chair", NoiseMode::kZero, 0, ck.config.binarize.gamma);
  const VoxelGrid got = ReadVoxelFile(dir_ / "g.vox");
  EXPECT_TRUE(got.binarized);
  EXPECT_EQ(got.values, expected.values);

  const Image direct = Render(expected, CameraPose{std::numbers::pi / 4, std::numbers::pi / 3}, ck.config.render);
  const Image preview = ReadPng(dir_ / "g.png");
  ASSERT_EQ(preview.size, direct.size);
  for (size_t i = 0; i < direct.data.size(); ++i)
    EXPECT_NEAR(preview.data[i], std::round(std::clamp(direct.data[i], 0.0, 1.0) * 255.0) / 255.0, 1e-12);

  // Same request, same bytes.
  ASSERT_EQ(Cli({"generate", "--checkpoint", Path("run"), "--prompt", "a wooden chair", "--out", Path("g2.vox")}).code, 0);
  EXPECT_EQ(ReadVoxelFile(dir_ / "g2.vox").values, got.values);
}

TEST_F(CliTest, BinaryExportOfASoftGridIsItsHardThreshold) {
  ASSERT_EQ(Train("run").code, 0);
  ASSERT_EQ(Cli({"generate", "--checkpoint", Path("run/checkpoints/iter-6"), "--prompt", "a round table", "--out",
                 Path("soft.vox"), "--soft"})
                .code,
            0);
  const VoxelGrid soft = ReadVoxelFile(dir_ / "soft.vox");
  EXPECT_FALSE(soft.binarized);
  const Result r = Cli({"export", "--in", Path("soft.vox"), "--out", Path("hard.vox"), "--format", "u8", "--gamma", "0.05"});
  ASSERT_EQ(r.code, 0) << r.err;
  const VoxelGrid hard = ReadVoxelFile(dir_ / "hard.vox");
  EXPECT_EQ(hard.values, BinarizeHard(soft, 0.05).values);
  // And it agrees with the default binary output of generate.
  ASSERT_EQ(Cli({"generate", "--checkpoint", Path("run"), "--prompt", "a round table", "--out", Path("direct.vox")}).code, 0);
  EXPECT_EQ(ReadVoxelFile(dir_ / "direct.vox").values, hard.values);

  ASSERT_EQ(Cli({"export", "--in", Path("hard.vox"), "--out", Path("hard.png"), "--format", "png"}).code, 0);
  EXPECT_EQ(ReadPng(dir_ / "hard.png").size, 224);
  EXPECT_NE(Cli({"export", "--in", Path("hard.vox"), "--out", Path("x"), "--format", "obj"}).code, 0);
}

TEST_F(CliTest, GenerateResolutionAndEnvironmentDefault) {
  ASSERT_EQ(Train("run").code, 0);
  ASSERT_EQ(Cli({"generate", "--checkpoint", Path("run"), "--prompt", "a round table", "--out", Path("big.vox"),
                 "--resolution", "32"})
                .code,
            0);
  EXPECT_EQ(ReadVoxelFile(dir_ / "big.vox").resolution, 32);

  ::setenv(cli::kCheckpointDirEnv, Path("run").c_str(), 1);
  const Result r = Cli({"generate", "--prompt", "a round table", "--out", Path("env.vox")});
  ::unsetenv(cli::kCheckpointDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  const Result missing = Cli({"generate", "--prompt", "a round table", "--out", Path("none.vox")});
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find(cli::kCheckpointDirEnv), std::string::npos);
}

TEST_F(CliTest, GenerateRejectsOverlongPrompts) {
  ASSERT_EQ(Train("run").code, 0);
  std::string prompt;
  for (int i = 0; i < 80; ++i) prompt += "very ";
  const Result r = Cli({"generate", "--checkpoint", Path("run"), "--prompt", prompt, "--out", Path("x.vox")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("context limit"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalSingleQueryRunHasPerfectRetrieval) {
  std::ofstream(dir_ / "one.txt") << "a tall lamp\n";
  ASSERT_EQ(Cli({"train", "--config", Path("run.conf"), "--queries", Path("one.txt"), "--out", Path("run1"),
                 "--iterations", "2"})
                .code,
            0);
  const Result r = Cli({"eval", "--run", Path("run1"), "--out", Path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir_ / "report.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("r_precision").get<double>(), 1.0);
  EXPECT_TRUE(j.at("forced_choice_accuracy").is_null());
  EXPECT_EQ(j.at("checkpoint_iteration").get<long>(), 2);
  EXPECT_TRUE(fs::exists(dir_ / "report.json.iou.txt"));
}

TEST_F(CliTest, EvalIsDeterministicAndTotalsMatchTheTable) {
  ASSERT_EQ(Train("run").code, 0);
  ASSERT_EQ(Cli({"eval", "--run", Path("run"), "--out", Path("e1.json"), "--seed", "3"}).code, 0);
  ASSERT_EQ(Cli({"eval", "--run", Path("run"), "--out", Path("e2.json"), "--seed", "3"}).code, 0);
  std::ifstream a(dir_ / "e1.json"), b(dir_ / "e2.json");
  const nlohmann::json ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
  EXPECT_EQ(ja, jb);
  double retrieved = 0.0, iou = 0.0;
  int correct = 0, trials = 0;
  for (const auto& row : ja.at("per_query")) {
    retrieved += row.at("retrieved").get<bool>();
    correct += row.at("forced_choice_correct").get<int>();
    trials += row.at("forced_choice_trials").get<int>();
    iou += row.at("mean_iou_to_others").get<double>();
  }
  const double q = static_cast<double>(ja.at("per_query").size());
  EXPECT_DOUBLE_EQ(ja.at("r_precision").get<double>(), retrieved / q);
  EXPECT_DOUBLE_EQ(ja.at("forced_choice_accuracy").get<double>(), static_cast<double>(correct) / trials);
  EXPECT_NEAR(ja.at("mean_offdiag_iou").get<double>(), iou / q, 1e-15);
}

TEST_F(CliTest, TruncatedCheckpointErrorNamesTheFile) {
  ASSERT_EQ(Train("run").code, 0);
  const fs::path ck = dir_ / "run" / "checkpoints" / "iter-6";
  fs::resize_file(ck, fs::file_size(ck) / 2);
  const Result r = Cli({"eval", "--run", Path("run"), "--out", Path("report.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(ck.string()), std::string::npos) << r.err;
  const Result g = Cli({"generate", "--checkpoint", ck.string(), "--prompt", "a chair", "--out", Path("x.vox")});
  EXPECT_EQ(g.code, 2);
  EXPECT_NE(g.err.find(ck.string()), std::string::npos) << g.err;
}

TEST_F(CliTest, EvalOfAnEmptyRunDirectoryFails) {
  fs::create_directories(dir_ / "empty");
  const Result r = Cli({"eval", "--run", Path("empty"), "--out", Path("report.json")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("no checkpoints"), std::string::npos) << r.err;
  EXPECT_NE(Cli({"eval", "--run", Path("missing"), "--out", Path("report.json")}).code, 0);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(Cli({}).code, 0);
  EXPECT_NE(Cli({"train"}).code, 0);
  EXPECT_NE(Cli({"frobnicate"}).code, 0);
  EXPECT_EQ(Cli({"--help"}).code, 0);
}

}  // namespace
}  // namespace zeroforge
