#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "kneeflex/checkpoint.hpp"
#include "kneeflex/goniometry.hpp"
#include "support/oracles.hpp"

using namespace kneeflex;
using kneeflex::testing::read_bytes;
using kneeflex::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "kneeflex");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> tree(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST(CliAngle, PrintsTwoDecimals) {
  auto r = run({"angle", "--points", "10,50,50,50,90,50"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.00\n");
  r = run({"angle", "--points", "50,0,50,50,100,50"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "90.00\n");
}

TEST(CliAngle, MalformedPointsExitTwo) {
  EXPECT_EQ(run({"angle", "--points", "1,2,3"}).code, 2);
  EXPECT_EQ(run({"angle", "--points", "1,2,3,4,5,x"}).code, 2);
  EXPECT_EQ(run({"angle", "--points", "1,2,3,4,5,6,7"}).code, 2);
  EXPECT_EQ(run({"angle", "--points", "50,50,50,50,90,50"}).code, 2);
  EXPECT_EQ(run({"angle"}).code, 2);
}

TEST(CliUsage, UnknownSubcommandOrFlag) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"generate", "--bogus"}).code, 2);
  EXPECT_EQ(run({"train", "--data", "x", "--scenario", "9"}).code, 2);
}

TEST(CliHelp, EverySubcommandListsFlagsWithDefaults) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"generate", {"--n", "--flex-min", "--flex-max", "--max-offset", "--both-legs", "--skin", "original"}},
      {"train", {"--data", "--scenario", "--epochs", "50", "--batch", "32", "--backgrounds", "--val-real", "--lr"}},
      {"eval", {"--ckpt", "--data", "--batch"}},
      {"predict", {"--ckpt", "--image", "--annotate"}},
      {"angle", {"--points"}},
      {"experiment", {"--scenarios", "--epochs", "--backgrounds", "--n", "3000"}},
  };
  for (const auto& [cmd, flags] : expected) {
    const auto r = run({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " help lacks " << f;
  }
  const auto top = run({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* f : {"--seed", "--out", "--quiet", "--threads"}) EXPECT_NE(top.out.find(f), std::string::npos) << f;
}

TEST(CliGenerate, DeterministicTrees) {
  TempDir a("cli_gen_a"), b("cli_gen_b");
  EXPECT_EQ(run({"generate", "--n", "10", "--seed", "7", "--out", (a / "d").string(), "--quiet"}).code, 0);
  EXPECT_EQ(run({"--seed", "7", "--out", (b / "d").string(), "generate", "--n", "10", "--quiet"}).code, 0);
  const auto names = tree(a / "d");
  ASSERT_EQ(names.size(), 11u);
  EXPECT_EQ(names, tree(b / "d"));
  for (const auto& n : names) EXPECT_EQ(read_bytes(a / "d" / n), read_bytes(b / "d" / n)) << n;
}

TEST(CliGenerate, InvalidRangeWritesNothing) {
  TempDir dir("cli_gen_bad");
  const auto r = run({"generate", "--flex-min", "150", "--out", (dir / "d").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "d"));
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(CliTrain, BackgroundScenarioNeedsDirectory) {
  TempDir dir("cli_train_bg");
  ASSERT_EQ(run({"generate", "--n", "2", "--out", (dir / "data").string(), "--quiet"}).code, 0);
  for (const char* s : {"4", "8"})
    EXPECT_EQ(run({"train", "--data", (dir / "data").string(), "--scenario", s, "--out", (dir / "m").string()}).code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "m"));
}

TEST(CliTrain, MissingDataIsIoError) {
  TempDir dir("cli_train_missing");
  EXPECT_EQ(run({"train", "--data", (dir / "none").string(), "--epochs", "1", "--out", (dir / "m").string(),
                 "--quiet"})
                .code,
            3);
}

TEST(CliTrainPredict, DeterministicArtifactsAndAnnotation) {
  TempDir dir("cli_train");
  ASSERT_EQ(run({"generate", "--n", "6", "--seed", "3", "--out", (dir / "data").string(), "--quiet"}).code, 0);
  const std::vector<std::string> train = {"train", "--data", (dir / "data").string(), "--epochs", "2", "--batch",
                                          "3", "--val-single", "2", "--val-varied", "2", "--seed", "3", "--quiet"};
  auto a = train, b = train;
  a.insert(a.end(), {"--out", (dir / "m1").string()});
  b.insert(b.end(), {"--out", (dir / "m2").string()});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(read_bytes(dir / "m1" / "history.csv"), read_bytes(dir / "m2" / "history.csv"));
  EXPECT_EQ(read_bytes(dir / "m1" / "checkpoint.eva"), read_bytes(dir / "m2" / "checkpoint.eva"));
  const std::string hist = read_bytes(dir / "m1" / "history.csv");
  EXPECT_EQ(hist.rfind("epoch,train_loss,val_loss\n1,", 0), 0u);

  const auto meta = load_checkpoint(dir / "m1" / "checkpoint.eva").meta;
  EXPECT_EQ(meta.seed, 3u);
  EXPECT_EQ(meta.scenario, 1);

  const auto ckpt = (dir / "m1" / "checkpoint.eva").string();
  const auto img = (dir / "data" / "0.png").string();
  const auto r = run({"predict", "--ckpt", ckpt, "--image", img, "--annotate", "--out", (dir / "p").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y,angle_deg");
  EXPECT_EQ(read_bytes(dir / "p" / "predictions.csv"), r.out);

  const auto net = load_checkpoint(dir / "m1" / "checkpoint.eva").network;
  const ImageRGBA src = read_image(img);
  const ImageRGBA expected = annotate(src, predict(net, src));
  EXPECT_EQ(read_image(dir / "p" / "0_annotated.png"), expected);
  EXPECT_NE(expected, src);

  const auto e = run({"eval", "--ckpt", ckpt, "--data", (dir / "data").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("mean_loss "), std::string::npos);
  EXPECT_NE(e.out.find("samples 6"), std::string::npos);
}

TEST(CliPredict, CorruptCheckpointExitThree) {
  TempDir dir("cli_bad_ckpt");
  std::ofstream(dir / "bad.eva") << "XXXXnot a checkpoint";
  EXPECT_EQ(run({"predict", "--ckpt", (dir / "bad.eva").string(), "--image", "x.png", "--out", (dir / "p").string()})
                .code,
            3);
}

TEST(CliExperiment, ReportAndMetadata) {
  TempDir dir("cli_exp");
  const std::vector<std::string> args = {"experiment", "--scenarios", "1,2", "--n", "4", "--epochs", "1",
                                         "--batch", "4", "--val-single", "1", "--val-varied", "1", "--quiet"};
  auto a = args;
  a.insert(a.end(), {"--out", (dir / "r").string()});
  const auto r = run(a);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_bytes(dir / "r" / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,min_train_loss,min_val_loss,epochs,seed");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(read_bytes(dir / "r" / "report_meta.txt").find("validation_size=2"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "r" / "history_scenario2.csv"));

  EXPECT_EQ(run({"experiment", "--scenarios", "1,8", "--out", (dir / "x").string()}).code, 2);
}
