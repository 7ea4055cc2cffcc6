#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rrm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = rrm::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "rrm_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_config(const json& j) {
  const fs::path p = workdir() / "cfg.json";
  std::ofstream(p) << j.dump();
  return p.string();
}

json tiny_config() {
  return {{"network", {{"base_width", 4}, {"depth", 2}, {"state_dim", 2}}},
          {"train", {{"steps", 3}, {"lr_init", 1e-3}, {"lr_final", 1e-4}, {"log_every", 1}}},
          {"data", {{"count", 2}, {"size", 16}}}};
}

json first_line_json(const std::string& text) { return json::parse(text.substr(0, text.find('\n'))); }

}  // namespace

TEST(Cli, DumpScanHorizontal) {
  const CliRun r = cli({"dump-scan", "--height", "2", "--width", "2", "--direction", "horizontal"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "k,row,col\n0,0,0\n1,0,1\n2,1,1\n3,1,0\n");
  const json announced = first_line_json(r.err);
  EXPECT_EQ(announced["command"], "dump-scan");
  EXPECT_TRUE(announced.contains("seed"));
}

TEST(Cli, DumpScanAllDirections) {
  const CliRun r = cli({"dump-scan", "--height", "3", "--width", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1 + 8 * 6);
}

TEST(Cli, UnknownFlagPrintsUsage) {
  const CliRun r = cli({"dump-scan", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_NE(r.err.find("\"error\":\"usage\""), std::string::npos);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
}

TEST(Cli, BadDirectionIsConfigError) {
  const CliRun r = cli({"dump-scan", "--height", "2", "--width", "2", "--direction", "spiral"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err.substr(r.err.rfind('{')))["error"], "config");
}

TEST(Cli, InferMissingInputNamesFile) {
  const CliRun r = cli({"infer", "--ckpt", "x.ckpt", "--input", "missing.rraw"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.rraw"), std::string::npos);
}

TEST(Cli, UnknownAblationAxis) {
  const CliRun r = cli({"ablate", "--axis", "depth", "--config", write_config(tiny_config())});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("depth"), std::string::npos);
}

TEST(Cli, InvalidConfigExitsOne) {
  json bad = tiny_config();
  bad["train"]["lr_final"] = 1.0;
  const CliRun r = cli({"train", "--config", write_config(bad), "--out", (workdir() / "bad").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, NonFiniteTrainingExitsTwo) {
  json cfg = tiny_config();
  cfg["train"]["lr_init"] = 1e300;
  cfg["train"]["lr_final"] = 1e300;
  const CliRun r = cli({"train", "--config", write_config(cfg), "--out", (workdir() / "nan").string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_EQ(json::parse(r.err.substr(r.err.rfind('{')))["error"], "numeric");
}

TEST(Cli, TrainEvalInferInspectPipeline) {
  const std::string cfg = write_config(tiny_config());
  const fs::path data = workdir() / "data", run = workdir() / "run";

  CliRun g = cli({"gen-data", "--config", cfg, "--seed", "3", "--out", data.string()});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(first_line_json(g.err)["seed"], 3);
  EXPECT_TRUE(fs::exists(data / "index.json"));

  CliRun t = cli({"train", "--config", cfg, "--data", data.string(), "--out", run.string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(run / "model.ckpt"));
  EXPECT_TRUE(fs::exists(run / "train_log.csv"));
  const json trained = json::parse(t.out);

  CliRun e = cli({"eval", "--ckpt", (run / "model.ckpt").string(), "--data", data.string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(json::parse(e.out)["final"], trained["final"]);

  CliRun again = cli({"train", "--config", cfg, "--data", data.string(), "--out", (workdir() / "run2").string()});
  EXPECT_EQ(again.out, t.out);

  CliRun i = cli({"infer", "--ckpt", (run / "model.ckpt").string(), "--input", (data / "sample_000.rraw").string(),
               "--out", (workdir() / "png").string()});
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_TRUE(fs::exists(workdir() / "png" / "sample_000.ppm"));

  CliRun h = cli({"inspect-ckpt", "--ckpt", (run / "model.ckpt").string()});
  ASSERT_EQ(h.code, 0) << h.err;
  const json header = json::parse(h.out);
  EXPECT_EQ(header["step"], 3);
  EXPECT_GT(header["parameter_count"].get<std::size_t>(), 0u);
}
