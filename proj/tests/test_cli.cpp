#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "gnisi/cli.hpp"
#include "support.hpp"

using namespace gnisi;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "gnisi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = testutil::slurp(e.path());
  return files;
}

const char* kSmallConfig = R"({
  "ensemble": {"sizes": [5], "betas": [1.0], "sparsities": [0.5], "count": 4, "samples_per_model": 200},
  "mc": {"burn_in_sweeps": 300},
  "train": {"max_epochs": 3, "batch_size": 2},
  "architecture": {"sample_width": 8, "node_embed": 4, "edge_embed": 4, "encoder_hidden": 8,
                   "decoder_hidden": 8, "layer_hidden": [8, 8]},
  "eval": {"num_strings": 100, "moment_samples": 500, "num_model_draws": 200}
})";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  const auto r = run({"train", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(run({"evaluate", "--pred", "/nonexistent.json"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, LibraryErrorsExitOneWithJsonLine) {
  const auto dir = testutil::temp_dir("cli_errors");
  const auto bad = (dir / "bad.json").string();
  testutil::spit(bad, "{\"format_version\": 1, \"n\": 2}\n");
  const auto r = run({"evaluate", "--pred", bad, "--truth", bad});
  EXPECT_EQ(r.code, 1);
  const auto line = json::parse(r.err.substr(0, r.err.find('\n')));
  EXPECT_EQ(line["error"], "parse_error");
  EXPECT_TRUE(line["message"].is_string());
}

TEST(Cli, BinaryReportsExitCodes) {
  const std::string cli = GNISI_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " --help > /dev/null").c_str())), 0);
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " nonsense > /dev/null 2>&1").c_str())), 2);
  const auto dir = testutil::temp_dir("cli_binary");
  const auto bad = (dir / "bad.json").string();
  testutil::spit(bad, "not json\n");
  EXPECT_EQ(WEXITSTATUS(std::system((cli + " evaluate --pred " + bad + " --truth " + bad + " 2> /dev/null").c_str())), 1);
}

TEST(Cli, GenerateDataIsDeterministic) {
  const auto dir = testutil::temp_dir("cli_generate");
  const auto cfg = (dir / "c.json").string();
  testutil::spit(cfg, kSmallConfig);
  const auto a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
  ASSERT_EQ(run({"--config", cfg, "--seed", "7", "--out-dir", a, "generate-data"}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "--seed", "7", "--out-dir", b, "generate-data"}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "--seed", "8", "--out-dir", c, "generate-data"}).code, 0);
  const auto sa = snapshot(a);
  EXPECT_EQ(sa.size(), 9U);
  EXPECT_EQ(sa, snapshot(b));
  EXPECT_NE(sa, snapshot(c));
}

TEST(Cli, GenerateDataFlagsOverrideConfig) {
  const auto dir = testutil::temp_dir("cli_flags");
  const auto out = (dir / "d").string();
  ASSERT_EQ(run({"--seed", "1", "--out-dir", out, "generate-data", "--sizes", "3", "4", "--betas", "0.5", "--sparsities", "0",
                 "--count", "1", "--samples-per-model", "10", "--burn-in", "20"})
                .code,
            0);
  const auto e = read_ensemble(out);
  ASSERT_EQ(e.size(), 2U);
  EXPECT_EQ(e[1].model.n(), 4U);
  EXPECT_EQ(e[0].batch.size(), 10U);
}

TEST(Cli, EvaluateIdenticalModels) {
  const auto dir = testutil::temp_dir("cli_identity");
  const auto m = (dir / "m.json").string();
  save_model(random_model({6, 0.3, 1.0, 1.0, 1.0}, 3), m);
  ASSERT_EQ(run({"--out-dir", dir.string(), "evaluate", "--pred", m, "--truth", m}).code, 0);
  const auto report = json::parse(testutil::slurp(dir / "report.json"));
  EXPECT_EQ(report["param_mse"], 0.0);
  EXPECT_NEAR(report["param_pearson_r"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(report["boltzmann_pearson_r"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(dir / "report_scatter.csv"));
  EXPECT_FALSE(fs::exists(dir / "report_histogram.csv"));
  EXPECT_EQ(run({"evaluate", "--pred", m, "--truth", m, "--samples", m}).code, 2);
}

TEST(Cli, BinarizeWritesSamples) {
  const auto dir = testutil::temp_dir("cli_binarize");
  const auto csv = (dir / "x.csv").string();
  testutil::spit(csv, "id,A,B\nr1,1,7\nr2,2,7\nr3,3,7\nr4,4,7\n");
  const auto r = run({"--out-dir", dir.string(), "binarize", "--input", csv});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(testutil::slurp(dir / "samples.txt"), "01\n11\n11\n11\n");
  EXPECT_NE(r.err.find("constant"), std::string::npos);
  EXPECT_EQ(run({"binarize", "--input", csv, "--q", "1.5"}).code, 1);
}

TEST(Cli, FullPipelineOnSmallCorpus) {
  const auto dir = testutil::temp_dir("cli_pipeline");
  const auto cfg = (dir / "c.json").string();
  testutil::spit(cfg, kSmallConfig);
  const auto data = (dir / "data").string(), run_dir = (dir / "run").string();
  ASSERT_EQ(run({"--config", cfg, "--seed", "3", "--out-dir", data, "generate-data"}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "--seed", "3", "--out-dir", run_dir, "train", "--data", data}).code, 0);
  EXPECT_TRUE(fs::exists(fs::path(run_dir) / "checkpoint.json"));
  EXPECT_EQ(testutil::slurp(fs::path(run_dir) / "train_log.csv").rfind("epoch,train_loss,val_loss\n", 0), 0U);

  const auto samples = (fs::path(data) / "samples" / "model_00000.txt").string();
  const auto truth = (fs::path(data) / "models" / "model_00000.json").string();
  ASSERT_EQ(run({"--out-dir", run_dir, "infer", "--checkpoint", (fs::path(run_dir) / "checkpoint.json").string(), "--samples", samples})
                .code,
            0);
  const auto pred = (fs::path(run_dir) / "predicted_model.json").string();
  EXPECT_EQ(load_model(pred).n(), 5U);

  ASSERT_EQ(run({"--config", cfg, "--out-dir", run_dir, "evaluate", "--pred", pred, "--truth", truth}).code, 0);
  EXPECT_TRUE(json::parse(testutil::slurp(fs::path(run_dir) / "report.json"))["param_mse"].is_number());
  const auto obs_dir = (fs::path(run_dir) / "observed").string();
  ASSERT_EQ(run({"--config", cfg, "--seed", "5", "--out-dir", obs_dir, "evaluate", "--pred", pred, "--samples", samples}).code, 0);
  EXPECT_TRUE(fs::exists(fs::path(obs_dir) / "report_histogram.csv"));

  const auto ext = (dir / "external.txt").string();
  testutil::spit(ext, "0.1 0.2 0 0 0\n0.2 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 -0.3\n");
  ASSERT_EQ(run({"--config", cfg, "--out-dir", run_dir, "compare", "--pred", pred, "--external", ext, "--truth", truth}).code, 0);
  const auto side = json::parse(testutil::slurp(fs::path(run_dir) / "compare.json"));
  EXPECT_TRUE(side.contains("predicted"));
  EXPECT_TRUE(side.contains("external"));
}
