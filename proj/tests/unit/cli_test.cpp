// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tiflab/cli/app.hpp"
#include "tiflab/cli/config.hpp"
#include "tiflab/cli/pipeline.hpp"
#include "tiflab/cli/report.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string pointer_of(const json& doc) {
  try {
    validate(parse_config(doc));
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "<none>";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tiflab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Config, DefaultsRoundTrip) {
  const auto d = ExperimentConfig::defaults();
  const auto j = d.to_json();
  EXPECT_EQ(parse_config(json::parse(j.dump())).to_json(), j);
  EXPECT_NO_THROW(validate(d));
  EXPECT_EQ(short_hash(j).size(), 16u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(pointer_of({{"bogus", 1}}), "/bogus");
  EXPECT_EQ(pointer_of({{"train", {{"original", {{"lr", "fast"}}}}}}), "/train/original/lr");
  EXPECT_EQ(pointer_of({{"train", {{"unlearn", {{"batch_size", 0}}}}}}), "/train/unlearn/batch_size");
  EXPECT_EQ(pointer_of({{"corpus", {{"forget_fraction", 2.0}}}}), "/corpus/forget_fraction");
  EXPECT_EQ(pointer_of({{"objective", {{"kind", "nope"}}}}), "/objective/kind");
  EXPECT_EQ(pointer_of({{"objective", {{"beta", -1}}}}), "/objective/beta");
  EXPECT_EQ(pointer_of({{"model", {{"n_heads", 5}}}}).rfind("/model", 0), 0u);
  EXPECT_EQ(pointer_of({{"identifier", {{"kind", "external"}}}}).rfind("/identifier", 0), 0u);
  EXPECT_EQ(pointer_of({{"eval", {{"k_percent", 0}}}}), "/eval/k_percent");
  EXPECT_EQ(pointer_of(json::array()), "");
}

TEST(Config, SeedReachesEveryStage) {
  auto c = ExperimentConfig::defaults();
  c.set_seed(7);
  EXPECT_EQ(c.corpus.seed, 7u);
  std::set<std::uint64_t> seeds = {c.original.seed, c.retained.seed, c.unlearn.seed, c.encoder.seed,
                                   c.reinforce.train.seed};
  EXPECT_EQ(seeds.size(), 5u);
}

TEST(Config, LoadReportsParseLine) {
  const auto dir = scratch("parse");
  { std::ofstream(dir / "c.json") << "{\n\"seed\": 1,\n}\n"; }
  try {
    load_config(dir / "c.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Report, ParsesRunCsvAndFindsPeak) {
  const std::string csv = "checkpoint,epoch,forget_quality,model_utility\nx/0,0,0.01,0.5\nx/1,1,0.2,0.4\nx/2,2,0.2,0.3\n";
  const auto run = parse_run_csv(csv, "r");
  EXPECT_EQ(run.rows.size(), 3u);
  EXPECT_EQ(run.peak_row(), 1u);
  EXPECT_EQ(run.checkpoints[2], "x/2");
  EXPECT_THROW(parse_run_csv("epoch,model_utility\n0,1\n", "r"), SchemaError);
  EXPECT_THROW(parse_run_csv("epoch,forget_quality,model_utility\n0,abc,1\n", "r"), SchemaError);
  const auto svg = tradeoff_svg({run});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(summary_markdown({run}).find("| r | 3 | 1 |"), std::string::npos);
}

TEST(Report, WritesHashNamedFilesDeterministically) {
  const auto dir = scratch("report");
  { std::ofstream(dir / "a.csv") << "epoch,forget_quality,model_utility\n0,0.01,0.5\n1,0.3,0.45\n"; }
  const std::vector<std::string> in = {"tpo=" + (dir / "a.csv").string()};
  const auto first = write_report(in, dir / "out");
  const auto second = write_report(in, dir / "out");
  EXPECT_EQ(first.svg, second.svg);
  EXPECT_EQ(first.svg.filename().string().rfind("report-", 0), 0u);
  EXPECT_THROW(write_report({(dir / "missing.csv").string()}, dir / "out"), PrerequisiteError);
}

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "tiflab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

TEST(App, ExitCodes) {
  const auto dir = scratch("app");
  std::string err;
  EXPECT_EQ(run_cli({}), kExitValidation);
  EXPECT_EQ(run_cli({"frobnicate"}), kExitValidation);
  EXPECT_EQ(run_cli({"--help"}), kExitOk);
  EXPECT_EQ(run_cli({"train", "--role", "sideways", "--out", dir.string()}), kExitValidation);
  { std::ofstream(dir / "bad.json") << R"({"corpus": {"n_authors": "many"}})"; }
  EXPECT_EQ(run_cli({"gen-corpus", "--config", (dir / "bad.json").string()}, &err), kExitValidation);
  EXPECT_NE(err.find("/corpus/n_authors"), std::string::npos);
  EXPECT_EQ(run_cli({"train", "--role", "original", "--out", dir.string()}, &err), kExitRuntime);
  EXPECT_NE(err.find("gen-corpus"), std::string::npos);
  EXPECT_EQ(run_cli({"evaluate", "--out", dir.string(), "--checkpoint", "nothing-*.ckpt"}, &err), kExitRuntime);
}

TEST(App, TinyPipelineEndToEnd) {
  const auto dir = scratch("e2e");
  {
    std::ofstream(dir / "c.json") << R"({"corpus": {"n_authors": 20, "forget_fraction": 0.1, "n_general": 6},
      "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32},
      "train": {"original": {"epochs": 2}, "retained": {"epochs": 2}, "unlearn": {"epochs": 2}},
      "eval": {"retain_probe": 5, "max_new_tokens": 8}})";
  }
  const std::vector<std::string> common = {"--config", (dir / "c.json").string(), "--out", (dir / "o").string()};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  std::string err;
  ASSERT_EQ(run_cli(with({"gen-corpus"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"train", "--role", "original"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"train", "--role", "retained"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"identify"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"unlearn"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"evaluate"}), &err), kExitOk) << err;
  ASSERT_EQ(run_cli(with({"report"}), &err), kExitOk) << err;

  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(dir / "o")) {
    const auto name = e.path().filename().string();
    if (name.rfind("eval-", 0) == 0 && e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  ASSERT_EQ(csvs.size(), 1u);
  const auto run = read_run_csv(csvs[0]);
  EXPECT_EQ(run.rows.size(), 3u);
  EXPECT_EQ(run.rows.front().at("epoch"), 0.0);
}

TEST(Glob, MatchesAndFailsLoudly) {
  const auto dir = scratch("glob");
  for (const char* n : {"epoch-01.ckpt", "epoch-00.ckpt", "other.txt"}) std::ofstream(dir / n) << "x";
  const auto hits = expand_glob(dir / "epoch-*.ckpt");
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].filename(), "epoch-00.ckpt");
  EXPECT_THROW(expand_glob(dir / "nope-*"), PrerequisiteError);
  EXPECT_THROW(parse_role("boss"), ConfigError);
}

}  // namespace
}  // namespace tiflab::cli
