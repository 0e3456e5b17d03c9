// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/cli/app.hpp"

#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiflab/cli/config.hpp"
#include "tiflab/cli/pipeline.hpp"
#include "tiflab/cli/report.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::cli {
namespace {

struct Globals {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_globals(CLI::App& app, Globals& g) {
  app.add_option("--config", g.config_path, "Experiment config (JSON); defaults apply when omitted");
  app.add_option("--out", g.out, "Output directory; overrides output_dir");
  app.add_option("--seed", g.seed, "Master seed; overrides seed");
}

ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig config = g.config_path.empty() ? ExperimentConfig::defaults() : load_config(g.config_path);
  if (g.seed) config.set_seed(*g.seed);
  if (!g.out.empty()) config.output_dir = g.out;
  validate(config);
  return config;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Targeted forgetting experiments on a synthetic author corpus", "tiflab"};
  app.require_subcommand(1);
  Globals globals;
  add_globals(app, globals);

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus");
  auto* train = app.add_subcommand("train", "Fine-tune the original, retained or reinforced model");
  std::string role;
  train->add_option("--role", role, "original | retained | reinforce")->required();
  auto* identify = app.add_subcommand("identify", "Label unwanted and general words in the forget set");
  auto* unlearn = app.add_subcommand("unlearn", "Run the configured unlearning objective");
  auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints");
  std::optional<std::string> checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint glob; default is this config's unlearning run");
  auto* report = app.add_subcommand("report", "FQ-vs-MU plot and summary table from run CSVs");
  std::vector<std::string> inputs;
  report->add_option("runs", inputs, "Run CSVs as PATH or LABEL=PATH; default is this config's run");
  for (auto* sub : {gen, train, identify, unlearn, evaluate, report}) add_globals(*sub, globals);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    // Everything up to building the pipeline is validation.
    std::optional<Role> parsed_role;
    ExperimentConfig config;
    try {
      config = resolve(globals);
      if (train->parsed()) parsed_role = parse_role(role);
    } catch (const std::filesystem::filesystem_error& e) {
      throw ConfigError(e.what());
    }
    Pipeline pipeline(config, config.output_dir, out);
    if (gen->parsed()) {
      pipeline.gen_corpus();
    } else if (train->parsed()) {
      pipeline.train(*parsed_role);
    } else if (identify->parsed()) {
      pipeline.identify();
    } else if (unlearn->parsed()) {
      pipeline.unlearn();
    } else if (evaluate->parsed()) {
      pipeline.evaluate(checkpoint);
    } else if (report->parsed()) {
      if (inputs.empty()) inputs.push_back(pipeline.eval_csv(pipeline.unlearn_dir().filename().string() + "/epoch-*.ckpt").string());
      const auto files = write_report(inputs, config.output_dir);
      out << "report -> " << files.svg.string() << ", " << files.summary.string() << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const PrerequisiteError& e) {
    err << "missing prerequisite: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace tiflab::cli
