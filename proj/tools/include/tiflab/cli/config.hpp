// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration: one JSON document drives every subcommand.
// Every field has a default, unknown keys are rejected, and each error names
// the offending field by JSON pointer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tiflab/corpus.hpp"
#include "tiflab/engine.hpp"
#include "tiflab/evaluation.hpp"
#include "tiflab/models.hpp"
#include "tiflab/objectives.hpp"

namespace tiflab::cli {

enum class IdentifierKind { kOracle, kDiscriminative, kStopword, kExternal };

struct IdentifierConfig {
  IdentifierKind kind = IdentifierKind::kOracle;
  std::size_t top_k = 1;
  // One encoder per seed; the first labels the forget set, all of them feed
  // the Jaccard audit.
  std::vector<std::uint64_t> encoder_seeds = {1};
  std::filesystem::path stoplist;     // stopword kind; empty = built-in list
  std::filesystem::path annotations;  // external kind
};

struct EvalConfig {
  eval::EvalOptions options;
  // Leading retain samples used as the utility probe.
  std::size_t retain_probe = 50;
};

struct ReinforceConfig {
  engine::TrainConfig train;
  double nll_threshold = 0.05;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs";
  corpus::GeneratorConfig corpus;
  lm::ModelConfig model;  // vocab_size comes from the corpus
  engine::TrainConfig original;
  engine::TrainConfig retained;
  engine::TrainConfig unlearn;
  engine::TrainConfig encoder;
  ReinforceConfig reinforce;
  objectives::ObjectiveConfig objective;
  IdentifierConfig identifier;
  EvalConfig eval;

  // The shipped defaults.
  static ExperimentConfig defaults();

  // Pushes `seed` into the corpus generator and every training stage.
  void set_seed(std::uint64_t value);

  // Full canonical form; parse(to_json()) reproduces the config.
  nlohmann::ordered_json to_json() const;
};

std::string_view to_string(IdentifierKind kind);

// Missing fields keep their defaults. Relative paths resolve against
// `base_dir`. Throws ConfigError carrying a JSON pointer.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
// Reads and parses a file; ParseError for invalid JSON.
ExperimentConfig load_config(const std::filesystem::path& path);

// Cross-field and filesystem checks (referenced files exist, mask-reading
// objectives have a mask source). Throws ConfigError.
void validate(const ExperimentConfig& config);

// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string short_hash(const nlohmann::ordered_json& value);

}  // namespace tiflab::cli
