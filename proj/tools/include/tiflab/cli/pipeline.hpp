// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// The stages behind each subcommand. Every artifact name carries a hash of
// exactly the configuration that produced it, so a stage finds its inputs by
// recomputing their names, and a changed setting never picks up a stale file.
//
//   corpus-H.jsonl                    gen-corpus
//   original-H.ckpt, original-H.csv   train --role original   (per-epoch loss)
//   retained-H.ckpt, retained-H.csv   train --role retained
//   reinforce-H.ckpt                  train --role reinforce
//   encoder-H.ckpt                    identify (discriminative, one per seed)
//   annotations-H.jsonl               identify
//   identify-H.csv, jaccard-H.csv     identify (audit against oracle labels)
//   unlearn-H/epoch-NN.ckpt           unlearn
//   unlearn-H/steps.csv               unlearn
//   eval-H.csv, eval-H/*.json         evaluate
//   config-H.json                     every subcommand

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tiflab/cli/config.hpp"
#include "tiflab/corpus.hpp"
#include "tiflab/evaluation.hpp"
#include "tiflab/identifier.hpp"
#include "tiflab/models.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::cli {

enum class Role { kOriginal, kRetained, kReinforce };
// Throws ConfigError for anything but original, retained or reinforce.
Role parse_role(std::string_view name);

struct IdentifyOutput {
  std::filesystem::path annotations;
  std::filesystem::path audit_csv;
  std::filesystem::path jaccard_csv;  // empty with fewer than two encoder seeds
  std::vector<identifier::Accuracy> accuracy;  // per encoder seed
  std::vector<double> jaccard;                 // pairwise, see jaccard_consistency
};

class Pipeline {
 public:
  // `log` receives one line per stage step; nothing there is written to disk.
  Pipeline(ExperimentConfig config, std::filesystem::path out_dir, std::ostream& log);

  const ExperimentConfig& config() const noexcept { return config_; }
  const std::filesystem::path& out_dir() const noexcept { return out_; }

  std::filesystem::path gen_corpus();
  std::filesystem::path train(Role role);
  IdentifyOutput identify();
  // Returns the run directory holding epoch-NN.ckpt and steps.csv.
  std::filesystem::path unlearn();
  // `glob` is matched against file names (fnmatch) in its directory,
  // relative to the output directory unless absolute. Default: this
  // config's unlearning run. Returns the run CSV.
  std::filesystem::path evaluate(const std::optional<std::string>& glob = std::nullopt);

  // Artifact names, for tests and the report.
  std::filesystem::path corpus_path() const;
  std::filesystem::path model_path(Role role) const;
  std::filesystem::path annotations_path() const;
  std::filesystem::path unlearn_dir() const;
  std::filesystem::path eval_csv(const std::string& glob) const;

 private:
  struct Data {
    corpus::CorpusBundle bundle;
    lm::Tokenizer tokenizer;
  };

  Data load_corpus() const;
  std::vector<corpus::AnnotatedSample> load_annotations() const;
  lm::CausalLM load_model(Role role) const;
  void write_config() const;
  std::string key(std::string_view stage) const;
  std::filesystem::path encoder_path(std::uint64_t seed) const;

  ExperimentConfig config_;
  std::filesystem::path out_;
  std::ostream& log_;
};

// Tokenizer over every corpus string plus the safe answer.
lm::Tokenizer build_tokenizer(const corpus::CorpusBundle& bundle, const std::string& safe_answer);

// Forget, retain probe, general and holdout sets encoded for evaluation;
// forget masks come from `forget`.
eval::EvalSets eval_sets(const corpus::CorpusBundle& bundle, std::span<const corpus::AnnotatedSample> forget,
                         const lm::Tokenizer& tokenizer, std::size_t retain_probe);

// Files in the glob's directory whose names match its last component, sorted.
// Throws PrerequisiteError when nothing matches.
std::vector<std::filesystem::path> expand_glob(const std::filesystem::path& pattern);

}  // namespace tiflab::cli
