// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic author-biography Q&A corpus with per-word ground-truth labels.
//
// Every author gets one question per fact template (birthplace, genre, award,
// father's and mother's occupation). The fact slot words of an answer are the
// oracle unwanted words (UW); everything else, including the echoed author
// name, is a general word (GW). A separate "general" split of world-fact
// questions stands in for real-world knowledge probes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiflab/errors.hpp"

namespace tiflab::corpus {

enum class Split { kForget, kRetain, kHoldout, kGeneral };
enum class AnnotationSource { kOracle, kDiscriminative, kStopword, kExternal };

std::string_view to_string(Split split);
std::string_view to_string(AnnotationSource source);
// Throw SchemaError on unknown names.
Split parse_split(std::string_view name);
AnnotationSource parse_annotation_source(std::string_view name);

struct QASample {
  std::string id;
  std::string question;
  std::string answer;
  Split split = Split::kRetain;
  std::string paraphrased_answer;
  std::vector<std::string> perturbed_answers;

  bool operator==(const QASample&) const = default;
};

// uw_mask[i] != 0 marks answer word i as unwanted. Words are split_words(answer).
struct AnnotatedSample {
  QASample base;
  std::vector<std::uint8_t> uw_mask;
  AnnotationSource source = AnnotationSource::kOracle;

  std::vector<std::string> answer_words() const;
  std::size_t uw_count() const;
  bool operator==(const AnnotatedSample&) const = default;
};

struct Inventories {
  std::vector<std::string> first_names;
  std::vector<std::string> surnames;
  std::vector<std::string> cities;
  std::vector<std::string> genres;
  std::vector<std::string> awards;
  std::vector<std::string> occupations;
  std::vector<std::string> countries;
  std::vector<std::string> capitals;
  std::vector<std::string> languages;
  // Per fact template, entities that appear only inside perturbed answers
  // (empty unless GeneratorConfig::unique_entities).
  std::vector<std::vector<std::string>> decoys;

  bool operator==(const Inventories&) const = default;
};

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::size_t n_authors = 200;
  double forget_fraction = 0.05;
  std::size_t n_general = 40;
  std::size_t n_perturbed = 3;
  // true: every fact is an invented word owned by a single author and
  // perturbed answers draw from per-template decoy pools that no author uses.
  // false: facts come from the small shared inventories, so the same city or
  // occupation recurs across many authors.
  bool unique_entities = true;

  // Number of forget authors, round(n_authors * forget_fraction).
  std::size_t forget_authors() const;
  // Throws ConfigError.
  void validate() const;
};

struct CorpusBundle {
  std::uint64_t seed = 0;
  Inventories inventories;
  std::vector<AnnotatedSample> samples;

  std::vector<AnnotatedSample> split(Split which) const;
  // Every string a tokenizer must cover.
  std::vector<std::string> all_texts() const;
  const AnnotatedSample* find(std::string_view id) const;

  // Persisted content is the sample list; seed and inventories travel in the
  // run's metadata file instead.
  bool operator==(const CorpusBundle& other) const { return samples == other.samples; }
};

// Number of fact templates per author.
inline constexpr std::size_t kFactsPerAuthor = 5;

CorpusBundle generate_corpus(const GeneratorConfig& config);

// JSONL: one sample per line with fields id, split, question, answer,
// paraphrased_answer, perturbed_answers, uw_mask, annotation_source.
std::string to_jsonl(std::span<const AnnotatedSample> samples);
// Throws ParseError (with the 1-based line number) for malformed JSON and
// SchemaError for missing fields or a uw_mask whose length differs from the
// answer's word count.
std::vector<AnnotatedSample> parse_jsonl(std::string_view text);

void write_jsonl(const CorpusBundle& bundle, const std::filesystem::path& path);
void write_jsonl(std::span<const AnnotatedSample> samples, const std::filesystem::path& path);
CorpusBundle read_jsonl(const std::filesystem::path& path);

// A record of an external annotation document names a (question, answer)
// pair that is not in the bundle.
class UnmatchedRecordError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

struct IngestResult {
  std::vector<AnnotatedSample> samples;
  std::vector<std::string> warnings;
};

// Reads a JSON array of {question, answer, target_words} records. Target
// phrases are matched case-insensitively against the answer's words: every
// contiguous occurrence of a phrase marks its words UW; a phrase with no
// contiguous occurrence falls back to marking each of its words wherever it
// occurs, and words found nowhere are skipped with a warning.
IngestResult ingest_external_annotations(std::string_view json_text, const CorpusBundle& bundle);

}  // namespace tiflab::corpus
