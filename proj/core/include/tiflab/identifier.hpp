// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Word-level UW/GW labelling of answers.
//
// The discriminative identifier masks one answer word at a time and asks a
// masked LM to fill it back in: a word the encoder can recover from context
// is general (GW), one it cannot is unwanted (UW). The stop-word identifier
// is the bottom-line baseline that keeps only listed function words.

#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tiflab/corpus.hpp"
#include "tiflab/models.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::identifier {

struct IdentificationResult {
  std::string sample_id;
  std::vector<std::uint8_t> uw_mask;
  // Discriminative mode only: the encoder's best guess per word.
  std::vector<std::string> predicted;
  // Answer words missing from the vocabulary; these are always UW.
  std::vector<std::size_t> oov_positions;
};

// A word counts as GW when it is among the encoder's `top_k` predictions at
// its masked position (top_k == 1 is exact argmax match). One model call per
// answer word. Throws ContractViolation for an empty answer or top_k == 0.
IdentificationResult identify_discriminative(const lm::MaskedLM& model, const lm::Tokenizer& tokenizer,
                                             const corpus::QASample& sample, std::size_t top_k = 1);

// Word in `stoplist` -> GW, otherwise UW. Throws ContractViolation for an
// empty stoplist.
IdentificationResult identify_stopword(const corpus::QASample& sample, const std::set<std::string>& stoplist);

// A small English function-word list.
const std::set<std::string>& default_stoplist();

// UW picks of one identifier run: (sample id, word position) pairs.
using UwSet = std::set<std::pair<std::string, std::size_t>>;
UwSet uw_set(std::span<const IdentificationResult> run);

// Pairwise Jaccard indices over runs, ordered (0,1), (0,2), ..., (1,2), ...
// Two empty sets have index 1. Throws ContractViolation for fewer than two
// runs or runs that cover different sample ids.
std::vector<double> jaccard_consistency(std::span<const std::vector<IdentificationResult>> runs);
double jaccard(const UwSet& a, const UwSet& b);

struct Accuracy {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a metric's denominator was zero and it was reported as 0.
  bool degenerate = false;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

// UW is the positive class. Throws ContractViolation on length mismatch.
Accuracy identifier_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> oracle);
// Micro-averaged over a run, matched to `oracle` by sample id.
Accuracy identifier_accuracy(std::span<const IdentificationResult> run,
                             std::span<const corpus::AnnotatedSample> oracle);

// Copies the samples and swaps in the run's masks, matched by sample id.
std::vector<corpus::AnnotatedSample> apply(std::span<const corpus::AnnotatedSample> samples,
                                           std::span<const IdentificationResult> run,
                                           corpus::AnnotationSource source);

}  // namespace tiflab::identifier
