// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/identifier.hpp"

#include <algorithm>
#include <map>

#include "tiflab/errors.hpp"

namespace tiflab::identifier {

using lm::TokenId;
using lm::Tokenizer;

IdentificationResult identify_discriminative(const lm::MaskedLM& model, const Tokenizer& tokenizer,
                                             const corpus::QASample& sample, std::size_t top_k) {
  if (top_k == 0) throw ContractViolation("identify_discriminative: top_k must be at least 1");
  const auto words = lm::split_words(sample.answer);
  if (words.empty()) throw ContractViolation("identify_discriminative: empty answer in " + sample.id);

  const auto question = tokenizer.encode(sample.question);
  const auto answer = tokenizer.encode_words(words);
  IdentificationResult result;
  result.sample_id = sample.id;
  result.uw_mask.assign(words.size(), 1);
  result.predicted.resize(words.size());

  std::vector<TokenId> masked = answer;
  for (std::size_t i = 0; i < words.size(); ++i) {
    masked[i] = Tokenizer::kMask;
    const auto top = lm::predict_masked_top_k(model, question, masked, top_k);
    masked[i] = answer[i];
    result.predicted[i] = tokenizer.word(top.front());
    if (answer[i] == Tokenizer::kUnk) {
      result.oov_positions.push_back(i);
      continue;
    }
    if (std::find(top.begin(), top.end(), answer[i]) != top.end()) result.uw_mask[i] = 0;
  }
  return result;
}

IdentificationResult identify_stopword(const corpus::QASample& sample, const std::set<std::string>& stoplist) {
  if (stoplist.empty()) throw ContractViolation("identify_stopword: empty stoplist");
  IdentificationResult result;
  result.sample_id = sample.id;
  for (const auto& w : lm::split_words(sample.answer)) {
    result.uw_mask.push_back(stoplist.contains(w) ? 0 : 1);
  }
  return result;
}

const std::set<std::string>& default_stoplist() {
  static const std::set<std::string> words = {
      "a",    "an",   "the",  "is",   "are",  "was",  "were", "be",   "been", "of",   "in",   "on",
      "at",   "to",   "for",  "with", "by",   "from", "as",   "and",  "or",   "but",  "that", "this",
      "it",   "its",  "who",  "which", "what", "has", "have", "had",  "do",   "does", "did",  "his",
      "her",  "their", "he",  "she",  "they", "i",    "not",  "no",   "so",   "than", "then", "there"};
  return words;
}

UwSet uw_set(std::span<const IdentificationResult> run) {
  UwSet out;
  for (const auto& r : run) {
    for (std::size_t i = 0; i < r.uw_mask.size(); ++i) {
      if (r.uw_mask[i] != 0) out.emplace(r.sample_id, i);
    }
  }
  return out;
}

double jaccard(const UwSet& a, const UwSet& b) {
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> jaccard_consistency(std::span<const std::vector<IdentificationResult>> runs) {
  if (runs.size() < 2) throw ContractViolation("jaccard_consistency: need at least two runs");
  auto ids = [](const std::vector<IdentificationResult>& run) {
    std::set<std::string> out;
    for (const auto& r : run) out.insert(r.sample_id);
    return out;
  };
  const auto first = ids(runs[0]);
  std::vector<UwSet> sets;
  for (const auto& run : runs) {
    if (ids(run) != first) throw ContractViolation("jaccard_consistency: runs cover different samples");
    sets.push_back(uw_set(run));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) out.push_back(jaccard(sets[i], sets[j]));
  }
  return out;
}

namespace {

Accuracy finish(Accuracy acc) {
  const double tp = static_cast<double>(acc.true_positive);
  const std::size_t pred_pos = acc.true_positive + acc.false_positive;
  const std::size_t true_pos = acc.true_positive + acc.false_negative;
  if (pred_pos == 0 || true_pos == 0) acc.degenerate = true;
  acc.precision = pred_pos == 0 ? 0.0 : tp / static_cast<double>(pred_pos);
  acc.recall = true_pos == 0 ? 0.0 : tp / static_cast<double>(true_pos);
  const double denom = acc.precision + acc.recall;
  if (denom == 0.0) acc.degenerate = true;
  acc.f1 = denom == 0.0 ? 0.0 : 2.0 * acc.precision * acc.recall / denom;
  return acc;
}

void tally(Accuracy& acc, std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> oracle) {
  if (predicted.size() != oracle.size()) {
    throw ContractViolation("identifier_accuracy: mask lengths differ (" + std::to_string(predicted.size()) +
                            " vs " + std::to_string(oracle.size()) + ")");
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool o = oracle[i] != 0;
    if (p && o) ++acc.true_positive;
    if (p && !o) ++acc.false_positive;
    if (!p && o) ++acc.false_negative;
  }
}

}  // namespace

Accuracy identifier_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> oracle) {
  Accuracy acc;
  tally(acc, predicted, oracle);
  return finish(acc);
}

Accuracy identifier_accuracy(std::span<const IdentificationResult> run,
                             std::span<const corpus::AnnotatedSample> oracle) {
  std::map<std::string, const corpus::AnnotatedSample*> by_id;
  for (const auto& s : oracle) by_id[s.base.id] = &s;
  Accuracy acc;
  for (const auto& r : run) {
    auto it = by_id.find(r.sample_id);
    if (it == by_id.end()) throw ContractViolation("identifier_accuracy: no oracle for " + r.sample_id);
    tally(acc, r.uw_mask, it->second->uw_mask);
  }
  return finish(acc);
}

std::vector<corpus::AnnotatedSample> apply(std::span<const corpus::AnnotatedSample> samples,
                                           std::span<const IdentificationResult> run,
                                           corpus::AnnotationSource source) {
  std::map<std::string, const IdentificationResult*> by_id;
  for (const auto& r : run) by_id[r.sample_id] = &r;
  std::vector<corpus::AnnotatedSample> out;
  for (const auto& s : samples) {
    auto it = by_id.find(s.base.id);
    if (it == by_id.end()) throw ContractViolation("apply: no identification for " + s.base.id);
    if (it->second->uw_mask.size() != s.uw_mask.size()) {
      throw ContractViolation("apply: mask length mismatch for " + s.base.id);
    }
    auto copy = s;
    copy.uw_mask = it->second->uw_mask;
    copy.source = source;
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace tiflab::identifier
