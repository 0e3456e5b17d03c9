// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Unlearning metrics: answer probability, ROUGE-L, truth ratio, KS-test
// forget quality, model utility, Min-K% membership scores with PrivLeak,
// VerbMem/KnowMem, GW cross-entropy and KL to the reference model.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiflab/corpus.hpp"
#include "tiflab/models.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::eval {

// ---- pure metrics -------------------------------------------------------

// LCS-based F1; 0 when either side is empty or nothing is shared.
double rouge_l_f1(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_l_f1(std::span<const lm::TokenId> candidate, std::span<const lm::TokenId> reference);
std::size_t lcs_length(std::span<const lm::TokenId> a, std::span<const lm::TokenId> b);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool exact = false;
};

// Two-sample Kolmogorov-Smirnov test. Exact permutation p-value (ties kept
// in place) when min(|a|, |b|) <= kKsExactLimit, otherwise the asymptotic
// Kolmogorov distribution at lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D,
// ne = nm/(n+m). Throws ContractViolation on an empty input.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);
inline constexpr std::size_t kKsExactLimit = 10;
// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

// Mean of the ceil(k% * T) smallest values. Throws ContractViolation for k
// outside (0, 100] or an empty input.
double min_k_score(std::span<const double> token_logprobs, double k_percent);

// Mann-Whitney AUC with mid-ranks: P(positive > negative) + P(tie) / 2.
double auc(std::span<const double> positive, std::span<const double> negative);
// 100 * (auc_model - auc_retained) / auc_retained; throws NumericError when
// auc_retained == 0.
double privleak(double auc_model, double auc_retained);

// Full-vocabulary KL(p || q). Throws ContractViolation on size mismatch.
double kl_divergence(std::span<const double> p, std::span<const double> q);

enum class Aggregation { kHarmonic, kArithmetic };
// Harmonic mean is 0 when any value is 0. Throws ContractViolation when empty.
double aggregate(std::span<const double> values, Aggregation mode);

// ---- model metrics ------------------------------------------------------

// Tokenized view of a sample for evaluation. `answer` has no EOS.
struct EvalSample {
  std::string id;
  std::vector<lm::TokenId> prompt;
  std::vector<lm::TokenId> answer;
  std::vector<lm::TokenId> paraphrased;
  std::vector<std::vector<lm::TokenId>> perturbed;
  std::vector<std::uint8_t> uw;
};

std::vector<EvalSample> encode_eval(const lm::Tokenizer& tokenizer, std::span<const corpus::AnnotatedSample> samples);

// Geometric mean per-token probability P(y|x)^(1/|y|). Throws
// ContractViolation for an empty y.
double answer_probability(const lm::CausalLM& model, std::span<const lm::TokenId> prompt,
                          std::span<const lm::TokenId> target);

struct TruthRatio {
  double ratio = 0.0;    // mean P_norm(perturbed) / P_norm(paraphrased)
  double utility = 0.0;  // max(0, 1 - ratio)
};
// std::nullopt when the paraphrase is empty or fewer than two perturbed
// answers exist.
std::optional<TruthRatio> truth_ratio(const lm::CausalLM& model, const EvalSample& sample);

// Truth ratios over a set; samples without a truth ratio are skipped.
std::vector<double> truth_ratios(const lm::CausalLM& model, std::span<const EvalSample> samples);

// KS p-value between the truth-ratio lists of two models on the forget set.
double forget_quality(std::span<const double> unlearned_ratios, std::span<const double> retained_ratios);
double forget_quality(const lm::CausalLM& unlearned, const lm::CausalLM& retained, std::span<const EvalSample> forget);

struct EvalOptions {
  double k_percent = 20.0;
  Aggregation aggregation = Aggregation::kHarmonic;
  std::size_t max_new_tokens = 24;
};

struct SplitMetrics {
  double probability = 0.0;
  double rouge_l = 0.0;
  double truth_ratio = 0.0;          // mean raw ratio
  double truth_ratio_utility = 0.0;  // mean max(0, 1 - ratio)
};

SplitMetrics split_metrics(const lm::CausalLM& model, std::span<const EvalSample> samples,
                           const EvalOptions& options = {});

struct Utility {
  SplitMetrics retain;
  SplitMetrics general;
  double value = 0.0;
};
// Aggregate of {probability, ROUGE-L, truth-ratio utility} x {retain, general}.
// Throws ConfigError when either probe set is empty.
Utility model_utility(const lm::CausalLM& model, std::span<const EvalSample> retain,
                      std::span<const EvalSample> general, const EvalOptions& options = {});

double greedy_rouge(const lm::CausalLM& model, const EvalSample& sample, std::size_t max_new_tokens);
// Prompt with the question and the first half of the answer (at least one
// token); score the continuation against the rest.
double verbmem(const lm::CausalLM& model, std::span<const EvalSample> samples, std::size_t max_new_tokens = 24);
double knowmem(const lm::CausalLM& model, std::span<const EvalSample> samples, std::size_t max_new_tokens = 24);

// Min-K% score of the answer tokens given the prompt.
double min_k_score(const lm::CausalLM& model, const EvalSample& sample, double k_percent);
// Membership AUC with forget as the positive class.
double membership_auc(const lm::CausalLM& model, std::span<const EvalSample> forget,
                      std::span<const EvalSample> holdout, double k_percent);

// Mean NLL at GW positions: mean over GW tokens per sample, then over
// samples that have GW tokens; 0 when none do.
double gw_cross_entropy(const lm::CausalLM& model, std::span<const EvalSample> samples);

// Mean over every answer position of KL(P_model || P_reference) of the
// next-token distributions. Throws ContractViolation on a vocabulary
// mismatch.
double kl_reference_divergence(const lm::CausalLM& model, const lm::CausalLM& reference,
                               std::span<const EvalSample> samples);

// ---- reports ------------------------------------------------------------

struct EvalReport {
  std::string checkpoint;
  std::size_t epoch = 0;
  double forget_quality = 0.0;
  double model_utility = 0.0;
  SplitMetrics forget;
  SplitMetrics retain;
  SplitMetrics general;
  double auc = 0.0;
  double privleak = 0.0;
  double verbmem_f = 0.0;
  double knowmem_f = 0.0;
  double knowmem_r = 0.0;
  double gw_ce = 0.0;
  double kl_forget = 0.0;
  double kl_retain = 0.0;
};

// Everything the retained model contributes, computed once per run.
struct Baseline {
  std::vector<double> forget_ratios;
  double auc = 0.0;
};

struct EvalSets {
  std::vector<EvalSample> forget;
  std::vector<EvalSample> retain;  // utility probe
  std::vector<EvalSample> general;
  std::vector<EvalSample> holdout;
};

Baseline make_baseline(const lm::CausalLM& retained, const EvalSets& sets, const EvalOptions& options = {});

// `reference` may be null, in which case the KL fields are 0.
EvalReport evaluate(const lm::CausalLM& model, const lm::CausalLM* reference, const Baseline& baseline,
                    const EvalSets& sets, const EvalOptions& options = {});

std::string report_json(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

}  // namespace tiflab::eval
