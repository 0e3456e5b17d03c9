// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Unlearning objectives over a causal LM and its frozen reference copy.
//
// Every loss is assembled per sample from the trained model's target logits
// (a graph node) and reference quantities precomputed once per sample, then
// averaged over the batch:
//
//   total = forget_term + lambda * pl_term + gdr_weight * gdr_term
//
// where forget_term is GA, NPO, KTO or LPL depending on the kind. PL reads
// only GW positions of forget answers; LPL reads only the gold-token logits
// at UW positions.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiflab/autodiff.hpp"
#include "tiflab/corpus.hpp"
#include "tiflab/models.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::objectives {

enum class ObjectiveKind { kGA, kNPO, kKTO, kTPO, kLPL, kPL, kTaskVector, kCustom };

std::string_view to_string(ObjectiveKind kind);
// Accepts ga, npo, kto, tpo, lpl, pl, task_vector, custom. Throws ConfigError.
ObjectiveKind parse_objective_kind(std::string_view name);

// Which answer positions the sequence-level objectives (GA, NPO, KTO) read.
enum class Scope { kFull, kUnwantedOnly };
// Per-token mean or plain sum of log-probabilities for GA, NPO and KTO.
enum class SequenceNorm { kMean, kSum };

struct EncodedSample;
struct ReferenceStats;

// Per-sample forget term for ObjectiveKind::kCustom, given the trained
// model's target logits [|y|, V].
using CustomForgetTerm =
    std::function<ad::Var(ad::Graph&, ad::Var logits, const EncodedSample&, const ReferenceStats&)>;

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kTPO;
  double beta = 0.3;
  double lambda = 1.0;
  double gdr_weight = 0.0;
  std::string safe_answer = "I don't know";
  Scope scope = Scope::kFull;
  SequenceNorm norm = SequenceNorm::kMean;
  CustomForgetTerm custom;

  // Defaults per kind: beta 0.1 for NPO/KTO and 0.3 for TPO/LPL; lambda 1
  // for TPO and PL, 0 otherwise.
  static ObjectiveConfig defaults(ObjectiveKind kind);

  bool reads_masks() const noexcept;
  bool needs_reference() const noexcept;
  // Throws ConfigError with a pointer under /objective.
  void validate() const;
};

// Answer tokens (no EOS) aligned one-to-one with answer words.
struct EncodedSample {
  std::string id;
  std::vector<lm::TokenId> prompt;
  std::vector<lm::TokenId> target;
  std::vector<std::uint8_t> uw;

  std::size_t uw_count() const;
  std::size_t gw_count() const { return target.size() - uw_count(); }
};

EncodedSample encode_sample(const lm::Tokenizer& tokenizer, const corpus::AnnotatedSample& sample);
std::vector<EncodedSample> encode_samples(const lm::Tokenizer& tokenizer,
                                          std::span<const corpus::AnnotatedSample> samples);

// Reference-model quantities a loss needs for one sample. The reference is
// frozen, so these are computed once and reused every step.
struct ReferenceStats {
  std::vector<double> gold_logits;    // z_o at each target position
  std::vector<double> gold_logprobs;  // log P_o(y_i | x, y_<i)
  Tensor safe_logprobs;               // [|safe|, V] log P_o rows over the safe answer; empty if unused
};

ReferenceStats reference_stats(const lm::CausalLM& reference, const EncodedSample& sample,
                               std::span<const lm::TokenId> safe_answer = {});

// Per-sample terms on the logits level. `logits` is [|y|, V] from
// lm::target_logits.

// Mean or sum of log P(y_i) over `positions` (all positions when empty).
ad::Var sequence_logprob_term(ad::Var logits, std::span<const lm::TokenId> target,
                              std::span<const std::size_t> positions, SequenceNorm norm);
// Mean NLL of the gold tokens at `positions`. Throws ContractViolation when
// `positions` is empty.
ad::Var masked_nll(ad::Var logits, std::span<const lm::TokenId> target, std::span<const std::size_t> positions);
// -(2/beta) log sigmoid(-beta * log_ratio)
ad::Var npo_from_log_ratio(ad::Var log_ratio, double beta);
// -(2/beta) log sigmoid(kl_ref - beta * log_ratio), kl_ref = beta * kl
ad::Var kto_from_log_ratio(ad::Var log_ratio, ad::Var kl, double beta);
// Mean over rows of full-vocabulary KL(softmax(logits) || exp(ref_logprobs)).
ad::Var kl_to_reference(ad::Var logits, const Tensor& ref_logprobs);
// -(2/beta) log sigmoid(beta * mean_{i in uw}(z_ref_i - z_i)) on gold-token
// logits. Throws ContractViolation when `uw_positions` is empty.
ad::Var lpl_from_logits(ad::Var logits, std::span<const lm::TokenId> target,
                        std::span<const std::size_t> uw_positions, std::span<const double> ref_gold_logits,
                        double beta);

std::vector<std::size_t> uw_positions(const EncodedSample& sample);
std::vector<std::size_t> gw_positions(const EncodedSample& sample);

struct BatchLoss {
  ad::Var total;
  double forget_term = 0.0;
  double pl_term = 0.0;
  double gdr_term = 0.0;
  // KTO's KL to the reference on the safe answer, batch mean. Already inside
  // forget_term; reported for logging only.
  double kl_term = 0.0;
  // Samples dropped from the forget term (no UW tokens) and from PL (no GW).
  std::size_t skipped_no_uw = 0;
  std::size_t skipped_no_gw = 0;
};

// Builds the batch loss on `graph`. `references` is parallel to `forget`
// (may be empty when the objective needs no reference). Throws
// ContractViolation for an empty forget batch, ConfigError when GDR is on
// and `retain` is empty.
BatchLoss batch_loss(ad::Graph& graph, lm::CausalLM& model, std::span<const EncodedSample> forget,
                     std::span<const ReferenceStats> references, std::span<const EncodedSample> retain,
                     const ObjectiveConfig& config, std::span<const lm::TokenId> safe_answer = {});

// 2 * theta_0 - theta_reinforce elementwise. Throws ContractViolation on a
// size mismatch.
std::vector<double> task_vector_unlearn(std::span<const double> theta_0, std::span<const double> theta_reinforce);

}  // namespace tiflab::objectives
