// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tiflab/errors.hpp"

namespace tiflab::objectives {

using ad::Graph;
using ad::Var;
using lm::TokenId;

namespace {

constexpr std::pair<ObjectiveKind, std::string_view> kNames[] = {
    {ObjectiveKind::kGA, "ga"},   {ObjectiveKind::kNPO, "npo"}, {ObjectiveKind::kKTO, "kto"},
    {ObjectiveKind::kTPO, "tpo"}, {ObjectiveKind::kLPL, "lpl"}, {ObjectiveKind::kPL, "pl"},
    {ObjectiveKind::kTaskVector, "task_vector"},                {ObjectiveKind::kCustom, "custom"},
};

bool is_preference(ObjectiveKind kind) {
  return kind == ObjectiveKind::kNPO || kind == ObjectiveKind::kKTO || kind == ObjectiveKind::kTPO ||
         kind == ObjectiveKind::kLPL;
}

Var constant_scalar(Graph& g, double v) { return g.constant(Tensor::scalar(v)); }

std::vector<std::size_t> all_positions(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

std::vector<std::size_t> gold_columns(std::span<const TokenId> target, std::span<const std::size_t> positions) {
  std::vector<std::size_t> cols;
  cols.reserve(positions.size());
  for (std::size_t p : positions) cols.push_back(static_cast<std::size_t>(target[p]));
  return cols;
}

double reference_sequence_term(const ReferenceStats& ref, std::span<const std::size_t> positions,
                               SequenceNorm norm) {
  double total = 0.0;
  for (std::size_t p : positions) total += ref.gold_logprobs.at(p);
  return norm == SequenceNorm::kMean ? total / static_cast<double>(positions.size()) : total;
}

Var batch_mean(Graph& g, const std::vector<Var>& terms) {
  if (terms.empty()) return constant_scalar(g, 0.0);
  return ad::scale(ad::add_n(g, terms), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "custom";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown objective '" + std::string(name) + "'", "/objective/kind");
}

ObjectiveConfig ObjectiveConfig::defaults(ObjectiveKind kind) {
  ObjectiveConfig c;
  c.kind = kind;
  c.beta = (kind == ObjectiveKind::kTPO || kind == ObjectiveKind::kLPL) ? 0.3 : 0.1;
  c.lambda = (kind == ObjectiveKind::kTPO || kind == ObjectiveKind::kPL) ? 1.0 : 0.0;
  return c;
}

bool ObjectiveConfig::reads_masks() const noexcept {
  return kind == ObjectiveKind::kTPO || kind == ObjectiveKind::kLPL || kind == ObjectiveKind::kPL ||
         lambda > 0.0 || scope == Scope::kUnwantedOnly;
}

bool ObjectiveConfig::needs_reference() const noexcept {
  return is_preference(kind) || kind == ObjectiveKind::kCustom;
}

void ObjectiveConfig::validate() const {
  if (is_preference(kind) && !(std::isfinite(beta) && beta > 0.0)) {
    throw ConfigError("beta must be finite and > 0", "/objective/beta");
  }
  if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ConfigError("must be finite and >= 0", "/objective/lambda");
  if (!(std::isfinite(gdr_weight) && gdr_weight >= 0.0)) {
    throw ConfigError("must be finite and >= 0", "/objective/gdr_weight");
  }
  if (kind == ObjectiveKind::kKTO && lm::split_words(safe_answer).empty()) {
    throw ConfigError("KTO needs a non-empty safe answer", "/objective/safe_answer");
  }
  if (kind == ObjectiveKind::kCustom && !custom) {
    throw ConfigError("custom objective has no forget term registered", "/objective/kind");
  }
}

std::size_t EncodedSample::uw_count() const {
  return static_cast<std::size_t>(std::count_if(uw.begin(), uw.end(), [](auto v) { return v != 0; }));
}

EncodedSample encode_sample(const lm::Tokenizer& tokenizer, const corpus::AnnotatedSample& sample) {
  EncodedSample out;
  out.id = sample.base.id;
  out.prompt = lm::encode_prompt(tokenizer, sample.base.question);
  out.target = tokenizer.encode(sample.base.answer);
  out.uw = sample.uw_mask;
  if (out.uw.size() != out.target.size()) {
    throw SchemaError(sample.base.id + ": uw_mask length " + std::to_string(out.uw.size()) +
                      " differs from answer length " + std::to_string(out.target.size()));
  }
  return out;
}

std::vector<EncodedSample> encode_samples(const lm::Tokenizer& tokenizer,
                                          std::span<const corpus::AnnotatedSample> samples) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(tokenizer, s));
  return out;
}

ReferenceStats reference_stats(const lm::CausalLM& reference, const EncodedSample& sample,
                               std::span<const TokenId> safe_answer) {
  ReferenceStats stats;
  Graph g(false);
  const Var logits = lm::target_logits(g, reference, sample.prompt, sample.target);
  const Var logprobs = ad::log_softmax(logits);
  for (std::size_t i = 0; i < sample.target.size(); ++i) {
    const auto col = static_cast<std::size_t>(sample.target[i]);
    stats.gold_logits.push_back(logits.value().at(i, col));
    stats.gold_logprobs.push_back(logprobs.value().at(i, col));
  }
  if (!safe_answer.empty()) {
    stats.safe_logprobs = ad::log_softmax(lm::target_logits(g, reference, sample.prompt, safe_answer)).value();
  }
  return stats;
}

std::vector<std::size_t> uw_positions(const EncodedSample& sample) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.uw.size(); ++i) {
    if (sample.uw[i] != 0) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> gw_positions(const EncodedSample& sample) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.uw.size(); ++i) {
    if (sample.uw[i] == 0) out.push_back(i);
  }
  return out;
}

Var sequence_logprob_term(Var logits, std::span<const TokenId> target, std::span<const std::size_t> positions,
                          SequenceNorm norm) {
  const auto rows = positions.empty() ? all_positions(target.size())
                                      : std::vector<std::size_t>(positions.begin(), positions.end());
  const Var lp = ad::select(ad::log_softmax(logits), rows, gold_columns(target, rows));
  return norm == SequenceNorm::kMean ? ad::mean(lp) : ad::sum(lp);
}

Var masked_nll(Var logits, std::span<const TokenId> target, std::span<const std::size_t> positions) {
  if (positions.empty()) throw ContractViolation("masked_nll: no positions selected");
  return ad::scale(sequence_logprob_term(logits, target, positions, SequenceNorm::kMean), -1.0);
}

Var npo_from_log_ratio(Var log_ratio, double beta) {
  return ad::scale(ad::log_sigmoid(ad::scale(log_ratio, -beta)), -2.0 / beta);
}

Var kto_from_log_ratio(Var log_ratio, Var kl, double beta) {
  return ad::scale(ad::log_sigmoid(ad::sub(ad::scale(kl, beta), ad::scale(log_ratio, beta))), -2.0 / beta);
}

Var kl_to_reference(Var logits, const Tensor& ref_logprobs) {
  if (logits.shape() != ref_logprobs.shape()) {
    throw ShapeError("kl_to_reference: logits " + shape_string(logits.shape()) + " vs reference " +
                     shape_string(ref_logprobs.shape()));
  }
  Graph& g = logits.graph();
  const Var p = ad::softmax(logits);
  const Var diff = ad::sub(ad::log_softmax(logits), g.constant(ref_logprobs));
  return ad::scale(ad::sum(ad::mul(p, diff)), 1.0 / static_cast<double>(logits.value().rows()));
}

Var lpl_from_logits(Var logits, std::span<const TokenId> target, std::span<const std::size_t> uw_positions,
                    std::span<const double> ref_gold_logits, double beta) {
  if (uw_positions.empty()) throw ContractViolation("lpl: sample has no UW tokens");
  Graph& g = logits.graph();
  Tensor ref({uw_positions.size()});
  for (std::size_t i = 0; i < uw_positions.size(); ++i) ref[i] = ref_gold_logits[uw_positions[i]];
  const Var z = ad::select(logits, uw_positions, gold_columns(target, uw_positions));
  const Var gap = ad::mean(ad::sub(g.constant(std::move(ref)), z));
  return ad::scale(ad::log_sigmoid(ad::scale(gap, beta)), -2.0 / beta);
}

BatchLoss batch_loss(Graph& g, lm::CausalLM& model, std::span<const EncodedSample> forget,
                     std::span<const ReferenceStats> references, std::span<const EncodedSample> retain,
                     const ObjectiveConfig& config, std::span<const TokenId> safe_answer) {
  if (forget.empty()) throw ContractViolation("batch_loss: empty forget batch");
  if (config.kind == ObjectiveKind::kTaskVector) {
    throw ContractViolation("batch_loss: task vector is a weight edit, not a loss");
  }
  if (config.gdr_weight > 0.0 && retain.empty()) {
    throw ConfigError("gdr_weight > 0 needs a non-empty retain set", "/objective/gdr_weight");
  }
  if (config.needs_reference() && references.size() != forget.size()) {
    throw ContractViolation("batch_loss: need one reference entry per forget sample");
  }
  if (config.kind == ObjectiveKind::kKTO && safe_answer.empty()) {
    throw ContractViolation("batch_loss: KTO needs the encoded safe answer");
  }

  BatchLoss out;
  std::vector<Var> forget_terms;
  std::vector<Var> pl_terms;
  std::vector<Var> kl_terms;
  std::vector<lm::TargetRequest> requests;
  for (const auto& s : forget) requests.push_back({s.prompt, s.target});
  if (config.kind == ObjectiveKind::kKTO) {
    for (const auto& s : forget) requests.push_back({s.prompt, safe_answer});
  }
  const std::size_t n_forget = forget.size();
  if (config.gdr_weight > 0.0) {
    for (const auto& r : retain) requests.push_back({r.prompt, r.target});
  }
  const auto all_logits = lm::target_logits(g, model, requests);
  for (std::size_t i = 0; i < forget.size(); ++i) {
    const EncodedSample& s = forget[i];
    const Var& logits = all_logits[i];
    const auto uw = uw_positions(s);
    const auto gw = gw_positions(s);
    const bool scoped = config.scope == Scope::kUnwantedOnly;
    const std::vector<std::size_t> seq_pos = scoped ? uw : all_positions(s.target.size());

    switch (config.kind) {
      case ObjectiveKind::kGA:
      case ObjectiveKind::kNPO:
      case ObjectiveKind::kKTO: {
        if (seq_pos.empty()) {
          ++out.skipped_no_uw;
          break;
        }
        const Var lp = sequence_logprob_term(logits, s.target, seq_pos, config.norm);
        if (config.kind == ObjectiveKind::kGA) {
          forget_terms.push_back(lp);
          break;
        }
        const Var ratio = ad::add_scalar(lp, -reference_sequence_term(references[i], seq_pos, config.norm));
        if (config.kind == ObjectiveKind::kNPO) {
          forget_terms.push_back(npo_from_log_ratio(ratio, config.beta));
          break;
        }
        const Var& safe_logits = all_logits[n_forget + i];
        const Var kl = kl_to_reference(safe_logits, references[i].safe_logprobs);
        kl_terms.push_back(kl);
        forget_terms.push_back(kto_from_log_ratio(ratio, kl, config.beta));
        break;
      }
      case ObjectiveKind::kTPO:
      case ObjectiveKind::kLPL:
        if (uw.empty()) {
          ++out.skipped_no_uw;
          break;
        }
        forget_terms.push_back(lpl_from_logits(logits, s.target, uw, references[i].gold_logits, config.beta));
        break;
      case ObjectiveKind::kCustom:
        forget_terms.push_back(config.custom(g, logits, s, references[i]));
        break;
      case ObjectiveKind::kPL:
      case ObjectiveKind::kTaskVector:
        break;
    }

    if (gw.empty()) {
      ++out.skipped_no_gw;
    } else {
      pl_terms.push_back(masked_nll(logits, s.target, gw));
    }
  }

  const Var forget_term = batch_mean(g, forget_terms);
  const Var pl_term = batch_mean(g, pl_terms);
  std::vector<Var> gdr_terms;
  if (config.gdr_weight > 0.0) {
    const std::size_t first = config.kind == ObjectiveKind::kKTO ? 2 * n_forget : n_forget;
    for (std::size_t j = 0; j < retain.size(); ++j) {
      const auto& r = retain[j];
      gdr_terms.push_back(masked_nll(all_logits[first + j], r.target, all_positions(r.target.size())));
    }
  }
  const Var gdr_term = batch_mean(g, gdr_terms);

  const std::vector<Var> parts = {forget_term, ad::scale(pl_term, config.lambda),
                                  ad::scale(gdr_term, config.gdr_weight)};
  out.total = ad::add_n(g, parts);
  out.forget_term = forget_term.value().item();
  out.pl_term = pl_term.value().item();
  out.gdr_term = gdr_term.value().item();
  if (!kl_terms.empty()) out.kl_term = batch_mean(g, kl_terms).value().item();
  return out;
}

std::vector<double> task_vector_unlearn(std::span<const double> theta_0, std::span<const double> theta_reinforce) {
  if (theta_0.size() != theta_reinforce.size()) {
    throw ContractViolation("task_vector_unlearn: parameter counts differ (" + std::to_string(theta_0.size()) +
                            " vs " + std::to_string(theta_reinforce.size()) + ")");
  }
  std::vector<double> out(theta_0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * theta_0[i] - theta_reinforce[i];
  return out;
}

}  // namespace tiflab::objectives
