// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Small pre-LN transformers over word tokens: a causal decoder (the model
// being unlearned) and a bidirectional masked LM (used by the identifier).
// Both keep every parameter in one flat ParamStore so weight-space edits are
// elementwise over a single vector.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tiflab/autodiff.hpp"
#include "tiflab/tokenizer.hpp"

namespace tiflab::lm {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_len = 64;

  // Throws ConfigError naming the bad field.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

class TransformerLM {
 public:
  TransformerLM(const ModelConfig& config, bool causal, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  bool causal() const noexcept { return causal_; }
  ad::ParamStore& params() noexcept { return params_; }
  const ad::ParamStore& params() const noexcept { return params_; }

  // Logits [T, V]. The mutable overload registers parameters as trainable
  // leaves; the const overload feeds them in as constants, so a frozen model
  // can share a graph with a trained one.
  ad::Var forward(ad::Graph& graph, std::span<const TokenId> tokens);
  ad::Var forward(ad::Graph& graph, std::span<const TokenId> tokens) const;

  // Several sequences in one pass with attention confined to each sequence.
  // Returns logits only at `rows`, indices into the concatenation of seqs.
  ad::Var forward_packed(ad::Graph& graph, std::span<const std::span<const TokenId>> seqs,
                         const std::vector<std::size_t>& rows);
  ad::Var forward_packed(ad::Graph& graph, std::span<const std::span<const TokenId>> seqs,
                         const std::vector<std::size_t>& rows) const;

  Tensor logits(std::span<const TokenId> tokens) const;

  // Zeroes the output projection; logits become identically zero.
  void zero_output_head();

 private:
  struct HeadParams {
    std::size_t wq, bq, wk, bk, wv, bv, wo;
  };
  struct LayerParams {
    std::size_t ln1_g, ln1_b;
    std::vector<HeadParams> heads;
    std::size_t bo;
    std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
  };

  template <typename Leaf>
  ad::Var forward_impl(ad::Graph& graph, std::span<const std::span<const TokenId>> seqs,
                       const std::vector<std::size_t>* rows, Leaf&& leaf) const;
  void initialize(std::uint64_t seed);

  ModelConfig config_;
  bool causal_;
  ad::ParamStore params_;
  std::size_t tok_emb_ = 0;
  std::size_t pos_emb_ = 0;
  std::vector<LayerParams> layers_;
  std::size_t lnf_g_ = 0;
  std::size_t lnf_b_ = 0;
  std::size_t head_ = 0;
};

// Decoder with a causal attention mask: row t of the logits depends only on
// tokens[0..t].
class CausalLM : public TransformerLM {
 public:
  CausalLM(const ModelConfig& config, std::uint64_t seed) : TransformerLM(config, true, seed) {}
};

// Encoder with full bidirectional attention.
class MaskedLM : public TransformerLM {
 public:
  MaskedLM(const ModelConfig& config, std::uint64_t seed) : TransformerLM(config, false, seed) {}
};

// Row i predicts target[i] given prompt and target[0..i). Shape [|target|, V].
ad::Var target_logits(ad::Graph& graph, CausalLM& model, std::span<const TokenId> prompt,
                      std::span<const TokenId> target);
ad::Var target_logits(ad::Graph& graph, const CausalLM& model, std::span<const TokenId> prompt,
                      std::span<const TokenId> target);

struct TargetRequest {
  std::span<const TokenId> prompt;
  std::span<const TokenId> target;
};
// Batched form: packed passes of kAttentionGroup requests, one
// [|target|, V] node per request.
std::vector<ad::Var> target_logits(ad::Graph& graph, CausalLM& model, std::span<const TargetRequest> requests);
std::vector<ad::Var> target_logits(ad::Graph& graph, const CausalLM& model,
                                   std::span<const TargetRequest> requests);

// log P(target[i] | prompt, target[0..i)) on the graph, shape {|target|}.
ad::Var token_logprobs(ad::Var target_logits, std::span<const TokenId> target);

// Per-token log-probabilities of `target` after `prompt`; sum is log P(y|x).
// Throws ContractViolation for an empty target or an empty prompt.
std::vector<double> sequence_logprob(const CausalLM& model, std::span<const TokenId> prompt,
                                     std::span<const TokenId> target);

// Batched form, evaluated kPackLimit requests per packed pass.
std::vector<std::vector<double>> sequence_logprobs(const CausalLM& model, std::span<const TargetRequest> requests);
inline constexpr std::size_t kPackLimit = 32;
// Sequences sharing one attention matrix. Masked-out cross-sequence scores
// still cost time, and on small models separate passes win.
inline constexpr std::size_t kAttentionGroup = 1;

// [BOS] question [SEP] answer [EOS], the masked LM's input layout.
std::vector<TokenId> masked_lm_input(std::span<const TokenId> question, std::span<const TokenId> answer);

// Argmax token at the single MASK in `answer_with_mask`; ties go to the lowest
// id. Throws ContractViolation unless exactly one MASK is present.
TokenId predict_masked(const MaskedLM& model, std::span<const TokenId> question,
                       std::span<const TokenId> answer_with_mask);
// The k highest-scoring tokens at the masked position, best first.
std::vector<TokenId> predict_masked_top_k(const MaskedLM& model, std::span<const TokenId> question,
                                          std::span<const TokenId> answer_with_mask, std::size_t k);

// Greedy argmax continuation of `prompt`; stops at EOS (not included), after
// max_new tokens, or at the model's maximum length.
std::vector<TokenId> generate_greedy(const CausalLM& model, std::span<const TokenId> prompt,
                                     std::size_t max_new);
// Same for many prompts at once; each continuation matches the single-prompt
// result up to floating-point summation order in the packed pass.
std::vector<std::vector<TokenId>> generate_greedy(const CausalLM& model,
                                                  std::span<const std::vector<TokenId>> prompts,
                                                  std::size_t max_new);

}  // namespace tiflab::lm
