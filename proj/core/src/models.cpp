// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tiflab/errors.hpp"

namespace tiflab::lm {

using ad::Graph;
using ad::Var;

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(Tokenizer::kNumSpecial)) {
    throw ConfigError("vocabulary must contain words beyond the special tokens", "/vocab_size");
  }
  if (d_model == 0) throw ConfigError("must be positive", "/d_model");
  if (n_layers == 0) throw ConfigError("must be positive", "/n_layers");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("must be positive and divide d_model", "/n_heads");
  }
  if (d_ff == 0) throw ConfigError("must be positive", "/d_ff");
  if (max_len < 2) throw ConfigError("must be at least 2", "/max_len");
}

TransformerLM::TransformerLM(const ModelConfig& config, bool causal, std::uint64_t seed)
    : config_(config), causal_(causal) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t dh = d / config_.n_heads;
  tok_emb_ = params_.add("tok_emb", {config_.vocab_size, d});
  pos_emb_ = params_.add("pos_emb", {config_.max_len, d});
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerParams layer;
    layer.ln1_g = params_.add(p + "ln1.gain", {d});
    layer.ln1_b = params_.add(p + "ln1.bias", {d});
    for (std::size_t h = 0; h < config_.n_heads; ++h) {
      const std::string hp = p + "head" + std::to_string(h) + ".";
      HeadParams head;
      head.wq = params_.add(hp + "wq", {d, dh});
      head.bq = params_.add(hp + "bq", {dh});
      head.wk = params_.add(hp + "wk", {d, dh});
      head.bk = params_.add(hp + "bk", {dh});
      head.wv = params_.add(hp + "wv", {d, dh});
      head.bv = params_.add(hp + "bv", {dh});
      head.wo = params_.add(hp + "wo", {dh, d});
      layer.heads.push_back(head);
    }
    layer.bo = params_.add(p + "attn.bias", {d});
    layer.ln2_g = params_.add(p + "ln2.gain", {d});
    layer.ln2_b = params_.add(p + "ln2.bias", {d});
    layer.w1 = params_.add(p + "ff.w1", {d, config_.d_ff});
    layer.b1 = params_.add(p + "ff.b1", {config_.d_ff});
    layer.w2 = params_.add(p + "ff.w2", {config_.d_ff, d});
    layer.b2 = params_.add(p + "ff.b2", {d});
    layers_.push_back(std::move(layer));
  }
  lnf_g_ = params_.add("lnf.gain", {d});
  lnf_b_ = params_.add("lnf.bias", {d});
  head_ = params_.add("head", {d, config_.vocab_size});
  initialize(seed);
}

void TransformerLM::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (std::size_t i = 0; i < params_.count(); ++i) {
    const auto& name = params_.spec(i).name;
    auto view = params_.view(i);
    const bool is_gain = name.ends_with(".gain");
    const bool is_bias = params_.spec(i).shape.size() == 1 && !is_gain;
    for (double& v : view) v = is_gain ? 1.0 : is_bias ? 0.0 : normal(rng);
  }
}

void TransformerLM::zero_output_head() {
  auto view = params_.view(head_);
  std::fill(view.begin(), view.end(), 0.0);
}

template <typename Leaf>
Var TransformerLM::forward_impl(Graph& g, std::span<const std::span<const TokenId>> seqs,
                                const std::vector<std::size_t>* rows, Leaf&& leaf) const {
  if (seqs.empty()) throw ContractViolation("forward: no sequences");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> lengths;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto tokens = seqs[s];
    if (tokens.empty()) throw ContractViolation("forward: empty token sequence");
    if (tokens.size() > config_.max_len) {
      throw LengthError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_len " +
                        std::to_string(config_.max_len));
    }
    lengths.push_back(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= config_.vocab_size) {
        throw ContractViolation("token id " + std::to_string(tokens[t]) + " outside vocabulary");
      }
      ids.push_back(static_cast<std::size_t>(tokens[t]));
      positions.push_back(t);
    }
  }
  Var x = ad::add(ad::gather_rows(leaf(tok_emb_), ids), ad::gather_rows(leaf(pos_emb_), positions));

  // Attention stays inside each sequence (block diagonal) and, for the
  // decoder, looks only backwards.
  Var mask;
  if (causal_ || seqs.size() > 1) {
    const std::size_t T = ids.size();
    Tensor m({T, T});
    std::size_t start = 0;
    for (std::size_t len : lengths) {
      for (std::size_t r = 0; r < T; ++r) {
        const bool mine = r >= start && r < start + len;
        for (std::size_t c = start; c < start + len; ++c) {
          if (!mine || (causal_ && c > r)) m.at(r, c) = -std::numeric_limits<double>::infinity();
        }
      }
      start += len;
    }
    mask = g.constant(std::move(m));
  }
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(config_.d_model / config_.n_heads));

  for (const LayerParams& layer : layers_) {
    Var h = ad::add(ad::mul(ad::layer_norm(x), leaf(layer.ln1_g)), leaf(layer.ln1_b));
    Var attn;
    for (const HeadParams& head : layer.heads) {
      Var q = ad::add(ad::matmul(h, leaf(head.wq)), leaf(head.bq));
      Var k = ad::add(ad::matmul(h, leaf(head.wk)), leaf(head.bk));
      Var v = ad::add(ad::matmul(h, leaf(head.wv)), leaf(head.bv));
      Var scores = ad::scale(ad::matmul_nt(q, k), inv_sqrt_dh);
      if (mask.valid()) scores = ad::add(scores, mask);
      Var out = ad::matmul(ad::matmul(ad::softmax(scores), v), leaf(head.wo));
      attn = attn.valid() ? ad::add(attn, out) : out;
    }
    x = ad::add(x, ad::add(attn, leaf(layer.bo)));
    Var h2 = ad::add(ad::mul(ad::layer_norm(x), leaf(layer.ln2_g)), leaf(layer.ln2_b));
    Var ff = ad::gelu(ad::add(ad::matmul(h2, leaf(layer.w1)), leaf(layer.b1)));
    x = ad::add(x, ad::add(ad::matmul(ff, leaf(layer.w2)), leaf(layer.b2)));
  }
  if (rows != nullptr) x = ad::gather_rows(x, *rows);
  Var out = ad::add(ad::mul(ad::layer_norm(x), leaf(lnf_g_)), leaf(lnf_b_));
  return ad::matmul(out, leaf(head_));
}

Var TransformerLM::forward(Graph& g, std::span<const TokenId> tokens) {
  const std::span<const TokenId> one[] = {tokens};
  return forward_impl(g, one, nullptr, [&](std::size_t i) { return g.param(params_, i); });
}

Var TransformerLM::forward(Graph& g, std::span<const TokenId> tokens) const {
  const std::span<const TokenId> one[] = {tokens};
  return forward_impl(g, one, nullptr, [&](std::size_t i) { return g.param_constant(params_, i); });
}

Var TransformerLM::forward_packed(Graph& g, std::span<const std::span<const TokenId>> seqs,
                                  const std::vector<std::size_t>& rows) {
  return forward_impl(g, seqs, &rows, [&](std::size_t i) { return g.param(params_, i); });
}

Var TransformerLM::forward_packed(Graph& g, std::span<const std::span<const TokenId>> seqs,
                                  const std::vector<std::size_t>& rows) const {
  return forward_impl(g, seqs, &rows, [&](std::size_t i) { return g.param_constant(params_, i); });
}

Tensor TransformerLM::logits(std::span<const TokenId> tokens) const {
  Graph g(false);
  return forward(g, tokens).value();
}

namespace {

template <typename Model>
std::vector<Var> target_logits_group(Graph& g, Model& model, std::span<const TargetRequest> requests) {
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::size_t> rows;
  std::size_t offset = 0;
  for (const auto& r : requests) {
    if (r.prompt.empty()) throw ContractViolation("target_logits: empty prompt");
    if (r.target.empty()) throw ContractViolation("target_logits: empty target");
    std::vector<TokenId> input(r.prompt.begin(), r.prompt.end());
    input.insert(input.end(), r.target.begin(), r.target.end() - 1);
    for (std::size_t i = 0; i < r.target.size(); ++i) rows.push_back(offset + r.prompt.size() - 1 + i);
    offset += input.size();
    inputs.push_back(std::move(input));
  }
  const std::vector<std::span<const TokenId>> seqs(inputs.begin(), inputs.end());
  const Var all = model.forward_packed(g, seqs, rows);
  if (requests.size() == 1) return {all};
  std::vector<Var> out;
  std::size_t start = 0;
  for (const auto& r : requests) {
    std::vector<std::size_t> mine(r.target.size());
    std::iota(mine.begin(), mine.end(), start);
    start += r.target.size();
    out.push_back(ad::gather_rows(all, mine));
  }
  return out;
}

template <typename Model>
std::vector<Var> target_logits_impl(Graph& g, Model& model, std::span<const TargetRequest> requests) {
  std::vector<Var> out;
  out.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); i += kAttentionGroup) {
    const auto part = target_logits_group(g, model, requests.subspan(i, std::min(kAttentionGroup, requests.size() - i)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

TokenId argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<TokenId>(best);
}

std::size_t single_mask_position(std::span<const TokenId> answer) {
  const auto count = std::count(answer.begin(), answer.end(), Tokenizer::kMask);
  if (count != 1) {
    throw ContractViolation("predict_masked: expected exactly one MASK, found " + std::to_string(count));
  }
  return static_cast<std::size_t>(std::find(answer.begin(), answer.end(), Tokenizer::kMask) - answer.begin());
}

}  // namespace

Var target_logits(Graph& g, CausalLM& model, std::span<const TokenId> prompt,
                  std::span<const TokenId> target) {
  const TargetRequest one[] = {{prompt, target}};
  return target_logits_impl(g, model, std::span<const TargetRequest>(one)).front();
}

Var target_logits(Graph& g, const CausalLM& model, std::span<const TokenId> prompt,
                  std::span<const TokenId> target) {
  const TargetRequest one[] = {{prompt, target}};
  return target_logits_impl(g, model, std::span<const TargetRequest>(one)).front();
}

std::vector<Var> target_logits(Graph& g, CausalLM& model, std::span<const TargetRequest> requests) {
  return target_logits_impl(g, model, requests);
}

std::vector<Var> target_logits(Graph& g, const CausalLM& model, std::span<const TargetRequest> requests) {
  return target_logits_impl(g, model, requests);
}

Var token_logprobs(Var logits, std::span<const TokenId> target) {
  std::vector<std::size_t> rows(target.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<std::size_t> cols(target.begin(), target.end());
  return ad::select(ad::log_softmax(logits), rows, cols);
}

std::vector<double> sequence_logprob(const CausalLM& model, std::span<const TokenId> prompt,
                                     std::span<const TokenId> target) {
  const TargetRequest one[] = {{prompt, target}};
  return sequence_logprobs(model, one).front();
}

std::vector<std::vector<double>> sequence_logprobs(const CausalLM& model, std::span<const TargetRequest> requests) {
  std::vector<std::vector<double>> out;
  out.reserve(requests.size());
  for (std::size_t start = 0; start < requests.size(); start += kPackLimit) {
    const auto chunk = requests.subspan(start, std::min(kPackLimit, requests.size() - start));
    for (const auto& r : chunk) {
      if (r.target.empty()) throw ContractViolation("sequence_logprob: empty target");
    }
    Graph g(false);
    const auto logits = target_logits(g, model, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto data = token_logprobs(logits[i], chunk[i].target).value().data();
      out.emplace_back(data.begin(), data.end());
    }
  }
  return out;
}

std::vector<TokenId> masked_lm_input(std::span<const TokenId> question, std::span<const TokenId> answer) {
  std::vector<TokenId> input{Tokenizer::kBos};
  input.insert(input.end(), question.begin(), question.end());
  input.push_back(Tokenizer::kSep);
  input.insert(input.end(), answer.begin(), answer.end());
  input.push_back(Tokenizer::kEos);
  return input;
}

std::vector<TokenId> predict_masked_top_k(const MaskedLM& model, std::span<const TokenId> question,
                                          std::span<const TokenId> answer_with_mask, std::size_t k) {
  const std::size_t pos = single_mask_position(answer_with_mask);
  const Tensor logits = model.logits(masked_lm_input(question, answer_with_mask));
  const auto row = logits.row(question.size() + 2 + pos);
  std::vector<TokenId> order(row.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](TokenId a, TokenId b) {
                      const double la = row[static_cast<std::size_t>(a)];
                      const double lb = row[static_cast<std::size_t>(b)];
                      return la != lb ? la > lb : a < b;
                    });
  order.resize(k);
  return order;
}

TokenId predict_masked(const MaskedLM& model, std::span<const TokenId> question,
                       std::span<const TokenId> answer_with_mask) {
  const std::size_t pos = single_mask_position(answer_with_mask);
  const Tensor logits = model.logits(masked_lm_input(question, answer_with_mask));
  return argmax_lowest(logits.row(question.size() + 2 + pos));
}

std::vector<TokenId> generate_greedy(const CausalLM& model, std::span<const TokenId> prompt,
                                     std::size_t max_new) {
  const std::vector<TokenId> one[] = {{prompt.begin(), prompt.end()}};
  return generate_greedy(model, one, max_new).front();
}

std::vector<std::vector<TokenId>> generate_greedy(const CausalLM& model,
                                                  std::span<const std::vector<TokenId>> prompts,
                                                  std::size_t max_new) {
  std::vector<std::vector<TokenId>> seqs(prompts.begin(), prompts.end());
  std::vector<std::vector<TokenId>> generated(prompts.size());
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].empty()) throw ContractViolation("generate_greedy: empty prompt");
    if (max_new > 0 && seqs[i].size() < model.config().max_len) active.push_back(i);
  }
  while (!active.empty()) {
    std::vector<std::size_t> still;
    for (std::size_t start = 0; start < active.size(); start += kAttentionGroup) {
      const std::size_t end = std::min(active.size(), start + kAttentionGroup);
      std::vector<std::span<const TokenId>> packed;
      std::vector<std::size_t> rows;
      std::size_t offset = 0;
      for (std::size_t j = start; j < end; ++j) {
        const auto& seq = seqs[active[j]];
        packed.emplace_back(seq);
        offset += seq.size();
        rows.push_back(offset - 1);
      }
      Graph g(false);
      const Tensor logits = model.forward_packed(g, packed, rows).value();
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = active[j];
        const TokenId next = argmax_lowest(logits.row(j - start));
        if (next == Tokenizer::kEos) continue;
        generated[i].push_back(next);
        seqs[i].push_back(next);
        if (generated[i].size() < max_new && seqs[i].size() < model.config().max_len) still.push_back(i);
      }
    }
    active = std::move(still);
  }
  return generated;
}

}  // namespace tiflab::lm
