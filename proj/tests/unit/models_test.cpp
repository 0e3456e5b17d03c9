// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>
#include <random>
#include <vector>

#include "tiflab/autodiff.hpp"
#include "tiflab/checkpoint.hpp"
#include "tiflab/errors.hpp"
#include "tiflab/models.hpp"

namespace tiflab::lm {
namespace {

ModelConfig tiny(std::size_t vocab = 20) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 16;
  return c;
}

TEST(Models, ConfigValidation) {
  ModelConfig c = tiny();
  EXPECT_NO_THROW(c.validate());
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.vocab_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Models, SameSeedSameWeights) {
  CausalLM a(tiny(), 3), b(tiny(), 3), c(tiny(), 4);
  EXPECT_TRUE(std::equal(a.params().values().begin(), a.params().values().end(), b.params().values().begin()));
  EXPECT_FALSE(std::equal(a.params().values().begin(), a.params().values().end(), c.params().values().begin()));
}

TEST(Models, CausalRowsIgnoreFutureTokens) {
  CausalLM m(tiny(), 1);
  const std::vector<TokenId> x = {1, 7, 8, 9, 10};
  std::vector<TokenId> y = x;
  y[3] = 15;
  const Tensor lx = m.logits(x), ly = m.logits(y);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < lx.cols(); ++c) EXPECT_EQ(lx.at(r, c), ly.at(r, c));
  }
  double diff = 0.0;
  for (std::size_t c = 0; c < lx.cols(); ++c) diff += std::abs(lx.at(3, c) - ly.at(3, c));
  EXPECT_GT(diff, 0.0);
}

TEST(Models, MaskedLmSeesBothDirections) {
  MaskedLM m(tiny(), 1);
  const std::vector<TokenId> x = {1, 7, 8, 9, 10};
  std::vector<TokenId> y = x;
  y[4] = 15;
  const Tensor lx = m.logits(x), ly = m.logits(y);
  double diff = 0.0;
  for (std::size_t c = 0; c < lx.cols(); ++c) diff += std::abs(lx.at(0, c) - ly.at(0, c));
  EXPECT_GT(diff, 0.0);
}

TEST(Models, PackedPassMatchesSeparatePasses) {
  CausalLM m(tiny(), 2);
  const std::vector<TokenId> a = {1, 6, 7, 8}, b = {1, 9, 10};
  const std::span<const TokenId> seqs[] = {a, b};
  const std::vector<std::size_t> rows = {0, 3, 4, 6};
  ad::Graph g(false);
  const Tensor packed = std::as_const(m).forward_packed(g, seqs, rows).value();
  const Tensor la = m.logits(a), lb = m.logits(b);
  const std::pair<const Tensor*, std::size_t> want[] = {{&la, 0}, {&la, 3}, {&lb, 0}, {&lb, 2}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < packed.cols(); ++c) {
      EXPECT_NEAR(packed.at(r, c), want[r].first->at(want[r].second, c), 1e-12);
    }
  }
}

TEST(Models, TooLongThrows) {
  CausalLM m(tiny(), 1);
  std::vector<TokenId> x(17, 6);
  EXPECT_THROW(m.logits(x), LengthError);
}

TEST(Models, ZeroHeadGivesZeroLogits) {
  CausalLM m(tiny(), 1);
  m.zero_output_head();
  const Tensor z = m.logits(std::vector<TokenId>{1, 6, 7});
  for (double v : z.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Models, FullModelGradientMatchesFiniteDifferences) {
  CausalLM m(tiny(12), 9);
  const std::vector<TokenId> prompt = {1, 6, 7, 5}, target = {8, 9, 2};
  const auto report = ad::finite_difference_check(
      [&](ad::Graph& g, ad::ParamStore&) {
        return ad::scale(ad::mean(token_logprobs(target_logits(g, m, prompt, target), target)), -1.0);
      },
      m.params(), 1e-6, 400, 17);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(Models, MaskedModelGradientMatchesFiniteDifferences) {
  MaskedLM m(tiny(12), 4);
  const std::vector<TokenId> x = {1, 6, 3, 7, 5, 8};
  const std::span<const TokenId> one[] = {x};
  const std::vector<std::size_t> rows = {2};
  const std::vector<std::size_t> r0 = {0}, c0 = {9};
  const auto report = ad::finite_difference_check(
      [&](ad::Graph& g, ad::ParamStore&) {
        return ad::sum(ad::select(ad::log_softmax(m.forward_packed(g, one, rows)), r0, c0));
      },
      m.params(), 1e-6, 400, 3);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(Models, SequenceLogprobMatchesSoftmaxOfLogits) {
  CausalLM m(tiny(), 5);
  const std::vector<TokenId> prompt = {1, 6, 5}, target = {7, 8};
  const auto lp = sequence_logprob(m, prompt, target);
  std::vector<TokenId> full = prompt;
  full.insert(full.end(), target.begin(), target.end());
  const Tensor logits = m.logits(full);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto row = logits.row(prompt.size() - 1 + i);
    double z = 0.0;
    for (double v : row) z += std::exp(v);
    EXPECT_NEAR(lp[i], row[static_cast<std::size_t>(target[i])] - std::log(z), 1e-12);
  }
  const TargetRequest reqs[] = {{prompt, target}, {prompt, target}};
  const auto batch = sequence_logprobs(m, reqs);
  for (std::size_t i = 0; i < target.size(); ++i) EXPECT_NEAR(batch[1][i], lp[i], 1e-12);
}

TEST(Models, GreedyBatchMatchesSingle) {
  CausalLM m(tiny(), 8);
  const std::vector<std::vector<TokenId>> prompts = {{1, 6, 5}, {1, 9, 10, 5}, {1, 5}};
  const auto batch = generate_greedy(m, prompts, 6);
  for (std::size_t i = 0; i < prompts.size(); ++i) EXPECT_EQ(batch[i], generate_greedy(m, prompts[i], 6));
}

TEST(Models, PredictMaskedNeedsOneMask) {
  MaskedLM m(tiny(), 1);
  const std::vector<TokenId> q = {6, 7};
  EXPECT_THROW(predict_masked(m, q, std::vector<TokenId>{8, 9}), ContractViolation);
  const TokenId t = predict_masked(m, q, std::vector<TokenId>{8, Tokenizer::kMask});
  EXPECT_EQ(predict_masked_top_k(m, q, std::vector<TokenId>{8, Tokenizer::kMask}, 3).front(), t);
}

TEST(Checkpoint, RoundTripsModelAndState) {
  const Tokenizer tok(std::vector<std::string>{"a", "b", "c"});
  CausalLM m(tiny(tok.vocab_size()), 6);
  engine::Checkpoint state = checkpoint::snapshot(m);
  state.epoch = 4;
  state.adam.m.assign(state.params.size(), 0.25);
  state.adam.v.assign(state.params.size(), 0.5);
  state.adam.step = 9;
  state.rng_state = "123 456";
  state.initial_loss = 1.5;
  const auto path = std::filesystem::temp_directory_path() / "tiflab_ckpt_roundtrip.ckpt";
  checkpoint::save(path, state, m.config(), tok);
  const auto loaded = checkpoint::load(path);
  EXPECT_EQ(loaded.state, state);
  EXPECT_EQ(loaded.model, m.config());
  EXPECT_EQ(loaded.tokenizer, tok);
  const CausalLM back = checkpoint::restore_causal(loaded);
  EXPECT_EQ(back.logits(std::vector<TokenId>{1, 6}), m.logits(std::vector<TokenId>{1, 6}));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "tiflab_ckpt_garbage.ckpt";
  { std::ofstream(path) << "not a checkpoint"; }
  EXPECT_THROW(checkpoint::load(path), SchemaError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace tiflab::lm
