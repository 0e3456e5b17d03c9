// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "tiflab/errors.hpp"
#include "tiflab/identifier.hpp"

namespace tiflab::identifier {
namespace {

corpus::QASample sample(std::string id, std::string answer) {
  corpus::QASample s;
  s.id = std::move(id);
  s.question = "who is she";
  s.answer = std::move(answer);
  return s;
}

TEST(Stopword, KeepsOnlyListedWords) {
  const std::set<std::string> stop = {"the", "of", "was"};
  const auto r = identify_stopword(sample("x", "the father of ann was a baker"), stop);
  EXPECT_EQ(r.uw_mask, (std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1, 1}));
  EXPECT_THROW(identify_stopword(sample("x", "a"), {}), ContractViolation);
  EXPECT_TRUE(default_stoplist().count("the"));
}

TEST(Accuracy, CountsAgainstOracle) {
  const std::vector<std::uint8_t> pred = {1, 1, 0, 0, 1}, gold = {1, 0, 1, 0, 1};
  const auto a = identifier_accuracy(pred, gold);
  EXPECT_EQ(a.true_positive, 2u);
  EXPECT_EQ(a.false_positive, 1u);
  EXPECT_EQ(a.false_negative, 1u);
  EXPECT_DOUBLE_EQ(a.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.f1, 2.0 / 3.0);
  const std::vector<std::uint8_t> none = {0, 0};
  EXPECT_TRUE(identifier_accuracy(none, none).degenerate);
  EXPECT_THROW(identifier_accuracy(pred, none), ContractViolation);
}

TEST(Jaccard, MatchesSetDefinition) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<IdentificationResult> a(3), b(3);
    UwSet sa, sb;
    for (int i = 0; i < 3; ++i) {
      a[i].sample_id = b[i].sample_id = "s" + std::to_string(i);
      for (int j = 0; j < 6; ++j) {
        a[i].uw_mask.push_back(rng() % 2);
        b[i].uw_mask.push_back(rng() % 2);
        if (a[i].uw_mask.back()) sa.insert({a[i].sample_id, j});
        if (b[i].uw_mask.back()) sb.insert({b[i].sample_id, j});
      }
    }
    std::vector<std::pair<std::string, std::size_t>> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
    const double want = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    EXPECT_DOUBLE_EQ(jaccard(uw_set(a), uw_set(b)), want);
    const std::vector<std::vector<IdentificationResult>> runs = {a, b, a};
    const auto pairs = jaccard_consistency(runs);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_DOUBLE_EQ(pairs[0], want);
    EXPECT_DOUBLE_EQ(pairs[1], 1.0);
  }
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
  const std::vector<std::vector<IdentificationResult>> one(1);
  EXPECT_THROW(jaccard_consistency(one), ContractViolation);
}

TEST(Discriminative, GwExactlyWhenEncoderRecoversWord) {
  const std::vector<std::string> words = {"who", "is", "she", "ann", "bakes", "bread", "daily"};
  const lm::Tokenizer tok(words);
  lm::ModelConfig c;
  c.vocab_size = tok.vocab_size();
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 24;
  const lm::MaskedLM model(c, 3);
  const auto s = sample("x", "ann bakes bread daily zebra");
  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    const auto r = identify_discriminative(model, tok, s, k);
    ASSERT_EQ(r.uw_mask.size(), 5u);
    EXPECT_EQ(r.oov_positions, std::vector<std::size_t>{4});
    EXPECT_EQ(r.uw_mask[4], 1);
    const auto q = tok.encode(s.question);
    const auto answer = tok.encode(s.answer);
    for (std::size_t i = 0; i < 4; ++i) {
      auto masked = answer;
      masked[i] = lm::Tokenizer::kMask;
      const auto top = lm::predict_masked_top_k(model, q, masked, k);
      const bool recovered = std::find(top.begin(), top.end(), answer[i]) != top.end();
      EXPECT_EQ(r.uw_mask[i], recovered ? 0 : 1) << "k=" << k << " i=" << i;
    }
  }
  EXPECT_THROW(identify_discriminative(model, tok, s, 0), ContractViolation);
}

TEST(Apply, SwapsMasksById) {
  corpus::AnnotatedSample a;
  a.base = sample("x", "ann bakes");
  a.uw_mask = {0, 1};
  IdentificationResult r;
  r.sample_id = "x";
  r.uw_mask = {1, 1};
  const std::vector<corpus::AnnotatedSample> in = {a};
  const std::vector<IdentificationResult> run = {r};
  const auto out = apply(in, run, corpus::AnnotationSource::kDiscriminative);
  EXPECT_EQ(out[0].uw_mask, r.uw_mask);
  EXPECT_EQ(out[0].source, corpus::AnnotationSource::kDiscriminative);
  const auto acc = identifier_accuracy(run, in);
  EXPECT_DOUBLE_EQ(acc.precision, 0.5);
  EXPECT_DOUBLE_EQ(acc.recall, 1.0);
}

}  // namespace
}  // namespace tiflab::identifier
