// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tiflab/errors.hpp"
#include "tiflab/objectives.hpp"

namespace tiflab::objectives {
namespace {

using ad::Var;
using lm::TokenId;

lm::ModelConfig tiny() {
  lm::ModelConfig c;
  c.vocab_size = 16;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 16;
  return c;
}

std::vector<EncodedSample> samples() {
  return {
      {"a", {1, 6, 7, 5}, {8, 9, 10}, {0, 1, 0}},
      {"b", {1, 11, 5}, {12, 13, 14, 8}, {0, 0, 1, 1}},
      {"c", {1, 6, 5}, {15, 9}, {1, 0}},
  };
}

const std::vector<TokenId> kSafe = {6, 7};

std::vector<ReferenceStats> refs(const lm::CausalLM& m, const std::vector<EncodedSample>& s) {
  std::vector<ReferenceStats> out;
  for (const auto& x : s) out.push_back(reference_stats(m, x, kSafe));
  return out;
}

double loss_value(lm::CausalLM& m, const std::vector<ReferenceStats>& r, const ObjectiveConfig& c,
                  const std::vector<EncodedSample>& retain = {}) {
  ad::Graph g(false);
  return batch_loss(g, m, samples(), r, retain, c, kSafe).total.value().item();
}

TEST(Objectives, IdentityAtReference) {
  lm::CausalLM m(tiny(), 3);
  const auto r = refs(m, samples());
  for (ObjectiveKind k : {ObjectiveKind::kNPO, ObjectiveKind::kKTO, ObjectiveKind::kLPL}) {
    for (double beta : {0.1, 0.3, 0.5}) {
      auto c = ObjectiveConfig::defaults(k);
      c.beta = beta;
      EXPECT_NEAR(loss_value(m, r, c), 2.0 / beta * std::log(2.0), 1e-9) << to_string(k);
    }
  }
}

TEST(Objectives, NpoMatchesClosedForm) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  const auto r = refs(ref, samples());
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kNPO);
  double want = 0.0;
  for (const auto& s : samples()) {
    const auto lp = lm::sequence_logprob(m, s.prompt, s.target);
    const auto lp0 = lm::sequence_logprob(ref, s.prompt, s.target);
    double ratio = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) ratio += (lp[i] - lp0[i]) / static_cast<double>(lp.size());
    want += oracle::npo(ratio, c.beta) / 3.0;
  }
  EXPECT_NEAR(loss_value(m, r, c), want, 1e-10);
}

TEST(Objectives, GaIsMeanLogLikelihood) {
  lm::CausalLM m(tiny(), 4);
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kGA);
  double want = 0.0;
  for (const auto& s : samples()) {
    const auto lp = lm::sequence_logprob(m, s.prompt, s.target);
    double mean = 0.0;
    for (double v : lp) mean += v / static_cast<double>(lp.size());
    want += mean / 3.0;
  }
  EXPECT_NEAR(loss_value(m, {}, c), want, 1e-12);
}

TEST(Objectives, LplMatchesClosedFormOnGoldLogits) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  const auto r = refs(ref, samples());
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kLPL);
  double want = 0.0;
  for (const auto& s : samples()) {
    std::vector<TokenId> full = s.prompt;
    full.insert(full.end(), s.target.begin(), s.target.end());
    const Tensor z = m.logits(full), z0 = ref.logits(full);
    double gap = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.target.size(); ++i) {
      if (!s.uw[i]) continue;
      const std::size_t row = s.prompt.size() - 1 + i, col = static_cast<std::size_t>(s.target[i]);
      gap += z0.at(row, col) - z.at(row, col);
      ++n;
    }
    want += -(2.0 / c.beta) * oracle::log_sigmoid(c.beta * gap / static_cast<double>(n)) / 3.0;
  }
  EXPECT_NEAR(loss_value(m, r, c), want, 1e-10);
}

TEST(Objectives, TpoIsLplPlusLambdaPl) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  const auto r = refs(ref, samples());
  auto tpo = ObjectiveConfig::defaults(ObjectiveKind::kTPO);
  tpo.lambda = 0.7;
  const double lpl = loss_value(m, r, ObjectiveConfig::defaults(ObjectiveKind::kLPL));
  const double pl = loss_value(m, r, ObjectiveConfig::defaults(ObjectiveKind::kPL));
  EXPECT_NEAR(loss_value(m, r, tpo), lpl + 0.7 * pl, 1e-10);
}

TEST(Objectives, PlIsGwNll) {
  lm::CausalLM m(tiny(), 4);
  double want = 0.0;
  for (const auto& s : samples()) {
    const auto lp = lm::sequence_logprob(m, s.prompt, s.target);
    double nll = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (!s.uw[i]) {
        nll -= lp[i];
        ++n;
      }
    }
    want += nll / static_cast<double>(n) / 3.0;
  }
  EXPECT_NEAR(loss_value(m, {}, ObjectiveConfig::defaults(ObjectiveKind::kPL)), want, 1e-12);
}

TEST(Objectives, LplGradientOnlyAtUwGoldLogits) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    ad::Graph g;
    Tensor logits({4, 6});
    for (auto& v : logits.storage()) v = n(rng);
    const Var z = g.variable(logits);
    const std::vector<TokenId> target = {1, 5, 0, 3};
    const std::vector<std::size_t> uw = {1, 3};
    const std::vector<double> ref = {n(rng), n(rng), n(rng), n(rng)};
    g.backward(lpl_from_logits(z, target, uw, ref, 0.3));
    const Tensor grad = g.grad(z);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t v = 0; v < 6; ++v) {
        const bool live = (i == 1 || i == 3) && static_cast<TokenId>(v) == target[i];
        if (live) EXPECT_NE(grad.at(i, v), 0.0);
        else EXPECT_EQ(grad.at(i, v), 0.0) << i << "," << v;
      }
    }
  }
}

TEST(Objectives, KtoKlIsZeroAtReferenceAndPositiveAway) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kKTO);
  {
    ad::Graph g(false);
    EXPECT_NEAR(batch_loss(g, ref, samples(), refs(ref, samples()), {}, c, kSafe).kl_term, 0.0, 1e-14);
  }
  ad::Graph g(false);
  EXPECT_GT(batch_loss(g, m, samples(), refs(ref, samples()), {}, c, kSafe).kl_term, 0.0);
}

TEST(Objectives, GdrAddsRetainNll) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  const auto r = refs(ref, samples());
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kNPO);
  const double base = loss_value(m, r, c);
  c.gdr_weight = 0.5;
  const std::vector<EncodedSample> retain = {{"r", {1, 9, 5}, {10, 11}, {0, 0}}};
  const auto lp = lm::sequence_logprob(m, retain[0].prompt, retain[0].target);
  EXPECT_NEAR(loss_value(m, r, c, retain), base - 0.5 * (lp[0] + lp[1]) / 2.0, 1e-10);
  EXPECT_THROW(loss_value(m, r, c, {}), ConfigError);
}

TEST(Objectives, ClosedFormsAreNonNegative) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 10.0);
  ad::Graph g(false);
  for (int i = 0; i < 200; ++i) {
    const Var r = g.constant(Tensor::scalar(n(rng)));
    const Var kl = g.constant(Tensor::scalar(std::abs(n(rng))));
    EXPECT_GE(npo_from_log_ratio(r, 0.1).value().item(), 0.0);
    EXPECT_GE(kto_from_log_ratio(r, kl, 0.1).value().item(), 0.0);
  }
}

TEST(Objectives, TaskVectorArithmetic) {
  const std::vector<double> t0 = {1.0, -2.0, 0.5}, tr = {1.5, -2.0, 0.0};
  EXPECT_EQ(task_vector_unlearn(t0, tr), (std::vector<double>{0.5, -2.0, 1.0}));
  EXPECT_EQ(task_vector_unlearn(t0, t0), t0);
  EXPECT_THROW(task_vector_unlearn(t0, std::vector<double>{1.0}), ContractViolation);
}

TEST(Objectives, ConfigParsingAndValidation) {
  EXPECT_EQ(parse_objective_kind("tpo"), ObjectiveKind::kTPO);
  EXPECT_THROW(parse_objective_kind("simnpo"), ConfigError);
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kNPO);
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ObjectiveConfig::defaults(ObjectiveKind::kKTO);
  c.safe_answer = "";
  EXPECT_THROW(c.validate(), ConfigError);
  c = ObjectiveConfig::defaults(ObjectiveKind::kCustom);
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_TRUE(ObjectiveConfig::defaults(ObjectiveKind::kTPO).reads_masks());
  EXPECT_FALSE(ObjectiveConfig::defaults(ObjectiveKind::kNPO).reads_masks());
}

TEST(Objectives, CustomForgetTermIsPluggable) {
  lm::CausalLM ref(tiny(), 3), m(tiny(), 4);
  const auto r = refs(ref, samples());
  auto c = ObjectiveConfig::defaults(ObjectiveKind::kCustom);
  c.custom = [](ad::Graph&, ad::Var logits, const EncodedSample& s, const ReferenceStats&) {
    return sequence_logprob_term(logits, s.target, {}, SequenceNorm::kMean);
  };
  EXPECT_NEAR(loss_value(m, r, c), loss_value(m, r, ObjectiveConfig::defaults(ObjectiveKind::kGA)), 1e-12);
}

}  // namespace
}  // namespace tiflab::objectives
