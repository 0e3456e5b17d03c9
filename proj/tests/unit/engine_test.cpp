// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tiflab/engine.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::engine {
namespace {

using objectives::EncodedSample;

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

std::vector<EncodedSample> data() {
  return {
      {"a", {1, 6, 5}, {7, 8, 2}, {0, 1, 0}},
      {"b", {1, 9, 5}, {10, 11, 2}, {0, 1, 0}},
      {"c", {1, 12, 5}, {13, 2}, {1, 0}},
      {"d", {1, 14, 5}, {15, 7, 2}, {0, 1, 0}},
  };
}

TEST(AdamW, MatchesHandComputedSteps) {
  std::vector<double> p = {1.0, -0.5}, m = {0, 0}, v = {0, 0};
  AdamState state{{0, 0}, {0, 0}, 0};
  const AdamWConfig cfg;
  const std::vector<std::vector<double>> grads = {{0.3, -0.1}, {0.2, 0.4}, {-0.1, 0.0}};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const auto& g = grads[t - 1];
    std::vector<double> want = p;
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
      const double vh = v[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
      want[i] -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * want[i]);
    }
    adamw_step(p, g, state, 0.01, cfg);
    EXPECT_EQ(state.step, t);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(p[i], want[i], 1e-15);
  }
}

TEST(AdamW, RejectsBadInput) {
  std::vector<double> p = {1.0};
  AdamState s{{0}, {0}, 0};
  EXPECT_THROW(adamw_step(p, std::vector<double>{NAN}, s, 0.1, {}), NumericError);
  EXPECT_THROW(adamw_step(p, std::vector<double>{1.0, 2.0}, s, 0.1, {}), ContractViolation);
  EXPECT_THROW(adamw_step(p, std::vector<double>{1.0}, s, -0.1, {}), ContractViolation);
}

TEST(Warmup, LinearThenConstant) {
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 1, 4), 0.25);
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 4, 4), 1.0);
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 9, 4), 1.0);
  EXPECT_DOUBLE_EQ(warmup_lr(0.5, 1, 0), 0.5);
}

TEST(Training, LossDecreasesAndRunsAreDeterministic) {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 8;
  cfg.batch_size = 2;
  cfg.seed = 3;
  lm::CausalLM a(tiny(), 1), b(tiny(), 1);
  const auto ra = train_lm(a, data(), cfg);
  const auto rb = train_lm(b, data(), cfg);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_LT(ra.epoch_loss.back(), ra.epoch_loss.front());
  EXPECT_TRUE(std::equal(a.params().values().begin(), a.params().values().end(), b.params().values().begin()));
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.seed = 5;
  lm::CausalLM full(tiny(), 2);
  Checkpoint at2;
  train_lm(full, data(), cfg, [&](const Checkpoint& c) {
    if (c.epoch == 2) at2 = c;
  });
  lm::CausalLM resumed(tiny(), 2);
  train_lm(resumed, data(), cfg, {}, &at2);
  EXPECT_TRUE(std::equal(full.params().values().begin(), full.params().values().end(),
                         resumed.params().values().begin()));
}

TEST(Training, MaskedLmTrains) {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 6;
  cfg.batch_size = 2;
  lm::MaskedLM m(tiny(), 1);
  const auto r = train_masked_lm(m, data(), cfg);
  EXPECT_EQ(r.epoch_loss.size(), 6u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_GT(masked_lm_fraction(), 0.0);
}

TEST(Training, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lr = -1.0;
  try {
    cfg.validate("/train/original");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.pointer().rfind("/train/original", 0), 0u);
  }
}

TEST(Unlearn, EpochZeroIsReferenceAndReferenceIsUntouched) {
  lm::CausalLM ref(tiny(), 4);
  lm::CausalLM model = ref;
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  std::vector<Checkpoint> seen;
  auto forget = data();
  for (auto& s : forget) {  // no EOS for forget targets
    s.target.pop_back();
    s.uw.pop_back();
  }
  const auto result = unlearn(model, ref, forget, {}, objectives::ObjectiveConfig::defaults(objectives::ObjectiveKind::kTPO),
                              cfg, {}, [&](const Checkpoint& c) { seen.push_back(c); });
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_EQ(seen[0].epoch, 0u);
  EXPECT_TRUE(std::equal(seen[0].params.begin(), seen[0].params.end(), ref.params().values().begin()));
  EXPECT_EQ(result.reference_hash_before, result.reference_hash_after);
  EXPECT_EQ(result.steps.size(), 6u);
  EXPECT_FALSE(std::equal(seen[3].params.begin(), seen[3].params.end(), ref.params().values().begin()));
}

TEST(Unlearn, TaskVectorIsRejectedAsLoss) {
  lm::CausalLM ref(tiny(), 4);
  lm::CausalLM model = ref;
  EXPECT_THROW(unlearn(model, ref, data(), {}, objectives::ObjectiveConfig::defaults(objectives::ObjectiveKind::kTaskVector),
                       TrainConfig{}),
               Error);
}

TEST(TaskVector, EditIsTwiceOriginalMinusReinforced) {
  lm::CausalLM original(tiny(), 4);
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.batch_size = 2;
  const auto r = task_vector(original, data(), cfg, 0.05, 3);
  ASSERT_EQ(r.params.size(), original.params().num_values());
  const auto theta = original.params().values();
  for (std::size_t i = 0; i < r.params.size(); ++i) EXPECT_EQ(r.params[i], 2.0 * theta[i] - r.reinforced[i]);
  EXPECT_LE(r.reinforce_epochs, 3u);
}

TEST(StepCsv, HeaderAndRowHaveSameArity) {
  const auto header = step_csv_header();
  const auto row = step_csv_row(StepRecord{3, 1, "tpo", 1.0, 0.5, 0.5, 0.0, 0.0});
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(Hash, Fnv1aKnownValue) {
  // FNV-1a 64 of "a".
  EXPECT_EQ(fnv1a(std::string_view("a")), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace tiflab::engine
