// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Training and unlearning loops. Single-threaded; all randomness comes from
// one mt19937_64 per run whose state travels in every checkpoint, so a run
// resumed from epoch k matches the uninterrupted run bit for bit.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tiflab/models.hpp"
#include "tiflab/objectives.hpp"

namespace tiflab::engine {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

// One decoupled-weight-decay Adam update:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// Increments state.step first (bias correction uses the new count). Throws
// NumericError on a non-finite gradient and ContractViolation on size
// mismatch or lr < 0.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                const AdamWConfig& config);

// lr * min(1, step / warmup_steps) for 1-based `step`; lr when warmup_steps == 0.
double warmup_lr(double lr, std::uint64_t step, std::uint64_t warmup_steps);

struct TrainConfig {
  double lr = 1e-3;
  AdamWConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  // Linear warmup over the steps of the first epoch, then constant.
  bool warmup = true;
  std::uint64_t seed = 0;

  // Throws ConfigError; `pointer` prefixes the field names.
  void validate(const std::string& pointer = "/train") const;
};

struct Checkpoint {
  std::string kind;  // "causal" or "masked"
  std::size_t epoch = 0;
  std::vector<double> params;
  AdamState adam;
  std::string rng_state;
  std::uint64_t config_hash = 0;
  // Loss at the first step of the run, kept for the divergence check.
  double initial_loss = 0.0;

  bool operator==(const Checkpoint&) const = default;
};

// Called after every epoch (and for epoch 0 before any update in unlearn()).
using EpochCallback = std::function<void(const Checkpoint&)>;

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss per epoch run by this call
  // Epochs whose loss rose more than 5% over the previous one.
  std::vector<std::size_t> regressions;
};

// Causal LM examples: prompt [BOS] q [SEP], target answer followed by EOS.
std::vector<objectives::EncodedSample> lm_examples(const lm::Tokenizer& tokenizer,
                                                   std::span<const corpus::AnnotatedSample> samples);

// Mean-over-tokens NLL per example, averaged over the batch. Throws
// NumericError when an epoch's mean loss exceeds twice the initial loss.
// With `resume`, restores parameters, optimizer and RNG and continues after
// resume->epoch.
TrainResult train_lm(lm::CausalLM& model, std::span<const objectives::EncodedSample> data,
                     const TrainConfig& config, const EpochCallback& on_epoch = {},
                     const Checkpoint* resume = nullptr);

// Masked-LM training: every step masks a random 15% (at least one) of each
// example's answer positions and scores the masked tokens. Examples use
// `prompt` as the question tokens and `target` as the answer tokens.
TrainResult train_masked_lm(lm::MaskedLM& model, std::span<const objectives::EncodedSample> data,
                            const TrainConfig& config, const EpochCallback& on_epoch = {},
                            const Checkpoint* resume = nullptr);
double masked_lm_fraction();

// Mean per-token NLL of `data` under `model`, no gradients.
double mean_nll(const lm::CausalLM& model, std::span<const objectives::EncodedSample> data);

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::string objective;
  double total = 0.0;
  double forget_term = 0.0;
  double pl_term = 0.0;
  double gdr_term = 0.0;
  double kl_term = 0.0;
};

std::string step_csv_header();
std::string step_csv_row(const StepRecord& record);

struct UnlearnResult {
  std::vector<StepRecord> steps;
  std::uint64_t reference_hash_before = 0;
  std::uint64_t reference_hash_after = 0;
  std::size_t skipped_no_uw = 0;
  std::size_t skipped_no_gw = 0;
};

// `model` must start as a copy of `reference`. Forget samples are answer
// targets without EOS; retain samples feed the GDR term, drawn cyclically
// in batches of config.batch_size. Emits the epoch-0 checkpoint before any
// update. Task vector configs are rejected here; use task_vector().
UnlearnResult unlearn(lm::CausalLM& model, const lm::CausalLM& reference,
                      std::span<const objectives::EncodedSample> forget,
                      std::span<const objectives::EncodedSample> retain,
                      const objectives::ObjectiveConfig& objective, const TrainConfig& config,
                      std::span<const lm::TokenId> safe_answer = {}, const EpochCallback& on_epoch = {},
                      const Checkpoint* resume = nullptr);

struct TaskVectorResult {
  std::vector<double> params;      // 2 * theta_0 - theta_reinforce
  std::vector<double> reinforced;  // theta_reinforce
  std::size_t reinforce_epochs = 0;
  double reinforce_nll = 0.0;
};

// Fine-tunes a copy of `original` on the forget examples (with EOS) until
// their mean NLL drops below `nll_threshold` or `max_epochs` pass, then
// subtracts the delta from the original weights.
TaskVectorResult task_vector(const lm::CausalLM& original, std::span<const objectives::EncodedSample> forget,
                             const TrainConfig& config, double nll_threshold = 0.05,
                             std::size_t max_epochs = 25);

// FNV-1a over the raw bytes.
std::uint64_t fnv1a(std::span<const double> values);
std::uint64_t fnv1a(std::string_view text);

}  // namespace tiflab::engine
