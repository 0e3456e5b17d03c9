// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "tiflab/errors.hpp"

namespace tiflab::engine {

using ad::Graph;
using ad::Var;
using lm::TokenId;
using lm::Tokenizer;
using objectives::EncodedSample;

namespace {

constexpr double kMaskFraction = 0.15;
constexpr double kRegressionTolerance = 0.05;
constexpr double kDivergenceFactor = 2.0;

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string canonical(const TrainConfig& c) {
  return "lr=" + fmt(c.lr) + ";b1=" + fmt(c.adam.beta1) + ";b2=" + fmt(c.adam.beta2) + ";eps=" + fmt(c.adam.eps) +
         ";wd=" + fmt(c.adam.weight_decay) + ";bs=" + std::to_string(c.batch_size) +
         ";warmup=" + std::to_string(c.warmup) + ";seed=" + std::to_string(c.seed);
}

std::string canonical(const objectives::ObjectiveConfig& o) {
  return std::string(objectives::to_string(o.kind)) + ";beta=" + fmt(o.beta) + ";lambda=" + fmt(o.lambda) +
         ";gdr=" + fmt(o.gdr_weight) + ";scope=" + std::to_string(static_cast<int>(o.scope)) +
         ";norm=" + std::to_string(static_cast<int>(o.norm)) + ";safe=" + o.safe_answer;
}

std::string rng_string(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

std::mt19937_64 rng_from_string(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream ss(state);
  ss >> rng;
  if (!ss) throw SchemaError("checkpoint: unreadable RNG state");
  return rng;
}

// (batch indices, rng, epoch, 1-based global step) -> loss after backward().
using BatchFn = std::function<double(std::span<const std::size_t>, std::mt19937_64&, std::size_t, std::uint64_t)>;

struct LoopSpec {
  std::string kind;
  std::uint64_t config_hash = 0;
  bool monitor = true;       // regression flags and divergence abort
  bool emit_epoch0 = false;  // checkpoint before the first update
};

TrainResult run_loop(ad::ParamStore& store, std::size_t n, const TrainConfig& config, const LoopSpec& spec,
                     const EpochCallback& on_epoch, const Checkpoint* resume, const BatchFn& batch_fn) {
  config.validate();
  if (n == 0) throw ContractViolation("training: empty dataset");

  std::mt19937_64 rng(config.seed);
  AdamState adam;
  adam.m.assign(store.num_values(), 0.0);
  adam.v.assign(store.num_values(), 0.0);
  std::size_t start_epoch = 0;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();

  auto snapshot = [&](std::size_t epoch) {
    Checkpoint c;
    c.kind = spec.kind;
    c.epoch = epoch;
    c.params.assign(store.values().begin(), store.values().end());
    c.adam = adam;
    c.rng_state = rng_string(rng);
    c.config_hash = spec.config_hash;
    c.initial_loss = initial_loss;
    return c;
  };

  if (resume != nullptr) {
    if (resume->kind != spec.kind) {
      throw ContractViolation("resume: checkpoint is '" + resume->kind + "', run is '" + spec.kind + "'");
    }
    if (resume->config_hash != spec.config_hash) {
      throw ContractViolation("resume: checkpoint was written under a different configuration");
    }
    if (resume->params.size() != store.num_values()) {
      throw ContractViolation("resume: parameter count differs from the model");
    }
    store.assign(resume->params);
    adam = resume->adam;
    rng = rng_from_string(resume->rng_state);
    start_epoch = resume->epoch;
    initial_loss = resume->initial_loss;
  } else if (spec.emit_epoch0 && on_epoch) {
    on_epoch(snapshot(0));
  }

  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t warmup_steps = config.warmup ? steps_per_epoch : 0;
  TrainResult result;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      store.zero_grad();
      const std::uint64_t step = adam.step + 1;
      const double loss = batch_fn(batch, rng, epoch, step);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      }
      if (std::isnan(initial_loss)) initial_loss = loss;
      adamw_step(store.values(), store.grads(), adam, warmup_lr(config.lr, step, warmup_steps), config.adam);
      total += loss;
    }
    const double epoch_loss = total / static_cast<double>(steps_per_epoch);
    if (spec.monitor) {
      if (!result.epoch_loss.empty() &&
          epoch_loss > result.epoch_loss.back() * (1.0 + kRegressionTolerance)) {
        result.regressions.push_back(epoch);
      }
      if (epoch_loss > kDivergenceFactor * initial_loss) {
        throw NumericError("training diverged: epoch " + std::to_string(epoch) + " loss " + fmt(epoch_loss) +
                           " exceeds twice the initial " + fmt(initial_loss));
      }
    }
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(snapshot(epoch));
  }
  store.zero_grad();
  return result;
}

std::vector<std::size_t> iota_vec(std::size_t n, std::size_t start = 0) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace

void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                const AdamWConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractViolation("adamw_step: parameter, gradient and moment sizes differ");
  }
  if (!(lr >= 0.0)) throw ContractViolation("adamw_step: negative learning rate");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adamw_step: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * params[i]);
  }
}

double warmup_lr(double lr, std::uint64_t step, std::uint64_t warmup_steps) {
  if (warmup_steps == 0) return lr;
  return lr * std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
}

void TrainConfig::validate(const std::string& pointer) const {
  if (!(std::isfinite(lr) && lr > 0.0)) throw ConfigError("must be finite and > 0", pointer + "/lr");
  if (epochs < 1) throw ConfigError("must be at least 1", pointer + "/epochs");
  if (batch_size < 1) throw ConfigError("must be at least 1", pointer + "/batch_size");
  if (!(adam.weight_decay >= 0.0 && std::isfinite(adam.weight_decay))) {
    throw ConfigError("must be finite and >= 0", pointer + "/weight_decay");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("must lie in [0, 1)", pointer + "/beta1");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("must lie in [0, 1)", pointer + "/beta2");
  if (!(adam.eps > 0.0)) throw ConfigError("must be > 0", pointer + "/eps");
}

std::vector<EncodedSample> lm_examples(const Tokenizer& tokenizer, std::span<const corpus::AnnotatedSample> samples) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    EncodedSample e;
    e.id = s.base.id;
    e.prompt = lm::encode_prompt(tokenizer, s.base.question);
    e.target = tokenizer.encode(s.base.answer);
    e.target.push_back(Tokenizer::kEos);
    e.uw.assign(e.target.size(), 0);
    out.push_back(std::move(e));
  }
  return out;
}

TrainResult train_lm(lm::CausalLM& model, std::span<const EncodedSample> data, const TrainConfig& config,
                     const EpochCallback& on_epoch, const Checkpoint* resume) {
  LoopSpec spec{"causal", fnv1a("train_lm;" + canonical(config)), true, false};
  auto batch_fn = [&](std::span<const std::size_t> batch, std::mt19937_64&, std::size_t, std::uint64_t) {
    Graph g;
    std::vector<lm::TargetRequest> requests;
    for (std::size_t idx : batch) requests.push_back({data[idx].prompt, data[idx].target});
    const auto logits = lm::target_logits(g, model, requests);
    std::vector<Var> terms;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& ex = data[batch[i]];
      terms.push_back(objectives::masked_nll(logits[i], ex.target, iota_vec(ex.target.size())));
    }
    const Var loss = ad::scale(ad::add_n(g, terms), 1.0 / static_cast<double>(terms.size()));
    g.backward(loss);
    return loss.value().item();
  };
  return run_loop(model.params(), data.size(), config, spec, on_epoch, resume, batch_fn);
}

double masked_lm_fraction() { return kMaskFraction; }

TrainResult train_masked_lm(lm::MaskedLM& model, std::span<const EncodedSample> data, const TrainConfig& config,
                            const EpochCallback& on_epoch, const Checkpoint* resume) {
  for (const auto& ex : data) {
    if (ex.target.empty()) throw ContractViolation("train_masked_lm: empty answer in " + ex.id);
  }
  LoopSpec spec{"masked", fnv1a("train_masked_lm;" + canonical(config)), true, false};
  auto batch_fn = [&](std::span<const std::size_t> batch, std::mt19937_64& rng, std::size_t, std::uint64_t) {
    Graph g;
    std::vector<Var> terms;
    for (std::size_t idx : batch) {
      const auto& ex = data[idx];
      const std::size_t len = ex.target.size();
      const auto count = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(kMaskFraction * static_cast<double>(len))));
      auto positions = iota_vec(len);
      std::shuffle(positions.begin(), positions.end(), rng);
      positions.resize(count);
      std::sort(positions.begin(), positions.end());

      std::vector<TokenId> answer = ex.target;
      std::vector<std::size_t> rows;
      std::vector<std::size_t> cols;
      for (std::size_t p : positions) {
        answer[p] = Tokenizer::kMask;
        rows.push_back(ex.prompt.size() + 2 + p);
        cols.push_back(static_cast<std::size_t>(ex.target[p]));
      }
      const auto input = lm::masked_lm_input(ex.prompt, answer);
      const std::span<const TokenId> one[] = {input};
      const Var logprobs = ad::log_softmax(model.forward_packed(g, one, rows));
      terms.push_back(ad::scale(ad::mean(ad::select(logprobs, iota_vec(count), cols)), -1.0));
    }
    const Var loss = ad::scale(ad::add_n(g, terms), 1.0 / static_cast<double>(terms.size()));
    g.backward(loss);
    return loss.value().item();
  };
  return run_loop(model.params(), data.size(), config, spec, on_epoch, resume, batch_fn);
}

double mean_nll(const lm::CausalLM& model, std::span<const EncodedSample> data) {
  if (data.empty()) throw ContractViolation("mean_nll: empty dataset");
  std::vector<lm::TargetRequest> requests;
  for (const auto& ex : data) requests.push_back({ex.prompt, ex.target});
  double total = 0.0;
  for (const auto& lp : lm::sequence_logprobs(model, requests)) {
    total -= std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
  }
  return total / static_cast<double>(data.size());
}

std::string step_csv_header() { return "step,epoch,objective,total,forget_term,pl_term,gdr_term,kl_term\n"; }

std::string step_csv_row(const StepRecord& r) {
  return std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + r.objective + "," + fmt(r.total) + "," +
         fmt(r.forget_term) + "," + fmt(r.pl_term) + "," + fmt(r.gdr_term) + "," + fmt(r.kl_term) + "\n";
}

UnlearnResult unlearn(lm::CausalLM& model, const lm::CausalLM& reference, std::span<const EncodedSample> forget,
                      std::span<const EncodedSample> retain, const objectives::ObjectiveConfig& objective,
                      const TrainConfig& config, std::span<const TokenId> safe_answer, const EpochCallback& on_epoch,
                      const Checkpoint* resume) {
  objective.validate();
  if (objective.kind == objectives::ObjectiveKind::kTaskVector) {
    throw ContractViolation("unlearn: task vector bypasses the loop; call task_vector()");
  }
  if (forget.empty()) throw ContractViolation("unlearn: empty forget set");
  if (model.params().num_values() != reference.params().num_values()) {
    throw ContractViolation("unlearn: model and reference differ in size");
  }

  UnlearnResult result;
  result.reference_hash_before = fnv1a(reference.params().values());

  std::vector<objectives::ReferenceStats> refs;
  if (objective.needs_reference()) {
    const bool kto = objective.kind == objectives::ObjectiveKind::kKTO;
    refs.reserve(forget.size());
    for (const auto& s : forget) {
      refs.push_back(objectives::reference_stats(reference, s, kto ? safe_answer : std::span<const TokenId>{}));
    }
  }

  const std::string name(objectives::to_string(objective.kind));
  LoopSpec spec{"causal", fnv1a("unlearn;" + canonical(config) + ";" + canonical(objective)), false, true};
  std::vector<EncodedSample> fb;
  std::vector<objectives::ReferenceStats> rb;
  std::vector<EncodedSample> gb;
  auto batch_fn = [&](std::span<const std::size_t> batch, std::mt19937_64&, std::size_t epoch, std::uint64_t step) {
    fb.clear();
    rb.clear();
    gb.clear();
    for (std::size_t idx : batch) {
      fb.push_back(forget[idx]);
      if (!refs.empty()) rb.push_back(refs[idx]);
    }
    if (objective.gdr_weight > 0.0 && !retain.empty()) {
      const std::size_t base = static_cast<std::size_t>(step - 1) * config.batch_size;
      for (std::size_t k = 0; k < config.batch_size; ++k) gb.push_back(retain[(base + k) % retain.size()]);
    }
    Graph g;
    const auto loss = objectives::batch_loss(g, model, fb, rb, gb, objective, safe_answer);
    g.backward(loss.total);
    result.skipped_no_uw += loss.skipped_no_uw;
    result.skipped_no_gw += loss.skipped_no_gw;
    result.steps.push_back(
        {step, epoch, name, loss.total.value().item(), loss.forget_term, loss.pl_term, loss.gdr_term, loss.kl_term});
    return loss.total.value().item();
  };
  run_loop(model.params(), forget.size(), config, spec, on_epoch, resume, batch_fn);
  result.reference_hash_after = fnv1a(reference.params().values());
  return result;
}

TaskVectorResult task_vector(const lm::CausalLM& original, std::span<const EncodedSample> forget,
                             const TrainConfig& config, double nll_threshold, std::size_t max_epochs) {
  if (max_epochs < 1) throw ConfigError("must be at least 1", "/task_vector/max_epochs");
  lm::CausalLM reinforced = original;
  TaskVectorResult result;
  Checkpoint last;
  auto keep = [&](const Checkpoint& c) { last = c; };
  TrainConfig cfg = config;
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    cfg.epochs = e;
    train_lm(reinforced, forget, cfg, keep, e == 1 ? nullptr : &last);
    result.reinforce_epochs = e;
    result.reinforce_nll = mean_nll(reinforced, forget);
    if (result.reinforce_nll < nll_threshold) break;
  }
  result.params = objectives::task_vector_unlearn(original.params().values(), reinforced.params().values());
  const auto theta_r = reinforced.params().values();
  result.reinforced.assign(theta_r.begin(), theta_r.end());
  return result;
}

std::uint64_t fnv1a(std::span<const double> values) {
  std::uint64_t h = 14695981039346656037ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace tiflab::engine
