// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tiflab/autodiff.hpp"
#include "tiflab/corpus.hpp"
#include "tiflab/engine.hpp"
#include "tiflab/models.hpp"
#include "tiflab/objectives.hpp"

namespace {

using namespace tiflab;

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> v(r * c);
  for (auto& x : v) x = n(rng);
  return Tensor({r, c}, std::move(v));
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor(n, n, 1), b = random_tensor(n, n, 2);
  for (auto _ : state) {
    ad::Graph g;
    const auto x = g.variable(a), y = g.variable(b);
    g.backward(ad::sum(ad::matmul(x, y)));
    benchmark::DoNotOptimize(g.grad(x));
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

struct Setup {
  lm::Tokenizer tokenizer;
  std::vector<objectives::EncodedSample> forget;
  std::vector<lm::TokenId> safe;
  lm::ModelConfig model;
};

const Setup& setup() {
  static const Setup s = [] {
    corpus::GeneratorConfig gc;
    gc.n_authors = 20;
    gc.forget_fraction = 0.1;
    const auto bundle = corpus::generate_corpus(gc);
    std::vector<std::string> texts;
    for (const auto& a : bundle.samples) {
      texts.push_back(a.base.question);
      texts.push_back(a.base.answer);
    }
    texts.emplace_back("I don't know");
    lm::Tokenizer tok = lm::Tokenizer::build(texts);
    lm::ModelConfig mc;
    mc.vocab_size = tok.vocab_size();
    auto forget = objectives::encode_samples(tok, bundle.split(corpus::Split::kForget));
    forget.resize(8);
    const auto safe = tok.encode("I don't know");
    return Setup{std::move(tok), std::move(forget), safe, mc};
  }();
  return s;
}

void BM_ForwardBatch8(benchmark::State& state) {
  const auto& s = setup();
  const lm::CausalLM m(s.model, 1);
  std::vector<lm::TargetRequest> req;
  for (const auto& x : s.forget) req.push_back({x.prompt, x.target});
  for (auto _ : state) benchmark::DoNotOptimize(lm::sequence_logprobs(m, req));
}
BENCHMARK(BM_ForwardBatch8)->Unit(benchmark::kMillisecond);

void BM_TpoStepBatch8(benchmark::State& state) {
  const auto& s = setup();
  const lm::CausalLM ref(s.model, 1);
  lm::CausalLM m = ref;
  std::vector<objectives::ReferenceStats> refs;
  for (const auto& x : s.forget) refs.push_back(objectives::reference_stats(ref, x, s.safe));
  const auto cfg = objectives::ObjectiveConfig::defaults(objectives::ObjectiveKind::kTPO);
  for (auto _ : state) {
    m.params().zero_grad();
    ad::Graph g;
    const auto loss = objectives::batch_loss(g, m, s.forget, refs, {}, cfg, s.safe);
    g.backward(loss.total);
    benchmark::DoNotOptimize(m.params().grads().data());
  }
}
BENCHMARK(BM_TpoStepBatch8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
