// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::eval {

using lm::TokenId;

namespace {

template <typename T>
std::size_t lcs(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
double rouge(std::span<const T> cand, std::span<const T> ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const auto l = static_cast<double>(lcs(cand, ref));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(cand.size());
  const double r = l / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

// Exact permutation p-value: the fraction of the C(n+m, n) ways to label the
// pooled sorted values whose ECDF gap, checked at the ends of tie blocks,
// reaches the observed one. Counts are lattice paths from (0,0) to (n,m).
double ks_exact_p(std::size_t n, std::size_t m, std::int64_t d_num, const std::vector<bool>& boundary) {
  // total[i][j] = C(i+j, i), built as Pascal's triangle.
  std::vector<std::vector<long double>> paths(n + 1, std::vector<long double>(m + 1, 0.0L));
  std::vector<std::vector<long double>> total(n + 1, std::vector<long double>(m + 1, 0.0L));
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      total[i][j] = (i == 0 || j == 0) ? 1.0L : total[i - 1][j] + total[i][j - 1];
      const auto gap = static_cast<std::int64_t>(i * m) - static_cast<std::int64_t>(j * n);
      const bool check = (i + j > 0) && boundary[i + j];
      if (check && std::llabs(gap) >= d_num) {
        paths[i][j] = total[i][j];
      } else if (i + j > 0) {
        paths[i][j] = (i > 0 ? paths[i - 1][j] : 0.0L) + (j > 0 ? paths[i][j - 1] : 0.0L);
      }
    }
  }
  return static_cast<double>(paths[n][m] / total[n][m]);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double rouge_l_f1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return rouge(candidate, reference);
}

double rouge_l_f1(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  return rouge(candidate, reference);
}

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) { return lcs(a, b); }

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form of the CDF converges in a few terms here.
    const double pi = std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = (2.0 * k - 1.0) * pi / lambda;
      cdf += std::exp(-t * t / 8.0);
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractViolation("ks_two_sample: empty sample");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n + m);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end());

  // boundary[k]: the first k pooled values end a tie block.
  std::vector<bool> boundary(n + m + 1, false);
  std::int64_t d_num = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    (pooled[k].second == 0 ? i : j) += 1;
    if (k + 1 == pooled.size() || pooled[k + 1].first != pooled[k].first) {
      boundary[k + 1] = true;
      const auto gap = static_cast<std::int64_t>(i * m) - static_cast<std::int64_t>(j * n);
      d_num = std::max(d_num, static_cast<std::int64_t>(std::llabs(gap)));
    }
  }
  KsResult out;
  out.statistic = static_cast<double>(d_num) / static_cast<double>(n * m);
  if (d_num == 0) {
    out.p_value = 1.0;
    out.exact = std::min(n, m) <= kKsExactLimit;
    return out;
  }
  if (std::min(n, m) <= kKsExactLimit) {
    out.exact = true;
    out.p_value = ks_exact_p(n, m, d_num, boundary);
    return out;
  }
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  out.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * out.statistic);
  return out;
}

double min_k_score(std::span<const double> token_logprobs, double k_percent) {
  if (token_logprobs.empty()) throw ContractViolation("min_k_score: empty sequence");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ContractViolation("min_k_score: k must lie in (0, 100]");
  std::vector<double> sorted(token_logprobs.begin(), token_logprobs.end());
  std::sort(sorted.begin(), sorted.end());
  const auto count = std::min(
      sorted.size(),
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(k_percent / 100.0 * static_cast<double>(sorted.size()) - 1e-9))));
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(count), 0.0) /
         static_cast<double>(count);
}

double auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw ContractViolation("auc: empty class");
  std::vector<std::pair<double, bool>> all;
  for (double v : positive) all.emplace_back(v, true);
  for (double v : negative) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < all.size();) {
    std::size_t end = k;
    while (end < all.size() && all[end].first == all[k].first) ++end;
    // 1-based ranks k+1 .. end share their mean.
    const double mid = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t t = k; t < end; ++t) {
      if (all[t].second) rank_sum += mid;
    }
    k = end;
  }
  const auto np = static_cast<double>(positive.size());
  const auto nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double privleak(double auc_model, double auc_retained) {
  if (auc_retained == 0.0) throw NumericError("privleak: retained model AUC is 0");
  return 100.0 * (auc_model - auc_retained) / auc_retained;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractViolation("kl_divergence: distributions differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

double aggregate(std::span<const double> values, Aggregation mode) {
  if (values.empty()) throw ContractViolation("aggregate: no values");
  if (mode == Aggregation::kArithmetic) {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  double inv = 0.0;
  for (double v : values) {
    if (v <= 0.0) return 0.0;
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

std::vector<EvalSample> encode_eval(const lm::Tokenizer& tokenizer, std::span<const corpus::AnnotatedSample> samples) {
  std::vector<EvalSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    EvalSample e;
    e.id = s.base.id;
    e.prompt = lm::encode_prompt(tokenizer, s.base.question);
    e.answer = tokenizer.encode(s.base.answer);
    e.paraphrased = tokenizer.encode(s.base.paraphrased_answer);
    for (const auto& p : s.base.perturbed_answers) e.perturbed.push_back(tokenizer.encode(p));
    e.uw = s.uw_mask;
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

double geometric_prob(const std::vector<double>& lp) {
  return std::exp(std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size()));
}

// Model-side numbers for a sample set, each computed once from packed passes.
struct Scores {
  std::vector<std::vector<double>> answer;  // per-token log-probs of the answer
  std::vector<std::optional<TruthRatio>> truth;
};

Scores score(const lm::CausalLM& model, std::span<const EvalSample> samples) {
  std::vector<lm::TargetRequest> requests;
  for (const auto& s : samples) {
    if (s.answer.empty()) throw ContractViolation("answer_probability: empty answer in " + s.id);
    requests.push_back({s.prompt, s.answer});
    if (s.paraphrased.empty() || s.perturbed.size() < 2) continue;
    requests.push_back({s.prompt, s.paraphrased});
    for (const auto& p : s.perturbed) {
      if (p.empty()) throw ContractViolation("truth_ratio: empty perturbed answer in " + s.id);
      requests.push_back({s.prompt, p});
    }
  }
  auto lps = lm::sequence_logprobs(model, requests);
  Scores out;
  std::size_t next = 0;
  for (const auto& s : samples) {
    out.answer.push_back(std::move(lps[next++]));
    if (s.paraphrased.empty() || s.perturbed.size() < 2) {
      out.truth.emplace_back();
      continue;
    }
    const double para = geometric_prob(lps[next++]);
    double pert = 0.0;
    for (std::size_t i = 0; i < s.perturbed.size(); ++i) pert += geometric_prob(lps[next++]);
    pert /= static_cast<double>(s.perturbed.size());
    TruthRatio tr;
    tr.ratio = pert / para;
    tr.utility = std::max(0.0, 1.0 - tr.ratio);
    out.truth.push_back(tr);
  }
  return out;
}

std::vector<double> ratios_of(const Scores& scores) {
  std::vector<double> out;
  for (const auto& tr : scores.truth) {
    if (tr) out.push_back(tr->ratio);
  }
  return out;
}

// Greedy continuations; a prompt already at max_len yields nothing.
std::vector<std::vector<TokenId>> generate_all(const lm::CausalLM& model, std::vector<std::vector<TokenId>> prompts,
                                               std::size_t max_new) {
  std::vector<std::size_t> fits;
  std::vector<std::vector<TokenId>> runnable;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (prompts[i].size() < model.config().max_len) {
      fits.push_back(i);
      runnable.push_back(std::move(prompts[i]));
    }
  }
  auto produced = lm::generate_greedy(model, runnable, max_new);
  std::vector<std::vector<TokenId>> out(prompts.size());
  for (std::size_t j = 0; j < fits.size(); ++j) out[fits[j]] = std::move(produced[j]);
  return out;
}

std::vector<double> greedy_rouges(const lm::CausalLM& model, std::span<const EvalSample> samples,
                                  std::size_t max_new) {
  std::vector<std::vector<TokenId>> prompts;
  for (const auto& s : samples) prompts.push_back(s.prompt);
  const auto outs = generate_all(model, std::move(prompts), max_new);
  std::vector<double> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back(rouge_l_f1(std::span<const TokenId>(outs[i]), samples[i].answer));
  }
  return out;
}

SplitMetrics split_from(const Scores& scores, const std::vector<double>& rouges) {
  SplitMetrics m;
  std::vector<double> prob;
  std::vector<double> tr;
  std::vector<double> tu;
  for (std::size_t i = 0; i < scores.answer.size(); ++i) {
    prob.push_back(geometric_prob(scores.answer[i]));
    if (const auto& r = scores.truth[i]) {
      tr.push_back(r->ratio);
      tu.push_back(r->utility);
    }
  }
  m.probability = mean_of(prob);
  m.rouge_l = mean_of(rouges);
  m.truth_ratio = mean_of(tr);
  m.truth_ratio_utility = mean_of(tu);
  return m;
}

std::vector<double> min_k_scores(const Scores& scores, double k_percent) {
  std::vector<double> out;
  for (const auto& lp : scores.answer) out.push_back(min_k_score(lp, k_percent));
  return out;
}

double gw_from(const Scores& scores, std::span<const EvalSample> samples) {
  std::vector<double> per_sample;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (s.uw.size() != s.answer.size()) throw ContractViolation("gw_cross_entropy: mask length mismatch in " + s.id);
    const auto& lp = scores.answer[k];
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (s.uw[i] == 0) {
        total -= lp[i];
        ++count;
      }
    }
    if (count > 0) per_sample.push_back(total / static_cast<double>(count));
  }
  return mean_of(per_sample);
}

}  // namespace

double answer_probability(const lm::CausalLM& model, std::span<const TokenId> prompt,
                          std::span<const TokenId> target) {
  if (target.empty()) throw ContractViolation("answer_probability: empty answer");
  return geometric_prob(lm::sequence_logprob(model, prompt, target));
}

std::optional<TruthRatio> truth_ratio(const lm::CausalLM& model, const EvalSample& sample) {
  return score(model, std::span<const EvalSample>(&sample, 1)).truth.front();
}

std::vector<double> truth_ratios(const lm::CausalLM& model, std::span<const EvalSample> samples) {
  return ratios_of(score(model, samples));
}

double forget_quality(std::span<const double> unlearned_ratios, std::span<const double> retained_ratios) {
  return ks_two_sample(unlearned_ratios, retained_ratios).p_value;
}

double forget_quality(const lm::CausalLM& unlearned, const lm::CausalLM& retained, std::span<const EvalSample> forget) {
  const auto a = truth_ratios(unlearned, forget);
  const auto b = truth_ratios(retained, forget);
  return forget_quality(a, b);
}

double greedy_rouge(const lm::CausalLM& model, const EvalSample& sample, std::size_t max_new_tokens) {
  return greedy_rouges(model, std::span<const EvalSample>(&sample, 1), max_new_tokens).front();
}

SplitMetrics split_metrics(const lm::CausalLM& model, std::span<const EvalSample> samples, const EvalOptions& options) {
  if (samples.empty()) return {};
  return split_from(score(model, samples), greedy_rouges(model, samples, options.max_new_tokens));
}

Utility model_utility(const lm::CausalLM& model, std::span<const EvalSample> retain,
                      std::span<const EvalSample> general, const EvalOptions& options) {
  if (retain.empty()) throw ConfigError("retain probe set is empty", "/eval/retain_probe");
  if (general.empty()) throw ConfigError("general probe set is empty", "/eval/general");
  Utility u;
  u.retain = split_metrics(model, retain, options);
  u.general = split_metrics(model, general, options);
  const double parts[] = {u.retain.probability, u.retain.rouge_l, u.retain.truth_ratio_utility,
                          u.general.probability, u.general.rouge_l, u.general.truth_ratio_utility};
  u.value = aggregate(parts, options.aggregation);
  return u;
}

double verbmem(const lm::CausalLM& model, std::span<const EvalSample> samples, std::size_t max_new_tokens) {
  std::vector<std::vector<TokenId>> prompts;
  std::vector<std::span<const TokenId>> rests;
  for (const auto& s : samples) {
    if (s.answer.size() < 2) continue;
    const std::size_t split = std::max<std::size_t>(1, s.answer.size() / 2);
    std::vector<TokenId> prompt = s.prompt;
    prompt.insert(prompt.end(), s.answer.begin(), s.answer.begin() + static_cast<std::ptrdiff_t>(split));
    prompts.push_back(std::move(prompt));
    rests.emplace_back(s.answer.data() + split, s.answer.size() - split);
  }
  const auto outs = generate_all(model, std::move(prompts), max_new_tokens);
  std::vector<double> scores;
  for (std::size_t i = 0; i < outs.size(); ++i) scores.push_back(rouge_l_f1(std::span<const TokenId>(outs[i]), rests[i]));
  return mean_of(scores);
}

double knowmem(const lm::CausalLM& model, std::span<const EvalSample> samples, std::size_t max_new_tokens) {
  return mean_of(greedy_rouges(model, samples, max_new_tokens));
}

double min_k_score(const lm::CausalLM& model, const EvalSample& sample, double k_percent) {
  const auto lp = lm::sequence_logprob(model, sample.prompt, sample.answer);
  return min_k_score(lp, k_percent);
}

double membership_auc(const lm::CausalLM& model, std::span<const EvalSample> forget,
                      std::span<const EvalSample> holdout, double k_percent) {
  const auto pos = min_k_scores(score(model, forget), k_percent);
  const auto neg = min_k_scores(score(model, holdout), k_percent);
  return auc(pos, neg);
}

double gw_cross_entropy(const lm::CausalLM& model, std::span<const EvalSample> samples) {
  return gw_from(score(model, samples), samples);
}

double kl_reference_divergence(const lm::CausalLM& model, const lm::CausalLM& reference,
                               std::span<const EvalSample> samples) {
  if (model.config().vocab_size != reference.config().vocab_size) {
    throw ContractViolation("kl_reference_divergence: vocabularies differ");
  }
  std::vector<lm::TargetRequest> requests;
  for (const auto& s : samples) requests.push_back({s.prompt, s.answer});
  double total = 0.0;
  std::size_t positions = 0;
  for (std::size_t start = 0; start < requests.size(); start += lm::kPackLimit) {
    const auto chunk =
        std::span<const lm::TargetRequest>(requests).subspan(start, std::min(lm::kPackLimit, requests.size() - start));
    ad::Graph g(false);
    const auto p = lm::target_logits(g, model, chunk);
    const auto q = lm::target_logits(g, reference, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const Tensor& pv = p[i].value();
      const Tensor& qv = q[i].value();
      for (std::size_t r = 0; r < pv.rows(); ++r) {
        total += kl_divergence(ad::softmax_values(pv.row(r)), ad::softmax_values(qv.row(r)));
        ++positions;
      }
    }
  }
  return positions == 0 ? 0.0 : total / static_cast<double>(positions);
}

Baseline make_baseline(const lm::CausalLM& retained, const EvalSets& sets, const EvalOptions& options) {
  Baseline b;
  const Scores forget = score(retained, sets.forget);
  b.forget_ratios = ratios_of(forget);
  b.auc = auc(min_k_scores(forget, options.k_percent), min_k_scores(score(retained, sets.holdout), options.k_percent));
  return b;
}

EvalReport evaluate(const lm::CausalLM& model, const lm::CausalLM* reference, const Baseline& baseline,
                    const EvalSets& sets, const EvalOptions& options) {
  EvalReport r;
  const Scores forget = score(model, sets.forget);
  r.forget_quality = forget_quality(ratios_of(forget), baseline.forget_ratios);
  const auto utility = model_utility(model, sets.retain, sets.general, options);
  r.model_utility = utility.value;
  r.retain = utility.retain;
  r.general = utility.general;
  r.forget = split_from(forget, greedy_rouges(model, sets.forget, options.max_new_tokens));
  r.auc = auc(min_k_scores(forget, options.k_percent), min_k_scores(score(model, sets.holdout), options.k_percent));
  r.privleak = privleak(r.auc, baseline.auc);
  r.verbmem_f = verbmem(model, sets.forget, options.max_new_tokens);
  r.knowmem_f = r.forget.rouge_l;
  r.knowmem_r = r.retain.rouge_l;
  r.gw_ce = gw_from(forget, sets.forget);
  if (reference != nullptr) {
    r.kl_forget = kl_reference_divergence(model, *reference, sets.forget);
    r.kl_retain = kl_reference_divergence(model, *reference, sets.retain);
  }
  return r;
}

namespace {

void put_split(nlohmann::ordered_json& j, const char* name, const SplitMetrics& m) {
  j[name] = {{"probability", m.probability},
             {"rouge_l", m.rouge_l},
             {"truth_ratio", m.truth_ratio},
             {"truth_ratio_utility", m.truth_ratio_utility}};
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["checkpoint"] = r.checkpoint;
  j["epoch"] = r.epoch;
  j["forget_quality"] = r.forget_quality;
  j["model_utility"] = r.model_utility;
  put_split(j, "forget", r.forget);
  put_split(j, "retain", r.retain);
  put_split(j, "general", r.general);
  j["auc"] = r.auc;
  j["privleak"] = r.privleak;
  j["verbmem_f"] = r.verbmem_f;
  j["knowmem_f"] = r.knowmem_f;
  j["knowmem_r"] = r.knowmem_r;
  j["gw_ce"] = r.gw_ce;
  j["kl_forget"] = r.kl_forget;
  j["kl_retain"] = r.kl_retain;
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "checkpoint,epoch,forget_quality,model_utility,"
         "forget_probability,forget_rouge_l,forget_truth_ratio,"
         "retain_probability,retain_rouge_l,retain_truth_ratio,"
         "general_probability,general_rouge_l,general_truth_ratio,"
         "auc,privleak,verbmem_f,knowmem_f,knowmem_r,gw_ce,kl_forget,kl_retain\n";
}

std::string report_csv_row(const EvalReport& r) {
  const double values[] = {r.forget_quality,      r.model_utility,     r.forget.probability, r.forget.rouge_l,
                           r.forget.truth_ratio,  r.retain.probability, r.retain.rouge_l,   r.retain.truth_ratio,
                           r.general.probability, r.general.rouge_l,  r.general.truth_ratio, r.auc,
                           r.privleak,            r.verbmem_f,        r.knowmem_f,         r.knowmem_r,
                           r.gw_ce,               r.kl_forget,        r.kl_retain};
  std::string row = r.checkpoint + "," + std::to_string(r.epoch);
  for (double v : values) row += "," + fmt(v);
  return row + "\n";
}

}  // namespace tiflab::eval
