// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Slow, obviously-correct reference implementations used only by tests.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace tiflab::oracle {

// Longest common subsequence by trying every subsequence of the shorter
// input, longest first.
template <typename T>
std::size_t brute_lcs(const std::vector<T>& a, const std::vector<T>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& t = a.size() <= b.size() ? b : a;
  const std::size_t n = s.size();
  std::size_t best = 0;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    const auto len = static_cast<std::size_t>(std::popcount(bits));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(bits >> i & 1u)) continue;
      while (j < t.size() && t[j] != s[i]) ++j;
      if (j == t.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

struct Ks {
  double statistic = 0.0;
  double p_value = 1.0;
};

// max over x of |F_a(x) - F_b(x)| as an integer numerator over n*m.
inline long long ks_numerator(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> xs(a);
  xs.insert(xs.end(), b.begin(), b.end());
  long long best = 0;
  for (double x : xs) {
    const long long fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; });
    const long long fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; });
    best = std::max(best, std::llabs(fa * static_cast<long long>(b.size()) - fb * static_cast<long long>(a.size())));
  }
  return best;
}

// Exact permutation test: every way of splitting the pooled values into
// groups of |a| and |b|, counting splits at least as extreme.
inline Ks ks_permutation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const long long observed = ks_numerator(a, b);
  std::vector<bool> pick(total, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n), true);
  std::size_t count = 0, extreme = 0;
  // prev_permutation over a sorted-descending bool mask enumerates every subset.
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < total; ++i) (pick[i] ? x : y).push_back(pooled[i]);
    ++count;
    if (ks_numerator(x, y) >= observed) ++extreme;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return {static_cast<double>(observed) / static_cast<double>(n * m),
          static_cast<double>(extreme) / static_cast<double>(count)};
}

// 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)
inline double kolmogorov_series(double lambda) {
  if (lambda < 0.3) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 200; ++k) s += (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(2.0 * s, 0.0, 1.0);
}

// P(pos > neg) + P(pos == neg) / 2 over all pairs.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

inline double log_sigmoid(double x) { return std::log(1.0 / (1.0 + std::exp(-x))); }

// -(2/beta) log sigmoid(-beta * r)
inline double npo(double log_ratio, double beta) { return -(2.0 / beta) * log_sigmoid(-beta * log_ratio); }

// Central difference d f / d x_i for each requested coordinate; `x` is
// restored afterwards.
inline std::vector<double> central_difference(const std::function<double()>& f, std::span<double> x,
                                              std::span<const std::size_t> coords, double eps) {
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f();
    x[i] = saved - eps;
    const double down = f();
    x[i] = saved;
    out.push_back((up - down) / (2.0 * eps));
  }
  return out;
}

}  // namespace tiflab::oracle
