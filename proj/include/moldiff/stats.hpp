//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "moldiff/errors.hpp"

namespace moldiff {

/// Sum_i sqrt(p_i q_i) for two normalized histograms over the same binning.
inline double bhattacharyya(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), errc::bin_mismatch, "bhattacharyya: histogram binning differs");
  require(!p.empty(), errc::bin_mismatch, "bhattacharyya: empty histograms");
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9, errc::not_normalized,
          "bhattacharyya: histograms must sum to 1");
  double bc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
  return std::min(bc, 1.0);
}

namespace detail {

/// Midranks of the pooled sample, 1-based.
inline std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Exact two-sided p by enumerating all assignments of pooled ranks to the
// first sample: P(|U - mu| >= |U_obs - mu|).
inline double exact_mwu_p(const std::vector<double>& ranks, std::size_t n1, double u_obs) {
  const std::size_t n = ranks.size();
  // ranks are multiples of 1/2; double the values to work in integers
  std::vector<long long> r2(n);
  for (std::size_t i = 0; i < n; ++i) r2[i] = std::llround(2.0 * ranks[i]);
  std::sort(r2.begin(), r2.end());
  std::map<long long, double> counts;  // rank-sum*2 -> number of subsets
  std::vector<std::map<long long, double>> dp(n1 + 1);
  dp[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = std::min(n1, i + 1); k >= 1; --k) {
      for (const auto& [sum, cnt] : dp[k - 1]) dp[k][sum + r2[i]] += cnt;
      if (k == 1) break;
    }
  }
  double total = 0.0;
  for (const auto& [sum, cnt] : dp[n1]) total += cnt;
  const double mu2 = static_cast<double>(n1) * static_cast<double>(n - n1);  // 2*mu of U
  const double d_obs = std::abs(2.0 * u_obs - mu2);
  double tail = 0.0;
  for (const auto& [sum2, cnt] : dp[n1]) {
    const double u2 = static_cast<double>(sum2) - static_cast<double>(n1 * (n1 + 1));
    if (std::abs(u2 - mu2) >= d_obs - 1e-9) tail += cnt;
  }
  return std::min(1.0, tail / total);
}

}  // namespace detail

struct MannWhitneyResult {
  double u = 0.0;          // U statistic for the first sample
  double p_two_sided = 1.0;
};

/// Rank-sum U with midrank ties. Exact enumeration when min(|a|,|b|) < 8,
/// tie-corrected normal approximation otherwise.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), errc::empty_input, "mann_whitney_u: empty sample");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = detail::midranks(pooled);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
  const double u = r1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

  MannWhitneyResult res;
  res.u = u;
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  if (std::min(n1, n2) >= 8) {
    // tie correction on the variance
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double nn = static_cast<double>(n);
    const double var = (static_cast<double>(n1) * static_cast<double>(n2) / 12.0) *
                       ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
      res.p_two_sided = 1.0;
      return res;
    }
    const double diff = std::abs(u - mu);
    const double z = std::max(0.0, diff - 0.5) / std::sqrt(var);  // continuity correction
    res.p_two_sided = std::min(1.0, 2.0 * (1.0 - detail::normal_cdf(z)));
  } else {
    res.p_two_sided = detail::exact_mwu_p(ranks, n1, u);
  }
  return res;
}

/// Rank-based AUC (midrank ties): probability a positive outranks a negative.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), errc::length_mismatch, "auc: length mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg)++;
  require(n_pos > 0 && n_neg > 0, errc::degenerate_labels, "auc: both classes required");
  const std::vector<double> ranks = detail::midranks(scores);
  double r_pos = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) r_pos += ranks[i];
  }
  return (r_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Fixed-bin histogram on [0, 1]; the value 1.0 lands in the last bin.
inline std::vector<double> histogram_unit(std::span<const double> values, int bins) {
  require(bins >= 1, errc::bad_config, "histogram: bins must be >= 1");
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    int b = static_cast<int>(v * bins);
    b = std::clamp(b, 0, bins - 1);
    counts[b] += 1.0;
  }
  return counts;
}

inline std::vector<double> normalize_histogram(std::vector<double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total > 0.0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

}  // namespace moldiff
