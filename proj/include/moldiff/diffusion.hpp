//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Dense>

#include "moldiff/graphdist.hpp"
#include "moldiff/rng.hpp"
#include "moldiff/schedule.hpp"

namespace moldiff {

/// Draws x_t ~ Cat(Q̄_t e_{x0}): keep x0 with probability alpha_bar_t,
/// otherwise resample from the prior. t = 0 returns x0 unchanged.
inline int forward_sample(int x0, int t, const NoiseSchedule& s, FeatureSpace space, Rng& rng) {
  require(t >= 0 && t <= s.T, errc::step_out_of_range, "forward_sample: step out of range");
  if (t == 0) return x0;
  const double ab = s.alpha_bar_at(t);
  if (rng.uniform() < ab) return x0;
  const Eigen::VectorXd& pi = s.prior(space);
  return rng.categorical(std::span<const double>(pi.data(), pi.size()));
}

/// Exact Bayes posterior q(x_{t-1} | x0, x_t) of the forward chain, as a
/// probability vector over categories. t = 1 returns the point mass at x0.
inline Eigen::VectorXd posterior(int x0, int xt, int t, const NoiseSchedule& s,
                                 FeatureSpace space) {
  require(t >= 1 && t <= s.T, errc::step_out_of_range, "posterior: step out of range");
  const Eigen::VectorXd& pi = s.prior(space);
  const int k = static_cast<int>(pi.size());
  if (t == 1) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(k);
    delta(x0) = 1.0;
    return delta;
  }
  const double a = s.alpha_at(t);
  const double ab_prev = s.alpha_bar_at(t - 1);
  // (Q_t^T e_xt) .* (Qbar_{t-1} e_x0), then normalize
  Eigen::VectorXd lik = Eigen::VectorXd::Constant(k, (1.0 - a) * pi(xt));
  lik(xt) += a;
  Eigen::VectorXd pri = (1.0 - ab_prev) * pi;
  pri(x0) += ab_prev;
  Eigen::VectorXd w = lik.cwiseProduct(pri);
  const double total = w.sum();
  require(total > 0.0, errc::not_normalized, "posterior: zero mass");
  return w / total;
}

/// One unconditional reverse step: mixes the per-feature posteriors over the
/// predicted clean categories,
/// p(x_{t-1}) = sum_{x0} q(x_{t-1} | x0, x_t) p_theta(x0 | G_t).
/// Features are treated independently; Gt must be one-hot.
inline GraphDistribution reverse_step(const GraphDistribution& gt, const GraphDistribution& x0_pred,
                                      int t, const NoiseSchedule& s) {
  require(gt.same_shape(x0_pred), errc::shape_mismatch, "reverse_step: shape mismatch");
  require(t >= 1 && t <= s.T, errc::step_out_of_range, "reverse_step: step out of range");
  GraphDistribution out = gt;

  auto mix_block = [&](const Eigen::MatrixXd& xt_rows, const Eigen::MatrixXd& pred_rows,
                       Eigen::MatrixXd& out_rows, FeatureSpace space) {
    const int k = static_cast<int>(xt_rows.cols());
    for (int r = 0; r < xt_rows.rows(); ++r) {
      int xt = 0;
      xt_rows.row(r).maxCoeff(&xt);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
      for (int x0 = 0; x0 < k; ++x0) {
        const double w = pred_rows(r, x0);
        if (w <= 0.0) continue;
        acc += w * posterior(x0, xt, t, s, space);
      }
      const double total = acc.sum();
      require(total > 0.0, errc::not_normalized, "reverse_step: zero mixture mass");
      out_rows.row(r) = (acc / total).transpose();
    }
  };

  mix_block(gt.node_probs, x0_pred.node_probs, out.node_probs, FeatureSpace::node);
  mix_block(gt.edge_probs, x0_pred.edge_probs, out.edge_probs, FeatureSpace::edge);
  return out;
}

/// Draws the maximally corrupted state: every feature independently from the
/// prior of its space.
inline GraphDistribution sample_prior(int n, const NoiseSchedule& s, Rng& rng) {
  require(n >= 1, errc::bad_config, "sample_prior: n must be >= 1");
  const int kv = static_cast<int>(s.prior_v.size());
  const int ke = static_cast<int>(s.prior_e.size());
  GraphDistribution d = GraphDistribution::zeros(n, kv, ke);
  for (int i = 0; i < n; ++i) {
    const int c = rng.categorical(std::span<const double>(s.prior_v.data(), kv));
    d.node_probs(i, c) = 1.0;
  }
  for (int p = 0; p < pair_count(n); ++p) {
    const int c = rng.categorical(std::span<const double>(s.prior_e.data(), ke));
    d.edge_probs(p, c) = 1.0;
  }
  return d;
}

/// Samples a one-hot graph from independent per-feature distributions.
inline GraphDistribution sample_features(const GraphDistribution& probs, Rng& rng) {
  GraphDistribution out = GraphDistribution::zeros(
      probs.n, static_cast<int>(probs.node_probs.cols()), static_cast<int>(probs.edge_probs.cols()));
  Eigen::VectorXd row;
  for (int i = 0; i < probs.n; ++i) {
    row = probs.node_probs.row(i);
    const int c = rng.categorical(std::span<const double>(row.data(), row.size()));
    out.node_probs(i, c) = 1.0;
  }
  for (int p = 0; p < pair_count(probs.n); ++p) {
    row = probs.edge_probs.row(p);
    const int c = rng.categorical(std::span<const double>(row.data(), row.size()));
    out.edge_probs(p, c) = 1.0;
  }
  return out;
}

}  // namespace moldiff
