//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "moldiff/errors.hpp"
#include "moldiff/vocab.hpp"

namespace moldiff {

enum class ScheduleKind { uniform, marginal };

enum class FeatureSpace { node, edge };

inline const char* schedule_kind_name(ScheduleKind k) {
  return k == ScheduleKind::uniform ? "uniform" : "marginal";
}

inline ScheduleKind schedule_kind_from_name(const std::string& s) {
  if (s == "uniform") return ScheduleKind::uniform;
  if (s == "marginal") return ScheduleKind::marginal;
  raise(errc::bad_config, "unknown schedule kind: " + s);
}

/// Per-step retention coefficients and limit distributions of the forward
/// corruption chain. Immutable after construction.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> alpha;      // alpha[t-1] is the step-t retention, t = 1..T
  std::vector<double> alpha_bar;  // alpha_bar[t] = prod_{s<=t} alpha_s, alpha_bar[0] = 1
  ScheduleKind kind = ScheduleKind::uniform;
  Eigen::VectorXd prior_v;  // limit distribution over node categories
  Eigen::VectorXd prior_e;  // limit distribution over edge categories
  double snr_min = 0.05;
  double snr_max = 5.0;

  double alpha_at(int t) const {
    require(t >= 1 && t <= T, errc::step_out_of_range, "alpha: step out of range");
    return alpha[t - 1];
  }
  double alpha_bar_at(int t) const {
    require(t >= 0 && t <= T, errc::step_out_of_range, "alpha_bar: step out of range");
    return alpha_bar[t];
  }
  const Eigen::VectorXd& prior(FeatureSpace space) const {
    return space == FeatureSpace::node ? prior_v : prior_e;
  }

  std::uint64_t digest() const {
    std::uint64_t h = fnv1a(schedule_kind_name(kind));
    h = fnv1a(&T, sizeof(T), h);
    h = fnv1a(alpha.data(), alpha.size() * sizeof(double), h);
    h = fnv1a(prior_v.data(), static_cast<std::size_t>(prior_v.size()) * sizeof(double), h);
    h = fnv1a(prior_e.data(), static_cast<std::size_t>(prior_e.size()) * sizeof(double), h);
    h = fnv1a(&snr_min, sizeof(double), h);
    h = fnv1a(&snr_max, sizeof(double), h);
    return h;
  }

  nlohmann::json to_json() const {
    return {{"kind", schedule_kind_name(kind)},
            {"T", T},
            {"alpha", alpha},
            {"prior_v", std::vector<double>(prior_v.data(), prior_v.data() + prior_v.size())},
            {"prior_e", std::vector<double>(prior_e.data(), prior_e.data() + prior_e.size())},
            {"snr_clip", {snr_min, snr_max}}};
  }

  static NoiseSchedule from_json(const nlohmann::json& j) {
    NoiseSchedule s;
    s.kind = schedule_kind_from_name(j.at("kind").get<std::string>());
    s.T = j.at("T").get<int>();
    s.alpha = j.at("alpha").get<std::vector<double>>();
    require(static_cast<int>(s.alpha.size()) == s.T, errc::bad_config,
            "schedule json: alpha length != T");
    const auto pv = j.at("prior_v").get<std::vector<double>>();
    const auto pe = j.at("prior_e").get<std::vector<double>>();
    s.prior_v = Eigen::Map<const Eigen::VectorXd>(pv.data(), pv.size());
    s.prior_e = Eigen::Map<const Eigen::VectorXd>(pe.data(), pe.size());
    s.snr_min = j.at("snr_clip").at(0).get<double>();
    s.snr_max = j.at("snr_clip").at(1).get<double>();
    s.alpha_bar.assign(s.T + 1, 1.0);
    for (int t = 1; t <= s.T; ++t) s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
    return s;
  }
};

struct CategoryMarginals {
  Eigen::VectorXd node;  // training-set frequencies over node categories
  Eigen::VectorXd edge;
};

/// Cosine retention schedule with clipped per-step coefficients.
/// alpha_bar follows cos^2(((t/T + s)/(1 + s)) * pi/2), renormalized so that
/// alpha_bar(0) = 1, with s = 0.008; per-step alphas are clipped to
/// [0.001, 1] and alpha_bar recomputed from the clipped values.
inline NoiseSchedule build_schedule(int T, ScheduleKind kind,
                                    const std::optional<CategoryMarginals>& marginals,
                                    int num_node_categories, int num_edge_categories,
                                    double snr_min = 0.05, double snr_max = 5.0) {
  require(T >= 1, errc::bad_config, "build_schedule: T must be >= 1");
  if (kind == ScheduleKind::marginal) {
    require(marginals.has_value(), errc::missing_marginals,
            "build_schedule: marginal kind requires category frequencies");
  }
  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  s.snr_min = snr_min;
  s.snr_max = snr_max;

  const double shift = 0.008;
  auto raw_bar = [&](double t) {
    const double x = ((t / T + shift) / (1.0 + shift)) * M_PI / 2.0;
    const double c = std::cos(x);
    return c * c;
  };
  const double norm = raw_bar(0.0);
  s.alpha.resize(T);
  s.alpha_bar.assign(T + 1, 1.0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double bar = raw_bar(static_cast<double>(t)) / norm;
    double a = bar / prev;
    a = std::clamp(a, 0.001, 1.0);
    s.alpha[t - 1] = a;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * a;
    prev = bar;
  }

  if (kind == ScheduleKind::uniform) {
    s.prior_v = Eigen::VectorXd::Constant(num_node_categories, 1.0 / num_node_categories);
    s.prior_e = Eigen::VectorXd::Constant(num_edge_categories, 1.0 / num_edge_categories);
  } else {
    require(marginals->node.size() == num_node_categories &&
                marginals->edge.size() == num_edge_categories,
            errc::bad_config, "build_schedule: marginal size mismatch");
    s.prior_v = marginals->node / marginals->node.sum();
    s.prior_e = marginals->edge / marginals->edge.sum();
  }
  return s;
}

/// Column-stochastic single-step transition matrix
/// Q_t = alpha_t * I + (1 - alpha_t) * pi * 1^T.
inline Eigen::MatrixXd transition_matrix(const NoiseSchedule& s, int t, FeatureSpace space) {
  require(t >= 1 && t <= s.T, errc::step_out_of_range, "transition_matrix: step out of range");
  const Eigen::VectorXd& pi = s.prior(space);
  const int k = static_cast<int>(pi.size());
  const double a = s.alpha_at(t);
  Eigen::MatrixXd q = (1.0 - a) * pi * Eigen::RowVectorXd::Ones(k);
  q += a * Eigen::MatrixXd::Identity(k, k);
  return q;
}

/// Cumulative transition Q̄_t = Q_t ... Q_1 in closed form:
/// alpha_bar_t * I + (1 - alpha_bar_t) * pi * 1^T. Q̄_0 = I.
inline Eigen::MatrixXd cumulative_matrix(const NoiseSchedule& s, int t, FeatureSpace space) {
  require(t >= 0 && t <= s.T, errc::step_out_of_range, "cumulative_matrix: step out of range");
  const Eigen::VectorXd& pi = s.prior(space);
  const int k = static_cast<int>(pi.size());
  const double ab = s.alpha_bar_at(t);
  Eigen::MatrixXd q = (1.0 - ab) * pi * Eigen::RowVectorXd::Ones(k);
  q += ab * Eigen::MatrixXd::Identity(k, k);
  return q;
}

/// Schedule-derived loss weight: alpha_bar / (1 - alpha_bar), clipped.
inline double snr_weight(const NoiseSchedule& s, int t) {
  require(t >= 1 && t <= s.T, errc::step_out_of_range, "snr_weight: step out of range");
  const double ab = s.alpha_bar_at(t);
  const double denom = 1.0 - ab;
  const double snr = denom <= 0.0 ? s.snr_max : ab / denom;
  return std::clamp(snr, s.snr_min, s.snr_max);
}

}  // namespace moldiff
