//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "moldiff/autodiff.hpp"
#include "moldiff/errors.hpp"
#include "moldiff/rng.hpp"

namespace moldiff {

/// Named tensors in fixed registration order; the order defines the
/// checkpoint payload layout.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols) {
    require(!index_.count(name), errc::bad_config, "duplicate parameter: " + name);
    index_[name] = static_cast<int>(values_.size());
    names_.push_back(name);
    values_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    return static_cast<int>(values_.size()) - 1;
  }

  int slot(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), errc::bad_config, "unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  int size() const { return static_cast<int>(values_.size()); }
  const std::string& name(int slot) const { return names_[slot]; }
  Eigen::MatrixXd& value(int slot) { return values_[slot]; }
  const Eigen::MatrixXd& value(int slot) const { return values_[slot]; }
  Eigen::MatrixXd& value(const std::string& name) { return values_[this->slot(name)]; }
  const Eigen::MatrixXd& value(const std::string& name) const { return values_[slot(name)]; }

  std::size_t total_entries() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& v : values_) {
      if (!v.allFinite()) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> values_;
  std::map<std::string, int> index_;
};

/// Gradient accumulator aligned with a ParamStore's slots.
class GradStore {
 public:
  explicit GradStore(const ParamStore& params) {
    grads_.reserve(params.size());
    for (int s = 0; s < params.size(); ++s) {
      grads_.emplace_back(
          Eigen::MatrixXd::Zero(params.value(s).rows(), params.value(s).cols()));
    }
  }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }

  void add(const GradStore& other) {
    for (std::size_t s = 0; s < grads_.size(); ++s) grads_[s] += other.grads_[s];
  }

  Eigen::MatrixXd& operator[](int slot) { return grads_[slot]; }
  const Eigen::MatrixXd& operator[](int slot) const { return grads_[slot]; }
  int size() const { return static_cast<int>(grads_.size()); }

 private:
  std::vector<Eigen::MatrixXd> grads_;
};

/// Lazily registers parameters as leaf nodes of a tape and harvests their
/// gradients after the backward pass.
class TapeParams {
 public:
  TapeParams(Tape& tape, const ParamStore& params)
      : tape_(&tape), params_(&params), ids_(params.size(), -1) {}

  int node(int slot) {
    if (ids_[slot] < 0) ids_[slot] = tape_->leaf(&params_->value(slot));
    return ids_[slot];
  }

  void accumulate_into(GradStore& grads) const {
    for (std::size_t s = 0; s < ids_.size(); ++s) {
      if (ids_[s] < 0) continue;
      const Eigen::MatrixXd& g = tape_->grad(ids_[s]);
      if (g.size() > 0) grads[static_cast<int>(s)] += g;
    }
  }

 private:
  Tape* tape_;
  const ParamStore* params_;
  std::vector<int> ids_;
};

inline void init_xavier(Eigen::MatrixXd& w, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      w(i, j) = stddev * rng.normal();
    }
  }
}

/// Adaptive-moment optimizer; beta1 = 0.9, beta2 = 0.999, no weight decay.
class Adam {
 public:
  Adam(const ParamStore& params, double lr) : lr_(lr) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (int s = 0; s < params.size(); ++s) {
      m_.emplace_back(Eigen::MatrixXd::Zero(params.value(s).rows(), params.value(s).cols()));
      v_.emplace_back(Eigen::MatrixXd::Zero(params.value(s).rows(), params.value(s).cols()));
    }
  }

  void step(ParamStore& params, const GradStore& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (int s = 0; s < params.size(); ++s) {
      m_[s] = beta1_ * m_[s] + (1.0 - beta1_) * grads[s];
      v_[s] = (beta2_ * v_[s].array() + (1.0 - beta2_) * grads[s].array().square()).matrix();
      params.value(s).array() -=
          lr_ * (m_[s].array() / bc1) / ((v_[s].array() / bc2).sqrt() + eps_);
    }
  }

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

/// In-tape linear layer: x (n x in) * W (in x out) + broadcast bias (1 x out).
struct LinearSlots {
  int w = -1;
  int b = -1;
};

inline LinearSlots add_linear(ParamStore& params, const std::string& name, int in, int out) {
  LinearSlots s;
  s.w = params.add(name + ".w", in, out);
  s.b = params.add(name + ".b", 1, out);
  return s;
}

inline int apply_linear(Tape& tape, TapeParams& tp, const LinearSlots& lin, int x) {
  return tape.add_rowvec(tape.matmul(x, tp.node(lin.w)), tp.node(lin.b));
}

inline void init_linear(ParamStore& params, const LinearSlots& lin, Rng& rng) {
  init_xavier(params.value(lin.w), rng);
  params.value(lin.b).setZero();
}

}  // namespace moldiff
