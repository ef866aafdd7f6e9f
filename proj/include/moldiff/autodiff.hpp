//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "moldiff/errors.hpp"

namespace moldiff {

/// Reverse-mode autodiff over dense matrices. Nodes are appended in forward
/// order and hold either owned values or pointers to external storage (used
/// for parameters and differentiable inputs, avoiding copies per forward).
class Tape {
 public:
  using Matrix = Eigen::MatrixXd;

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& val(int id) const { return *nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires; }

  int constant(Matrix v) { return push(std::move(v), false, {}); }

  /// External matrix, not differentiated. Must outlive the tape.
  int constant_ref(const Matrix* v) { return push_ref(v, false); }

  /// External matrix participating in differentiation. Must outlive the tape.
  int leaf(const Matrix* v) { return push_ref(v, true); }

  int add(int a, int b) {
    check_same_shape(a, b, "add");
    return push(val(a) + val(b), requires_grad(a) || requires_grad(b), [a, b](Tape& t, int self) {
      t.accum(a, t.grad(self));
      t.accum(b, t.grad(self));
    });
  }

  int sub(int a, int b) {
    check_same_shape(a, b, "sub");
    return push(val(a) - val(b), requires_grad(a) || requires_grad(b), [a, b](Tape& t, int self) {
      t.accum(a, t.grad(self));
      t.accum(b, -t.grad(self));
    });
  }

  int mul(int a, int b) {
    check_same_shape(a, b, "mul");
    return push(val(a).cwiseProduct(val(b)), requires_grad(a) || requires_grad(b),
                [a, b](Tape& t, int self) {
                  t.accum(a, t.grad(self).cwiseProduct(t.val(b)));
                  t.accum(b, t.grad(self).cwiseProduct(t.val(a)));
                });
  }

  int matmul(int a, int b) {
    require(val(a).cols() == val(b).rows(), errc::shape_mismatch, "matmul: inner dim mismatch");
    return push(val(a) * val(b), requires_grad(a) || requires_grad(b),
                [a, b](Tape& t, int self) {
                  t.accum(a, t.grad(self) * t.val(b).transpose());
                  t.accum(b, t.val(a).transpose() * t.grad(self));
                });
  }

  int scale(int a, double s) {
    return push(val(a) * s, requires_grad(a),
                [a, s](Tape& t, int self) { t.accum(a, t.grad(self) * s); });
  }

  int add_scalar(int a, double s) {
    return push((val(a).array() + s).matrix(), requires_grad(a),
                [a](Tape& t, int self) { t.accum(a, t.grad(self)); });
  }

  /// (n x d) + broadcast row (1 x d).
  int add_rowvec(int a, int b) {
    require(val(b).rows() == 1 && val(a).cols() == val(b).cols(), errc::shape_mismatch,
            "add_rowvec: bad shapes");
    Matrix out = val(a);
    out.rowwise() += val(b).row(0);
    return push(std::move(out), requires_grad(a) || requires_grad(b), [a, b](Tape& t, int self) {
      t.accum(a, t.grad(self));
      t.accum(b, t.grad(self).colwise().sum());
    });
  }

  /// (n x d) .* broadcast row (1 x d).
  int mul_rowvec(int a, int b) {
    require(val(b).rows() == 1 && val(a).cols() == val(b).cols(), errc::shape_mismatch,
            "mul_rowvec: bad shapes");
    Matrix out = (val(a).array().rowwise() * val(b).row(0).array()).matrix();
    return push(std::move(out), requires_grad(a) || requires_grad(b), [a, b](Tape& t, int self) {
      t.accum(a, (t.grad(self).array().rowwise() * t.val(b).row(0).array()).matrix());
      t.accum(b, (t.grad(self).cwiseProduct(t.val(a))).colwise().sum());
    });
  }

  int sigmoid(int a) {
    Matrix out = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& y = t.val(self);
      t.accum(a, t.grad(self).cwiseProduct(y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y)));
    });
  }

  int tanh_fn(int a) {
    Matrix out = val(a).array().tanh().matrix();
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& y = t.val(self);
      t.accum(a, t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
    });
  }

  int silu(int a) {
    Matrix out = val(a).unaryExpr([](double x) { return x / (1.0 + std::exp(-x)); });
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& x = t.val(a);
      Matrix d = x.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
      t.accum(a, t.grad(self).cwiseProduct(d));
    });
  }

  /// log(sigmoid(x)), computed stably as -softplus(-x).
  int logsigmoid(int a) {
    Matrix out = val(a).unaryExpr([](double x) {
      return -(std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(-x))));
    });
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& x = t.val(a);
      Matrix d = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(v)); });  // sigma(-x)
      t.accum(a, t.grad(self).cwiseProduct(d));
    });
  }

  int softmax_rows(int a) {
    Matrix out = val(a);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double m = out.row(r).maxCoeff();
      out.row(r) = (out.row(r).array() - m).exp().matrix();
      out.row(r) /= out.row(r).sum();
    }
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& y = t.val(self);
      const Matrix& g = t.grad(self);
      Matrix gx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        gx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      t.accum(a, gx);
    });
  }

  int log_softmax_rows(int a) {
    Matrix out = val(a);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double m = out.row(r).maxCoeff();
      const double lse = m + std::log((out.row(r).array() - m).exp().sum());
      out.row(r) = (out.row(r).array() - lse).matrix();
    }
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& y = t.val(self);
      const Matrix& g = t.grad(self);
      Matrix gx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double gsum = g.row(r).sum();
        gx.row(r) = g.row(r) - (y.row(r).array().exp() * gsum).matrix();
      }
      t.accum(a, gx);
    });
  }

  /// Row-wise normalization to zero mean and unit variance (no affine).
  int layer_norm_rows(int a) {
    constexpr double kEps = 1e-5;
    const Matrix& x = val(a);
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mu = x.row(r).mean();
      const double var = (x.row(r).array() - mu).square().mean();
      out.row(r) = ((x.row(r).array() - mu) / std::sqrt(var + kEps)).matrix();
    }
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      constexpr double kEpsB = 1e-5;
      const Matrix& x = t.val(a);
      const Matrix& y = t.val(self);
      const Matrix& g = t.grad(self);
      Matrix gx(x.rows(), x.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kEpsB);
        const double gmean = g.row(r).mean();
        const double gydot = g.row(r).cwiseProduct(y.row(r)).mean();
        gx.row(r) = (inv * (g.row(r).array() - gmean - y.row(r).array() * gydot)).matrix();
      }
      t.accum(a, gx);
    });
  }

  int transpose(int a) {
    return push(val(a).transpose(), requires_grad(a),
                [a](Tape& t, int self) { t.accum(a, t.grad(self).transpose()); });
  }

  int sum_all(int a) {
    Matrix out(1, 1);
    out(0, 0) = val(a).sum();
    return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
      const Matrix& x = t.val(a);
      t.accum(a, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
    });
  }

  /// Spreads an upper-triangular pair vector (M x 1) into the symmetric
  /// n x n matrix with zero diagonal.
  int sym_from_upper(int a, int n) {
    require(val(a).cols() == 1 && val(a).rows() == static_cast<Eigen::Index>(n) * (n - 1) / 2,
            errc::shape_mismatch, "sym_from_upper: bad shape");
    const Matrix& v = val(a);
    Matrix out = Matrix::Zero(n, n);
    int p = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++p) {
        out(i, j) = out(j, i) = v(p, 0);
      }
    }
    return push(std::move(out), requires_grad(a), [a, n](Tape& t, int self) {
      const Matrix& gs = t.grad(self);
      Matrix gv(static_cast<Eigen::Index>(n) * (n - 1) / 2, 1);
      int q = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++q) {
          gv(q, 0) = gs(i, j) + gs(j, i);
        }
      }
      t.accum(a, gv);
    });
  }

  /// Extracts per-pair symmetrized entries (S_ij + S_ji) / 2 as an M x 1 vector.
  int upper_mean_sym(int a) {
    const Matrix& s = val(a);
    require(s.rows() == s.cols(), errc::shape_mismatch, "upper_mean_sym: matrix must be square");
    const int n = static_cast<int>(s.rows());
    Matrix out(static_cast<Eigen::Index>(n) * (n - 1) / 2, 1);
    int p = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++p) {
        out(p, 0) = 0.5 * (s(i, j) + s(j, i));
      }
    }
    return push(std::move(out), requires_grad(a), [a, n](Tape& t, int self) {
      const Matrix& gu = t.grad(self);
      Matrix gs = Matrix::Zero(n, n);
      int q = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++q) {
          gs(i, j) += 0.5 * gu(q, 0);
          gs(j, i) += 0.5 * gu(q, 0);
        }
      }
      t.accum(a, gs);
    });
  }

  /// Seeds the gradient of a 1 x 1 loss node and propagates to all leaves.
  void backward(int loss_id) {
    require(val(loss_id).rows() == 1 && val(loss_id).cols() == 1, errc::shape_mismatch,
            "backward: loss must be scalar");
    ensure_grad(loss_id);
    nodes_[loss_id].grad(0, 0) = 1.0;
    for (int id = loss_id; id >= 0; --id) {
      Node& node = nodes_[id];
      if (!node.requires || node.grad.size() == 0 || !node.back) continue;
      node.back(*this, id);
    }
  }

 private:
  struct Node {
    Matrix storage;
    const Matrix* value = nullptr;
    Matrix grad;
    bool requires = false;
    std::function<void(Tape&, int)> back;
  };

  // deque keeps node addresses stable so value pointers into storage survive growth
  std::deque<Node> nodes_;

  int push(Matrix v, bool req, std::function<void(Tape&, int)> back) {
    Node node;
    node.storage = std::move(v);
    node.value = &node.storage;
    node.requires = req;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    // storage moved; re-point at the final location
    nodes_.back().value = &nodes_.back().storage;
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_ref(const Matrix* v, bool req) {
    Node node;
    node.value = v;
    node.requires = req;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void ensure_grad(int id) {
    Node& node = nodes_[id];
    if (node.grad.size() == 0) {
      node.grad = Matrix::Zero(node.value->rows(), node.value->cols());
    }
  }

  template <typename Derived>
  void accum(int id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].requires) return;
    ensure_grad(id);
    nodes_[id].grad += g;
  }

  void check_same_shape(int a, int b, const char* op) const {
    require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
            errc::shape_mismatch, std::string(op) + ": shape mismatch");
  }
};

}  // namespace moldiff
