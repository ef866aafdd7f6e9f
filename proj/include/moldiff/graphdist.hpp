//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "moldiff/graph.hpp"

namespace moldiff {

/// Per-feature categorical distributions over a complete graph: one
/// probability row per node and per unordered node pair. One-hot rows are the
/// degenerate case used for concrete graphs moving through the chain.
struct GraphDistribution {
  int n = 0;
  Eigen::MatrixXd node_probs;  // n x K_v
  Eigen::MatrixXd edge_probs;  // n(n-1)/2 x K_e

  static GraphDistribution zeros(int n, int kv, int ke) {
    GraphDistribution d;
    d.n = n;
    d.node_probs = Eigen::MatrixXd::Zero(n, kv);
    d.edge_probs = Eigen::MatrixXd::Zero(pair_count(n), ke);
    return d;
  }

  static GraphDistribution one_hot(const MolecularGraph& g, int kv, int ke) {
    GraphDistribution d = zeros(g.n, kv, ke);
    for (int i = 0; i < g.n; ++i) d.node_probs(i, g.nodes[i]) = 1.0;
    for (int p = 0; p < pair_count(g.n); ++p) d.edge_probs(p, g.edges[p]) = 1.0;
    return d;
  }

  MolecularGraph argmax_graph() const {
    MolecularGraph g = MolecularGraph::empty(n);
    for (int i = 0; i < n; ++i) {
      node_probs.row(i).maxCoeff(&g.nodes[i]);
    }
    for (int p = 0; p < pair_count(n); ++p) {
      edge_probs.row(p).maxCoeff(&g.edges[p]);
    }
    return g;
  }

  bool same_shape(const GraphDistribution& o) const {
    return n == o.n && node_probs.rows() == o.node_probs.rows() &&
           node_probs.cols() == o.node_probs.cols() &&
           edge_probs.rows() == o.edge_probs.rows() && edge_probs.cols() == o.edge_probs.cols();
  }

  /// Largest absolute entry difference across both feature blocks.
  double linf_distance(const GraphDistribution& o) const {
    double d = (node_probs - o.node_probs).cwiseAbs().maxCoeff();
    if (edge_probs.size() > 0) {
      d = std::max(d, (edge_probs - o.edge_probs).cwiseAbs().maxCoeff());
    }
    return d;
  }
};

/// Applies a node relabeling (old index i -> perm[i]) to both feature blocks.
inline GraphDistribution permute_distribution(const GraphDistribution& d,
                                              const std::vector<int>& perm) {
  GraphDistribution out = d;
  for (int i = 0; i < d.n; ++i) out.node_probs.row(perm[i]) = d.node_probs.row(i);
  for (int i = 0; i < d.n; ++i) {
    for (int j = i + 1; j < d.n; ++j) {
      out.edge_probs.row(pair_index(d.n, perm[i], perm[j])) =
          d.edge_probs.row(pair_index(d.n, i, j));
    }
  }
  return out;
}

}  // namespace moldiff
