//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "moldiff/errors.hpp"
#include "moldiff/vocab.hpp"

namespace moldiff {

inline int pair_count(int n) { return n * (n - 1) / 2; }

/// Dense index of the unordered pair (i, j), i < j, in row-major
/// upper-triangular order.
inline int pair_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> pair_at(int n, int p) {
  int i = 0;
  int row = n - 1;
  while (p >= row) {
    p -= row;
    --row;
    ++i;
  }
  return {i, i + 1 + p};
}

/// Heavy-atom molecular graph in complete-graph form. `edges` holds one
/// category per unordered node pair (kBondNone for non-bonds); hydrogens are
/// implicit and never appear as nodes.
struct MolecularGraph {
  int n = 0;
  std::vector<int> nodes;  // node category indices, length n
  std::vector<int> edges;  // edge category indices, length n(n-1)/2

  int edge(int i, int j) const { return edges[pair_index(n, i, j)]; }
  void set_edge(int i, int j, int category) { edges[pair_index(n, i, j)] = category; }

  static MolecularGraph empty(int n_nodes) {
    MolecularGraph g;
    g.n = n_nodes;
    g.nodes.assign(n_nodes, 0);
    g.edges.assign(pair_count(n_nodes), kBondNone);
    return g;
  }

  bool operator==(const MolecularGraph& o) const {
    return n == o.n && nodes == o.nodes && edges == o.edges;
  }
};

/// Relabels nodes: node at old index i moves to index perm[i].
inline MolecularGraph permute_graph(const MolecularGraph& g, const std::vector<int>& perm) {
  MolecularGraph out = MolecularGraph::empty(g.n);
  for (int i = 0; i < g.n; ++i) out.nodes[perm[i]] = g.nodes[i];
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      out.edges[pair_index(g.n, perm[i], perm[j])] = g.edge(i, j);
    }
  }
  return out;
}

/// Sum of bond orders over non-none incident edges.
inline int total_bond_order(const MolecularGraph& g, int i) {
  int total = 0;
  for (int j = 0; j < g.n; ++j) {
    if (j == i) continue;
    total += g.edge(i, j);  // order equals category index
  }
  return total;
}

/// Connectivity over non-none edges. A single node is connected.
inline bool is_connected(const MolecularGraph& g) {
  if (g.n <= 1) return true;
  std::vector<char> seen(g.n, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < g.n; ++j) {
      if (j == i || seen[j] || g.edge(i, j) == kBondNone) continue;
      seen[j] = 1;
      ++count;
      stack.push_back(j);
    }
  }
  return count == g.n;
}

/// Chemical plausibility: every node's total bond order must not exceed an
/// allowed valence for its category, and the bond graph must be connected
/// (multi-fragment outputs count as invalid). Total function, never throws.
inline bool valence_check(const MolecularGraph& g, const Vocabulary& vocab) {
  if (g.n < 1) return false;
  if (static_cast<int>(g.nodes.size()) != g.n ||
      static_cast<int>(g.edges.size()) != pair_count(g.n)) {
    return false;
  }
  for (int i = 0; i < g.n; ++i) {
    if (g.nodes[i] < 0 || g.nodes[i] >= vocab.num_node_categories()) return false;
    const int total = total_bond_order(g, i);
    const auto& allowed = vocab.allowed_valences(g.nodes[i]);
    bool ok = false;
    for (int v : allowed) {
      if (total <= v) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  return is_connected(g);
}

/// Graph JSON: {"n": int, "nodes": [[symbol, charge], ...],
/// "edges": [[i, j, order], ...]} listing only non-none edges with i < j.
inline nlohmann::json graph_to_json(const MolecularGraph& g, const Vocabulary& vocab) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int idx : g.nodes) {
    const auto& c = vocab.node(idx);
    nodes.push_back({c.symbol, c.charge});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      int e = g.edge(i, j);
      if (e != kBondNone) edges.push_back({i, j, e});
    }
  }
  return {{"n", g.n}, {"nodes", nodes}, {"edges", edges}};
}

inline MolecularGraph graph_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  const int n = j.at("n").get<int>();
  require(n >= 1, errc::invalid_graph, "graph json: n must be >= 1");
  MolecularGraph g = MolecularGraph::empty(n);
  const auto& nodes = j.at("nodes");
  require(static_cast<int>(nodes.size()) == n, errc::invalid_graph,
          "graph json: node list length mismatch");
  for (int i = 0; i < n; ++i) {
    const std::string symbol = nodes.at(i).at(0).get<std::string>();
    const int charge = nodes.at(i).at(1).get<int>();
    const int idx = vocab.node_index(symbol, charge);
    require(idx >= 0, errc::unknown_element,
            "graph json: category not in vocabulary: " + symbol);
    g.nodes[i] = idx;
  }
  for (const auto& e : j.at("edges")) {
    const int a = e.at(0).get<int>();
    const int b = e.at(1).get<int>();
    const int order = e.at(2).get<int>();
    require(a >= 0 && b >= 0 && a < n && b < n && a != b, errc::invalid_graph,
            "graph json: edge endpoint out of range");
    require(order >= 1 && order <= 3, errc::invalid_graph, "graph json: bad bond order");
    g.set_edge(a, b, order);
  }
  return g;
}

}  // namespace moldiff
