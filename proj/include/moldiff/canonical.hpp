//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "moldiff/graph.hpp"

namespace moldiff {

namespace detail {

/// One round of neighborhood refinement: the new color of a node is its old
/// color plus the sorted multiset of (edge category, neighbor color) over
/// non-none incident edges. Returns dense colors ordered lexicographically by
/// signature, so equal partitions map to equal color vectors regardless of
/// input node order.
inline std::vector<int> refine_colors(const MolecularGraph& g, const std::vector<int>& colors) {
  using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
  std::vector<Signature> sig(g.n);
  for (int i = 0; i < g.n; ++i) {
    sig[i].first = colors[i];
    for (int j = 0; j < g.n; ++j) {
      if (j == i) continue;
      const int e = g.edge(i, j);
      if (e != kBondNone) sig[i].second.emplace_back(e, colors[j]);
    }
    std::sort(sig[i].second.begin(), sig[i].second.end());
  }
  std::map<Signature, int> order;
  for (const auto& s : sig) order.emplace(s, 0);
  int next = 0;
  for (auto& [key, val] : order) val = next++;
  std::vector<int> out(g.n);
  for (int i = 0; i < g.n; ++i) out[i] = order.at(sig[i]);
  return out;
}

inline std::vector<int> refine_to_stable(const MolecularGraph& g, std::vector<int> colors) {
  while (true) {
    std::vector<int> next = refine_colors(g, colors);
    if (next == colors) return colors;
    colors = std::move(next);
  }
}

inline int count_colors(const std::vector<int>& colors) {
  int m = 0;
  for (int c : colors) m = std::max(m, c + 1);
  return m;
}

inline std::string serialize_with_order(const MolecularGraph& g, const std::vector<int>& rank) {
  std::vector<int> inv(g.n);
  for (int i = 0; i < g.n; ++i) inv[rank[i]] = i;
  std::string s = std::to_string(g.n) + "|";
  for (int r = 0; r < g.n; ++r) s += std::to_string(g.nodes[inv[r]]) + ",";
  s += "|";
  std::vector<std::string> edges;
  for (int a = 0; a < g.n; ++a) {
    for (int b = a + 1; b < g.n; ++b) {
      const int e = g.edge(inv[a], inv[b]);
      if (e != kBondNone) {
        edges.push_back(std::to_string(a) + "-" + std::to_string(b) + ":" + std::to_string(e));
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  for (const auto& e : edges) s += e + ";";
  return s;
}

// Recursive individualization: when refinement stalls with tied colors, try
// each member of the first tied cell as a fresh singleton and keep the
// lexicographically smallest serialization.
inline void canonical_search(const MolecularGraph& g, std::vector<int> colors, std::string& best,
                             std::vector<int>& best_rank, bool& have_best) {
  colors = refine_to_stable(g, colors);
  const int m = count_colors(colors);
  if (m == g.n) {
    std::string key = serialize_with_order(g, colors);
    if (!have_best || key < best) {
      best = std::move(key);
      best_rank = colors;
      have_best = true;
    }
    return;
  }
  // first color class with more than one member
  int target = -1;
  std::vector<int> cell_size(m, 0);
  for (int c : colors) ++cell_size[c];
  for (int c = 0; c < m; ++c) {
    if (cell_size[c] > 1) {
      target = c;
      break;
    }
  }
  for (int i = 0; i < g.n; ++i) {
    if (colors[i] != target) continue;
    std::vector<int> branched(g.n);
    // individualize node i below its former peers, keep relative order dense
    for (int k = 0; k < g.n; ++k) {
      branched[k] = colors[k] * 2 + (colors[k] == target && k != i ? 1 : 0);
    }
    canonical_search(g, std::move(branched), best, best_rank, have_best);
  }
}

}  // namespace detail

/// Canonical node ranks (old index -> canonical position) via iterative
/// neighborhood refinement with deterministic individualization on ties.
inline std::vector<int> canonical_ranks(const MolecularGraph& g) {
  std::string best;
  std::vector<int> best_rank;
  bool have_best = false;
  detail::canonical_search(g, g.nodes, best, best_rank, have_best);
  return best_rank;
}

/// Isomorphism-invariant identity string: equal keys for isomorphic graphs.
inline std::string canonical_key(const MolecularGraph& g) {
  std::string best;
  std::vector<int> best_rank;
  bool have_best = false;
  detail::canonical_search(g, g.nodes, best, best_rank, have_best);
  return best;
}

}  // namespace moldiff
