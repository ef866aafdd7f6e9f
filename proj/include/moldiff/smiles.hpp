//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "moldiff/canonical.hpp"
#include "moldiff/graph.hpp"
#include "moldiff/vocab.hpp"

namespace moldiff {

namespace detail {

struct SmilesParser {
  std::string_view text;
  std::size_t pos = 0;
  const Vocabulary& vocab;

  std::vector<int> nodes;
  std::vector<std::tuple<int, int, int>> bonds;  // (i, j, order)
  std::vector<int> branch_stack;
  std::map<int, std::pair<int, int>> open_rings;  // digit -> (node, spec order or -1)

  int prev = -1;
  int pending_order = -1;  // bond symbol seen but not yet consumed

  explicit SmilesParser(std::string_view s, const Vocabulary& v) : text(s), vocab(v) {}

  [[noreturn]] void fail(errc code, const std::string& msg) const {
    raise(code, "SMILES: " + msg + " at position " + std::to_string(pos));
  }

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() { return text[pos++]; }

  void add_bond(int i, int j, int order) {
    if (i == j) fail(errc::unsupported_token, "bond from atom to itself");
    for (const auto& [a, b, o] : bonds) {
      if ((a == i && b == j) || (a == j && b == i)) {
        fail(errc::unsupported_token, "duplicate bond between atoms");
      }
    }
    bonds.emplace_back(i, j, order);
  }

  int lookup(const std::string& symbol, int charge) {
    const int idx = vocab.node_index(symbol, charge);
    if (idx < 0) {
      fail(errc::unknown_element, "category not in vocabulary: " + symbol +
                                      (charge ? (charge > 0 ? "+" : "-") : ""));
    }
    return idx;
  }

  void attach(int atom) {
    if (prev >= 0) {
      add_bond(prev, atom, pending_order < 0 ? kBondSingle : pending_order);
    } else if (pending_order >= 0) {
      fail(errc::unsupported_token, "bond with no preceding atom");
    }
    pending_order = -1;
    prev = atom;
  }

  void parse_bare_atom() {
    std::string symbol(1, take());
    if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
      // two-letter organic-subset symbols (Cl, Br)
      std::string two = symbol + peek();
      if (two == "Cl" || two == "Br") {
        symbol = two;
        take();
      }
    }
    const int atom = static_cast<int>(nodes.size());
    nodes.push_back(lookup(symbol, 0));
    attach(atom);
  }

  void parse_bracket_atom() {
    take();  // '['
    if (done()) fail(errc::unsupported_token, "unterminated bracket atom");
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      fail(errc::unsupported_token, "isotope specifications are not supported");
    }
    if (!std::isupper(static_cast<unsigned char>(peek()))) {
      fail(errc::unsupported_token, "aromatic or malformed bracket atom");
    }
    std::string symbol(1, take());
    if (!done() && std::islower(static_cast<unsigned char>(peek()))) symbol += take();
    int charge = 0;
    // optional hydrogen count: hydrogens stay implicit, the count is dropped
    if (!done() && peek() == 'H') {
      take();
      while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) take();
    }
    if (!done() && (peek() == '+' || peek() == '-')) {
      const char sign = take();
      int magnitude = 1;
      if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = take() - '0';
      } else {
        while (!done() && peek() == sign) {
          take();
          ++magnitude;
        }
      }
      charge = sign == '+' ? magnitude : -magnitude;
    }
    if (!done() && (peek() == '@' || peek() == ':')) {
      fail(errc::unsupported_token, "stereo markers and atom maps are not supported");
    }
    if (done() || peek() != ']') fail(errc::unsupported_token, "expected ']'");
    take();
    const int atom = static_cast<int>(nodes.size());
    nodes.push_back(lookup(symbol, charge));
    attach(atom);
  }

  void parse_ring_closure(int digit) {
    if (prev < 0) fail(errc::unsupported_token, "ring closure before any atom");
    const int spec = pending_order;
    pending_order = -1;
    auto it = open_rings.find(digit);
    if (it == open_rings.end()) {
      open_rings[digit] = {prev, spec};
      return;
    }
    const auto [other, other_spec] = it->second;
    open_rings.erase(it);
    int order = kBondSingle;
    if (spec >= 0 && other_spec >= 0 && spec != other_spec) {
      fail(errc::unsupported_token, "conflicting ring bond orders");
    }
    if (spec >= 0) order = spec;
    if (other_spec >= 0) order = other_spec;
    add_bond(other, prev, order);
  }

  MolecularGraph run() {
    if (text.empty()) raise(errc::empty_input, "SMILES: empty input");
    while (!done()) {
      const char c = peek();
      if (std::isupper(static_cast<unsigned char>(c))) {
        parse_bare_atom();
      } else if (c == '[') {
        parse_bracket_atom();
      } else if (c == '-') {
        take();
        pending_order = kBondSingle;
      } else if (c == '=') {
        take();
        pending_order = kBondDouble;
      } else if (c == '#') {
        take();
        pending_order = kBondTriple;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        take();
        parse_ring_closure(c - '0');
      } else if (c == '%') {
        take();
        if (pos + 1 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])) ||
            !std::isdigit(static_cast<unsigned char>(text[pos + 1]))) {
          fail(errc::unsupported_token, "malformed %nn ring closure");
        }
        const int digit = (take() - '0') * 10 + (take() - '0');
        parse_ring_closure(digit);
      } else if (c == '(') {
        take();
        if (prev < 0) fail(errc::unbalanced_parenthesis, "branch before any atom");
        if (pending_order >= 0) fail(errc::unsupported_token, "bond before '('");
        branch_stack.push_back(prev);
      } else if (c == ')') {
        take();
        if (branch_stack.empty()) fail(errc::unbalanced_parenthesis, "unmatched ')'");
        if (pending_order >= 0) fail(errc::unsupported_token, "dangling bond before ')'");
        prev = branch_stack.back();
        branch_stack.pop_back();
      } else if (std::islower(static_cast<unsigned char>(c))) {
        fail(errc::unsupported_token, "aromatic atoms are not supported (kekulized input only)");
      } else {
        fail(errc::unsupported_token, std::string("unsupported character '") + c + "'");
      }
    }
    if (!branch_stack.empty()) raise(errc::unbalanced_parenthesis, "SMILES: unclosed '('");
    if (!open_rings.empty()) {
      raise(errc::unclosed_ring,
            "SMILES: unclosed ring bond " + std::to_string(open_rings.begin()->first));
    }
    if (pending_order >= 0) raise(errc::unsupported_token, "SMILES: trailing bond");

    MolecularGraph g = MolecularGraph::empty(static_cast<int>(nodes.size()));
    g.nodes = nodes;
    for (const auto& [i, j, o] : bonds) g.set_edge(i, j, o);
    return g;
  }
};

struct SmilesWriter {
  const MolecularGraph& g;
  const Vocabulary& vocab;
  std::vector<int> rank;
  std::vector<char> visited;
  std::vector<std::vector<int>> tree_children;
  std::vector<std::vector<std::pair<int, int>>> digits;  // per node: (digit, order; -1 on closing side)
  std::set<int> paired_edges;
  int next_digit = 1;
  std::string out;

  SmilesWriter(const MolecularGraph& graph, const Vocabulary& v)
      : g(graph), vocab(v), rank(canonical_ranks(graph)), visited(graph.n, 0),
        tree_children(graph.n), digits(graph.n) {}

  std::vector<int> neighbors_in_rank_order(int u) const {
    std::vector<int> nbrs;
    for (int v = 0; v < g.n; ++v) {
      if (v != u && g.edge(u, v) != kBondNone) nbrs.push_back(v);
    }
    std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) { return rank[a] < rank[b]; });
    return nbrs;
  }

  // Pre-pass: fix the DFS tree and assign ring-closure digit pairs. The
  // earlier-visited endpoint opens the digit and carries the bond symbol.
  void plan(int u, int parent) {
    visited[u] = 1;
    for (int v : neighbors_in_rank_order(u)) {
      if (v == parent) continue;
      const int p = pair_index(g.n, u, v);
      if (visited[v]) {
        if (paired_edges.insert(p).second) {
          const int digit = next_digit++;
          digits[v].emplace_back(digit, g.edge(u, v));
          digits[u].emplace_back(digit, -1);
        }
        continue;
      }
      paired_edges.insert(p);
      tree_children[u].push_back(v);
      plan(v, u);
    }
  }

  std::string atom_token(int u) const {
    const NodeCategory& c = vocab.node(g.nodes[u]);
    if (c.charge == 0) return c.symbol;
    std::string t = "[" + c.symbol;
    const int magnitude = c.charge > 0 ? c.charge : -c.charge;
    for (int k = 0; k < magnitude; ++k) t += c.charge > 0 ? '+' : '-';
    return t + "]";
  }

  static std::string bond_token(int order) {
    switch (order) {
      case kBondDouble:
        return "=";
      case kBondTriple:
        return "#";
      default:
        return "";
    }
  }

  std::string digit_token(int digit) const {
    require(digit < 100, errc::invalid_graph, "smiles_write: too many ring closures");
    return digit < 10 ? std::to_string(digit) : "%" + std::to_string(digit);
  }

  void emit(int u) {
    out += atom_token(u);
    auto ds = digits[u];
    std::sort(ds.begin(), ds.end());
    for (auto [digit, order] : ds) {
      if (order >= 0) out += bond_token(order);
      out += digit_token(digit);
    }
    const auto& children = tree_children[u];
    for (std::size_t k = 0; k < children.size(); ++k) {
      const int v = children[k];
      const bool last = (k + 1 == children.size());
      const std::string bond = bond_token(g.edge(u, v));
      if (!last) out += "(";
      out += bond;
      emit(v);
      if (!last) out += ")";
    }
  }

  std::string run() {
    require(valence_check(g, vocab), errc::invalid_graph,
            "smiles_write: graph fails valence/connectivity check");
    int root = 0;
    for (int i = 0; i < g.n; ++i) {
      if (rank[i] == 0) root = i;
    }
    plan(root, -1);
    emit(root);
    return out;
  }
};

}  // namespace detail

/// Parses the supported SMILES subset (kekulized, no aromatics / isotopes /
/// stereo) into complete-graph form. Hydrogens are implicit.
inline MolecularGraph smiles_parse(std::string_view text, const Vocabulary& vocab) {
  detail::SmilesParser p(text, vocab);
  return p.run();
}

/// Writes a SMILES string in canonical atom order; the output re-parses to a
/// graph isomorphic to the input. Requires a graph passing valence_check.
inline std::string smiles_write(const MolecularGraph& g, const Vocabulary& vocab) {
  detail::SmilesWriter w(g, vocab);
  return w.run();
}

}  // namespace moldiff
