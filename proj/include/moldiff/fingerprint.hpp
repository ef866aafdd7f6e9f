//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "moldiff/graph.hpp"

namespace moldiff {

/// Fixed-width bitset for hashed structural fingerprints.
struct Fingerprint {
  int n_bits = 0;
  std::vector<std::uint64_t> words;

  explicit Fingerprint(int bits = 0) : n_bits(bits), words((bits + 63) / 64, 0) {}

  void set(int bit) { words[bit >> 6] |= std::uint64_t(1) << (bit & 63); }
  bool test(int bit) const { return (words[bit >> 6] >> (bit & 63)) & 1; }

  int popcount() const {
    int c = 0;
    for (auto w : words) c += std::popcount(w);
    return c;
  }

  bool operator==(const Fingerprint& o) const { return n_bits == o.n_bits && words == o.words; }
};

namespace detail {

inline void hash_path_into(const std::vector<int>& labels, Fingerprint& fp) {
  // canonical direction: lexicographically smaller of the sequence and its reverse
  std::vector<int> rev(labels.rbegin(), labels.rend());
  const std::vector<int>& key = rev < labels ? rev : labels;
  const std::uint64_t h = fnv1a(key.data(), key.size() * sizeof(int));
  fp.set(static_cast<int>(h % static_cast<std::uint64_t>(fp.n_bits)));
}

inline void enumerate_paths(const MolecularGraph& g, int current, int depth, int max_edges,
                            std::vector<char>& on_path, std::vector<int>& labels,
                            Fingerprint& fp) {
  hash_path_into(labels, fp);
  if (depth == max_edges) return;
  for (int j = 0; j < g.n; ++j) {
    if (on_path[j] || j == current) continue;
    const int e = g.edge(current, j);
    if (e == kBondNone) continue;
    on_path[j] = 1;
    labels.push_back(e + 1000);  // offset keeps edge labels distinct from node labels
    labels.push_back(g.nodes[j]);
    enumerate_paths(g, j, depth + 1, max_edges, on_path, labels, fp);
    labels.pop_back();
    labels.pop_back();
    on_path[j] = 0;
  }
}

}  // namespace detail

/// Hashed fingerprint over all simple bond paths of up to max_path_len edges,
/// labeled by node and edge category sequences. Deterministic.
inline Fingerprint fingerprint(const MolecularGraph& g, int max_path_len = 7, int n_bits = 2048) {
  require(n_bits >= 64, errc::bad_config, "fingerprint: n_bits must be >= 64");
  Fingerprint fp(n_bits);
  std::vector<char> on_path(g.n, 0);
  std::vector<int> labels;
  for (int i = 0; i < g.n; ++i) {
    on_path[i] = 1;
    labels = {g.nodes[i]};
    detail::enumerate_paths(g, i, 0, max_path_len, on_path, labels, fp);
    on_path[i] = 0;
  }
  return fp;
}

/// |a AND b| / |a OR b|; 0 when both sets are empty.
inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  require(a.n_bits == b.n_bits, errc::width_mismatch, "tanimoto: fingerprint width mismatch");
  int inter = 0;
  int uni = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) {
    inter += std::popcount(a.words[w] & b.words[w]);
    uni += std::popcount(a.words[w] | b.words[w]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace moldiff
