//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "moldiff/errors.hpp"

namespace moldiff {

/// Categorical node label: element symbol plus formal charge.
struct NodeCategory {
  std::string symbol;
  int charge = 0;

  bool operator==(const NodeCategory& o) const { return symbol == o.symbol && charge == o.charge; }
};

// Edge categories are fixed: index == bond order, "none" == 0.
inline constexpr int kBondNone = 0;
inline constexpr int kBondSingle = 1;
inline constexpr int kBondDouble = 2;
inline constexpr int kBondTriple = 3;
inline constexpr int kNumEdgeCategories = 4;

inline const char* bond_name(int order) {
  static const char* names[] = {"none", "single", "double", "triple"};
  return names[order];
}

/// FNV-1a, used for all content digests in the project.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

/// Ordered list of whitelisted (symbol, charge) node categories plus the
/// per-category allowed total bond orders. Index order is significant: it is
/// persisted with every checkpoint and two artifacts interoperate only when
/// their vocabularies are identical.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_categories(std::vector<NodeCategory> nodes,
                                    std::vector<std::vector<int>> valences) {
    require(nodes.size() == valences.size(), errc::bad_config,
            "vocabulary: node/valence list size mismatch");
    Vocabulary v;
    v.nodes_ = std::move(nodes);
    v.valences_ = std::move(valences);
    for (std::size_t i = 0; i < v.nodes_.size(); ++i) {
      auto key = std::make_pair(v.nodes_[i].symbol, v.nodes_[i].charge);
      require(!v.index_.count(key), errc::bad_config,
              "vocabulary: duplicate category " + v.nodes_[i].symbol);
      v.index_[key] = static_cast<int>(i);
    }
    return v;
  }

  /// Desk-scale default: organic subset with a small charge whitelist.
  static Vocabulary default_vocabulary() {
    std::vector<NodeCategory> nodes = {
        {"C", 0},  {"N", -1}, {"N", 0},  {"N", 1},  {"O", -1}, {"O", 0},
        {"F", 0},  {"P", 0},  {"S", 0},  {"Cl", 0}, {"Br", 0}, {"I", 0},
    };
    std::vector<std::vector<int>> valences = {
        {4},     // C
        {2},     // N-
        {3},     // N
        {4},     // N+
        {1},     // O-
        {2},     // O
        {1},     // F
        {3, 5},  // P
        {2, 4, 6},  // S
        {1},     // Cl
        {1},     // Br
        {1},     // I
    };
    return from_categories(std::move(nodes), std::move(valences));
  }

  int num_node_categories() const { return static_cast<int>(nodes_.size()); }
  int num_edge_categories() const { return kNumEdgeCategories; }

  /// Dense index of (symbol, charge), or -1 when the pair is not whitelisted.
  int node_index(const std::string& symbol, int charge) const {
    auto it = index_.find(std::make_pair(symbol, charge));
    return it == index_.end() ? -1 : it->second;
  }

  bool has_symbol(const std::string& symbol) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const NodeCategory& c) { return c.symbol == symbol; });
  }

  const NodeCategory& node(int idx) const { return nodes_.at(idx); }
  const std::vector<int>& allowed_valences(int idx) const { return valences_.at(idx); }

  int max_valence(int idx) const {
    const auto& v = valences_.at(idx);
    return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
  }

  bool operator==(const Vocabulary& o) const {
    return nodes_ == o.nodes_ && valences_ == o.valences_;
  }

  nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& c : nodes_) nodes.push_back({c.symbol, c.charge});
    nlohmann::json edges = nlohmann::json::array();
    for (int e = 0; e < kNumEdgeCategories; ++e) edges.push_back(bond_name(e));
    nlohmann::json valence = nlohmann::json::array();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      valence.push_back({{"symbol", nodes_[i].symbol},
                         {"charge", nodes_[i].charge},
                         {"orders", valences_[i]}});
    }
    return {{"nodes", nodes}, {"edges", edges}, {"valence", valence}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    require(j.contains("nodes") && j.contains("valence"), errc::bad_config,
            "vocabulary json: missing nodes/valence");
    std::vector<NodeCategory> nodes;
    for (const auto& e : j.at("nodes")) {
      nodes.push_back({e.at(0).get<std::string>(), e.at(1).get<int>()});
    }
    std::vector<std::vector<int>> valences(nodes.size());
    const auto& val = j.at("valence");
    require(val.size() == nodes.size(), errc::bad_config,
            "vocabulary json: valence table size mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& row = val.at(i);
      require(row.at("symbol").get<std::string>() == nodes[i].symbol &&
                  row.at("charge").get<int>() == nodes[i].charge,
              errc::bad_config, "vocabulary json: valence row order mismatch");
      valences[i] = row.at("orders").get<std::vector<int>>();
    }
    return from_categories(std::move(nodes), std::move(valences));
  }

  std::uint64_t digest() const {
    std::string s;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      s += nodes_[i].symbol + "|" + std::to_string(nodes_[i].charge) + "[";
      for (int v : valences_[i]) s += std::to_string(v) + ",";
      s += "];";
    }
    s += "E4";
    return fnv1a(s);
  }

 private:
  std::vector<NodeCategory> nodes_;
  std::vector<std::vector<int>> valences_;
  std::map<std::pair<std::string, int>, int> index_;
};

}  // namespace moldiff
