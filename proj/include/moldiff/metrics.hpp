//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <set>
#include <string>
#include <vector>

#include "moldiff/canonical.hpp"
#include "moldiff/graph.hpp"

namespace moldiff {

struct GenerationMetrics {
  double validity = 0.0;         // fraction of generated graphs passing valence_check
  double uniqueness = 0.0;       // distinct canonical keys among valid / valid
  double novelty = 0.0;          // distinct valid keys absent from the training set / distinct
  double available_ratio = 0.0;  // valid, unique and novel simultaneously / generated
  int n_generated = 0;
  int n_valid = 0;
  int n_distinct = 0;
  int n_novel = 0;
};

/// Table-style generation quality metrics. available_ratio counts each novel
/// distinct valid key once, so it factorizes as validity * uniqueness * novelty.
inline GenerationMetrics generation_metrics(const std::vector<MolecularGraph>& generated,
                                            const std::set<std::string>& training_keys,
                                            const Vocabulary& vocab) {
  require(!generated.empty(), errc::empty_input, "generation_metrics: no molecules");
  GenerationMetrics m;
  m.n_generated = static_cast<int>(generated.size());
  std::set<std::string> distinct;
  std::set<std::string> novel;
  for (const auto& g : generated) {
    if (!valence_check(g, vocab)) continue;
    ++m.n_valid;
    std::string key = canonical_key(g);
    distinct.insert(key);
    if (!training_keys.count(key)) novel.insert(std::move(key));
  }
  m.n_distinct = static_cast<int>(distinct.size());
  m.n_novel = static_cast<int>(novel.size());
  m.validity = static_cast<double>(m.n_valid) / m.n_generated;
  m.uniqueness = m.n_valid ? static_cast<double>(m.n_distinct) / m.n_valid : 0.0;
  m.novelty = m.n_distinct ? static_cast<double>(m.n_novel) / m.n_distinct : 0.0;
  m.available_ratio = static_cast<double>(m.n_novel) / m.n_generated;
  return m;
}

}  // namespace moldiff
