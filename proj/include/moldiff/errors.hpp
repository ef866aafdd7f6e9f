//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace moldiff {

enum class errc {
  unsupported_token,
  unclosed_ring,
  unbalanced_parenthesis,
  unknown_element,
  invalid_graph,
  width_mismatch,
  empty_input,
  bin_mismatch,
  not_normalized,
  step_out_of_range,
  missing_marginals,
  shape_mismatch,
  vocabulary_violation,
  non_positive_activity,
  length_mismatch,
  empty_dataset,
  degenerate_labels,
  digest_mismatch,
  constraint_too_large,
  training_diverged,
  io_error,
  bad_config,
};

/// Library-wide exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace moldiff
