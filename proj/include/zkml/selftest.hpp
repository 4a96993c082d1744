// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zkml/arithmetizer.hpp"
#include "zkml/gen.hpp"

namespace zkml {

/// Empty when the witness satisfies every constraint and its activation and
/// logit cells equal the interpreter's; otherwise a description.
std::string equivalence_failure(const CompiledCircuit& circuit, const ModelGraph& graph, const QuantTensor& input,
                                const Assignment& witness, unsigned threads = 1);

/// Picks an assigned advice cell uniformly at random.
class TamperSampler {
 public:
  explicit TamperSampler(const Assignment& witness);
  Cell pick(gen::Rng& rng) const;
  uint64_t assigned_cells() const { return total_; }

 private:
  std::vector<std::pair<ColumnId, std::vector<uint32_t>>> rows_;
  std::vector<uint64_t> prefix_;
  uint64_t total_ = 0;
};

/// Adds one to the cell (mod p).
void tamper(const CircuitLayout& layout, Assignment& witness, Cell cell);

struct SelftestOptions {
  uint64_t seed = 1;
  int models = 20;
  int tampers_per_model = 10;
  gen::ModelOptions model{.min_layers = 1, .max_layers = 3, .max_hw = 6, .max_channels = 4};
  CompileConfig config;
  unsigned threads = 1;
};

struct SelftestReport {
  int models = 0;
  int equivalence_failures = 0;
  int tamper_trials = 0;
  int tampers_detected = 0;
  std::vector<std::string> failures;

  bool ok() const { return equivalence_failures == 0 && tampers_detected == tamper_trials; }
  std::string to_json() const;
};

/// Oracle-equivalence and tamper suites on the bundled models followed by
/// `options.models` random ones.
SelftestReport run_selftest(const SelftestOptions& options);

/// Hand-written models shipped with the library (JSON text).
const std::vector<std::string>& bundled_models();

}  // namespace zkml
