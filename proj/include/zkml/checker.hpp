// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zkml/circuit.hpp"

namespace zkml {

enum class ViolationKind : uint8_t { gate, lookup, copy, instance };
std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::gate;
  /// Gate id, lookup-argument id, copy-constraint index or instance index.
  uint32_t id = 0;
  uint64_t row = 0;
  std::string detail;

  friend auto operator<=>(const Violation&, const Violation&) = default;
};

struct CheckOptions {
  /// Violations kept in the report; the total is always exact.
  size_t cap = 1000;
};

struct CheckResult {
  /// Sorted by (kind, id, row, detail), truncated to the cap.
  std::vector<Violation> violations;
  uint64_t total = 0;
  uint64_t rows_checked = 0;

  bool ok() const { return total == 0; }
  std::string to_json(const CircuitLayout& layout) const;
};

/// Evaluates every enabled gate, lookup, copy constraint and instance
/// binding. Throws CircuitError when the assignment does not fit the layout.
CheckResult check(const CircuitLayout& layout, const Assignment& assignment, const CheckOptions& options = {});

/// Same result as check() for any shard count; shards run on separate threads.
CheckResult check_parallel(const CircuitLayout& layout, const Assignment& assignment, unsigned shards,
                           const CheckOptions& options = {});

}  // namespace zkml
