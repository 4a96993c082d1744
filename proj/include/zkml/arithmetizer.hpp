// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "zkml/circuit.hpp"
#include "zkml/commitment.hpp"
#include "zkml/interpreter.hpp"
#include "zkml/model.hpp"

namespace zkml {

struct CompileConfig {
  std::shared_ptr<const Field> field = Field::bn254();
  /// Inputs per DOT / ADD row.
  int gate_width = 8;
  /// Rows per column group before a fresh group is opened.
  uint32_t max_rows = 1u << 20;
  /// Largest lookup table (clip tables and the remainder range table).
  uint64_t lookup_cap = 1u << 20;
  /// Rescale every layer to the lcm of all divisors instead of rejecting
  /// models whose divisors differ.
  bool renormalize_divisors = true;
  Visibility visibility = Visibility::hidden_input_hidden_weights;
  SpongeParams sponge;

  void validate() const;
  /// Keys: modulus, gate_width, max_rows, lookup_cap, renormalize_divisors,
  /// visibility, sponge_params (object). Missing keys keep their defaults.
  static CompileConfig from_json(std::string_view text);
  std::string to_json() const;
};

struct CircuitStats {
  uint64_t n_rows = 0;          // padded to a power of two
  uint64_t n_rows_logical = 0;  // highest used row + 1
  uint64_t n_columns = 0;
  uint64_t n_advice_columns = 0;
  uint64_t n_fixed_columns = 0;
  uint64_t n_instance = 0;
  uint64_t n_gates = 0;
  uint64_t n_lookup_tables = 0;
  uint64_t n_clip_tables = 0;
  uint64_t n_lookup_args = 0;
  uint64_t n_copy_constraints = 0;
  uint64_t max_degree = 0;
  uint64_t n_groups = 0;
  uint64_t dot_rows = 0;
  uint64_t add_rows = 0;
  uint64_t div_rows = 0;
  uint64_t sponge_rows = 0;
  uint64_t divisor = 0;

  std::string to_json() const;
  friend bool operator==(const CircuitStats&, const CircuitStats&) = default;
};

struct LayerCells {
  std::vector<Cell> acc;
  std::vector<Cell> act;
};

struct CompiledCircuit {
  CompileConfig config;
  CircuitLayout layout;
  CircuitStats stats;
  /// Where each layer's accumulators and activations live. Not serialized.
  std::vector<LayerCells> layer_cells;
  std::vector<Cell> input_cells;
  /// SHA-256 of the canonical model file the circuit was compiled from.
  std::string model_digest;
};

/// Lowers a model to a Plonkish layout. Throws CompileError when the
/// accumulator range does not fit the lookup cap or the modulus, or when
/// divisors differ and renormalization is off.
CompiledCircuit compile(const ModelGraph& graph, const CompileConfig& cfg);

struct ClipTable {
  LookupTable table;
  /// Added to the quotient d to form the lookup key.
  int64_t offset = 0;
  int64_t d_min = 0;
  int64_t d_max = 0;
};

/// Table of (d + offset, clip(d + z_out, 0, 255)) for every quotient d
/// reachable from accumulators in `bounds` under scale `s`.
ClipTable build_clip_table(const Field& field, Bounds bounds, const ScaleFactor& s, int32_t z_out, uint64_t cap);

/// Honest witness for `input`. Throws CompileError when the circuit was
/// compiled from a different graph, ModelError on input mismatch.
Assignment assign_witness(const CompiledCircuit& circuit, const ModelGraph& graph, const QuantTensor& input);

/// Activation codes read back from the witness, per layer (empty for output).
std::vector<std::vector<uint8_t>> extract_activations(const CompiledCircuit& circuit, const Assignment& witness);

}  // namespace zkml
