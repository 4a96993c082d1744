// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "zkml/arithmetizer.hpp"
#include "zkml/circuit.hpp"

// Binary layout and witness files. All integers are little-endian; field
// elements are 32-byte little-endian canonical residues.
//
// Layout ("ZKMLLAY\0", u32 version = 1):
//   modulus, u64 n_rows, str metadata,
//   u32 n_columns  { u8 kind, str name }
//   u32 n_gates    { str name, u32 selector, u32 n_nodes { u8 op, u32 arg, [elem if constant] } }
//   u32 n_tables   { str name, u32 arity, u64 n_values { elem } }
//   u32 n_lookups  { str name, u32 table, u32 selector, u32 n_inputs { u32 column } }
//   u64 n_copies   { u32 col, u32 row, u32 col, u32 row }
//   u32 n_instance { u32 col, u32 row }
//   per fixed column, in column order: u32 len { elem }
// where str is u32 length + bytes.
//
// Witness ("ZKMLWIT\0", u32 version = 1), column-major:
//   modulus, u64 n_rows, u32 n_columns,
//   per advice column, in column order: u32 len, ceil(len/8) bytes of
//   assigned-bitmap (LSB first), len elements; rows >= len are unassigned.
//   u32 n_instance { elem }

namespace zkml {

std::string serialize_layout(const CircuitLayout& layout);
/// Throws FormatError on truncated or inconsistent input.
CircuitLayout deserialize_layout(std::string_view bytes);

std::string serialize_witness(const CircuitLayout& layout, const Assignment& witness);
/// Throws FormatError when the witness does not belong to `layout`.
Assignment deserialize_witness(std::string_view bytes, const CircuitLayout& layout);

/// CLI configuration file: the compile-config keys, where `sponge_params`
/// may also be a path (relative to the config file) to a sponge params file.
CompileConfig load_config_file(const std::string& path);

}  // namespace zkml
