// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

// Integer inner loops of quantized inference. Every routine has a scalar
// reference version and optional SIMD versions; all variants must produce
// bit-identical results. The active variant is picked once from the CPU
// features (override with ZKML_ISA=scalar|avx2|neon or force_isa()).
//
// Preconditions shared by all kernels: results fit in int32. The model
// loader enforces this through accumulator bounds.

namespace zkml::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
/// Variants compiled into this binary and supported by the running CPU.
std::vector<Isa> available_isas();
Isa active_isa();
/// Throws std::invalid_argument when the variant is unavailable.
void force_isa(Isa isa);

/// sum_i (x[i] - zero_point) * w[i]
int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);

/// acc[i] += (x[i] - zero_point) * w[i]
void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);

/// acc[i] += x[i] - zero_point
void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point);

// Direct entry points to each variant, used by the equivalence tests.
namespace scalar {
int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point);
}  // namespace scalar

#if defined(ZKML_HAVE_AVX2)
namespace avx2 {
int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point);
}  // namespace avx2
#endif

#if defined(ZKML_HAVE_NEON)
namespace neon {
int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point);
void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point);
}  // namespace neon
#endif

}  // namespace zkml::kernels
