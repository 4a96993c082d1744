// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "zkml/kernels.hpp"

namespace zkml::kernels {
namespace {

struct Table {
  Isa isa;
  int32_t (*dot)(const uint8_t*, const int8_t*, size_t, int32_t);
  void (*madd)(int32_t*, const uint8_t*, const int8_t*, size_t, int32_t);
  void (*add_centered)(int32_t*, const uint8_t*, size_t, int32_t);
};

constexpr Table kScalar{Isa::scalar, scalar::dot_u8s8, scalar::madd_u8s8, scalar::add_centered_u8};
#if defined(ZKML_HAVE_AVX2)
constexpr Table kAvx2{Isa::avx2, avx2::dot_u8s8, avx2::madd_u8s8, avx2::add_centered_u8};
#endif
#if defined(ZKML_HAVE_NEON)
constexpr Table kNeon{Isa::neon, neon::dot_u8s8, neon::madd_u8s8, neon::add_centered_u8};
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(ZKML_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(ZKML_HAVE_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
    case Isa::avx2:
#if defined(ZKML_HAVE_AVX2)
      return &kAvx2;
#else
      return nullptr;
#endif
    case Isa::neon:
#if defined(ZKML_HAVE_NEON)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Isa parse_isa(std::string_view s) {
  if (s == "scalar") return Isa::scalar;
  if (s == "avx2") return Isa::avx2;
  if (s == "neon") return Isa::neon;
  throw std::invalid_argument("unknown ISA '" + std::string(s) + "'");
}

const Table* detect() {
  if (const char* env = std::getenv("ZKML_ISA"); env != nullptr && *env != '\0') {
    Isa isa = parse_isa(env);
    if (!cpu_supports(isa)) throw std::invalid_argument("ZKML_ISA requests an unavailable ISA: " + std::string(env));
    return table_for(isa);
  }
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (cpu_supports(isa)) return table_for(isa);
  }
  return &kScalar;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{detect()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

Isa active_isa() { return current().load(std::memory_order_relaxed)->isa; }

void force_isa(Isa isa) {
  if (!cpu_supports(isa)) throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
  current().store(table_for(isa), std::memory_order_relaxed);
}

int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  return current().load(std::memory_order_relaxed)->dot(x, w, n, zero_point);
}

void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  current().load(std::memory_order_relaxed)->madd(acc, x, w, n, zero_point);
}

void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point) {
  current().load(std::memory_order_relaxed)->add_centered(acc, x, n, zero_point);
}

}  // namespace zkml::kernels
