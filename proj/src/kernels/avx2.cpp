// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2; only reached after the dispatcher confirmed CPU support.

#include <immintrin.h>

#include "zkml/kernels.hpp"

namespace zkml::kernels::avx2 {

int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  // (x - z) spans [-255, 255] and w spans [-128, 127]: each madd pair sum
  // stays below 2^17, so int16 operands with int32 accumulation are exact.
  const __m256i z = _mm256_set1_epi16(static_cast<int16_t>(zero_point));
  __m256i acc = _mm256_setzero_si256();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    __m256i xv = _mm256_cvtepu8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(x + i)));
    __m256i wv = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(w + i)));
    acc = _mm256_add_epi32(acc, _mm256_madd_epi16(_mm256_sub_epi16(xv, z), wv));
  }
  __m128i s = _mm_add_epi32(_mm256_castsi256_si128(acc), _mm256_extracti128_si256(acc, 1));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(1, 0, 3, 2)));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, _MM_SHUFFLE(2, 3, 0, 1)));
  int32_t total = _mm_cvtsi128_si32(s);
  for (; i < n; ++i) total += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
  return total;
}

void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  const __m256i z = _mm256_set1_epi32(zero_point);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i xv = _mm256_cvtepu8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(x + i)));
    __m256i wv = _mm256_cvtepi8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(w + i)));
    __m256i av = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(acc + i));
    av = _mm256_add_epi32(av, _mm256_mullo_epi32(_mm256_sub_epi32(xv, z), wv));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(acc + i), av);
  }
  for (; i < n; ++i) acc[i] += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
}

void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point) {
  const __m256i z = _mm256_set1_epi32(zero_point);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i xv = _mm256_cvtepu8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(x + i)));
    __m256i av = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(acc + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(acc + i), _mm256_add_epi32(av, _mm256_sub_epi32(xv, z)));
  }
  for (; i < n; ++i) acc[i] += static_cast<int32_t>(x[i]) - zero_point;
}

}  // namespace zkml::kernels::avx2
